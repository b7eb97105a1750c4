#include "hyperspec/timetag.hpp"

#include "hyperspec/error.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace hyperspec {

namespace {

template <typename T>
void put_le(std::vector<std::byte>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::byte>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFFu));
    }
}

template <typename T>
T get_le(std::span<const std::byte> bytes, std::size_t offset) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(bytes[offset + i])) << (8 * i);
    }
    return static_cast<T>(v);
}

}  // namespace

bool is_valid_channel(std::uint16_t raw) noexcept { return raw <= 2; }

std::vector<std::byte> encode_stream(StreamHeader header, std::span<const TimeTagRecord> records) {
    if (header.pulse_period_ps == 0) {
        throw ConfigError("bad_header", "pulse_period_ps must be positive");
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!is_valid_channel(static_cast<std::uint16_t>(records[i].channel))) {
            throw DataError("bad_channel", "invalid channel at record " + std::to_string(i), i);
        }
        if (i > 0 && records[i].timestamp_ps < records[i - 1].timestamp_ps) {
            throw DataError("unsorted", "timestamps decrease at record " + std::to_string(i), i);
        }
    }
    header.record_count = records.size();

    std::vector<std::byte> out;
    out.reserve(stream_header_bytes + stream_record_bytes * records.size());
    for (char c : stream_magic) out.push_back(static_cast<std::byte>(c));
    put_le<std::uint16_t>(out, header.version);
    put_le<std::uint16_t>(out, 0);
    put_le<std::uint64_t>(out, header.resolution_ps);
    put_le<std::uint64_t>(out, header.pulse_period_ps);
    put_le<std::uint64_t>(out, header.record_count);
    for (const auto& r : records) {
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.channel));
        put_le<std::uint16_t>(out, 0);  // flags
        put_le<std::uint32_t>(out, 0);
        put_le<std::uint64_t>(out, r.timestamp_ps);
    }
    return out;
}

DecodedStream decode_stream(std::span<const std::byte> bytes) {
    if (bytes.size() < stream_magic.size() ||
        !std::equal(stream_magic.begin(), stream_magic.end(), bytes.begin(),
                    [](char c, std::byte b) { return static_cast<std::byte>(c) == b; })) {
        throw DataError("bad_magic", "not a TTG1 stream");
    }
    if (bytes.size() < stream_header_bytes) {
        throw DataError("truncated", "header truncated at byte " + std::to_string(bytes.size()),
                        bytes.size());
    }

    DecodedStream s;
    s.header.version = get_le<std::uint16_t>(bytes, 4);
    s.header.resolution_ps = get_le<std::uint64_t>(bytes, 8);
    s.header.pulse_period_ps = get_le<std::uint64_t>(bytes, 16);
    s.header.record_count = get_le<std::uint64_t>(bytes, 24);
    if (s.header.version != stream_version) {
        throw DataError("bad_version", "unsupported stream version " + std::to_string(s.header.version));
    }
    if (s.header.pulse_period_ps == 0) {
        throw DataError("bad_header", "pulse_period_ps is zero");
    }

    const std::size_t available = (bytes.size() - stream_header_bytes) / stream_record_bytes;
    if (available < s.header.record_count) {
        // offset where the first missing or partial record starts
        const std::size_t offset = stream_header_bytes + available * stream_record_bytes;
        throw DataError("truncated",
                        "header claims " + std::to_string(s.header.record_count) + " records, stream ends at byte " +
                            std::to_string(bytes.size()) + " (record at offset " + std::to_string(offset) +
                            " incomplete)",
                        offset);
    }
    const std::size_t expected_size = stream_header_bytes + s.header.record_count * stream_record_bytes;
    if (bytes.size() != expected_size) {
        throw DataError("trailing_bytes", "unexpected data after last record", expected_size);
    }

    s.records.reserve(s.header.record_count);
    std::size_t offset = stream_header_bytes;
    for (std::uint64_t i = 0; i < s.header.record_count; ++i, offset += stream_record_bytes) {
        const auto ch = get_le<std::uint16_t>(bytes, offset);
        if (!is_valid_channel(ch)) {
            throw DataError("bad_channel", "invalid channel " + std::to_string(ch) + " at byte " + std::to_string(offset),
                            offset);
        }
        const auto ts = get_le<std::uint64_t>(bytes, offset + 8);
        if (!s.records.empty() && ts < s.records.back().timestamp_ps) {
            throw DataError("unsorted", "timestamps decrease at record " + std::to_string(i), i);
        }
        s.records.push_back({static_cast<Channel>(ch), ts});
    }
    return s;
}

std::vector<std::byte> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("io", "cannot open " + path);
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::byte> out(raw.size());
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

void write_file_bytes(const std::string& path, std::span<const std::byte> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("io", "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void CycleTable::begin_cycle(std::uint64_t trigger_ps) {
    triggers_.push_back(trigger_ps);
    offsets_.push_back(events_.size());
}

void CycleTable::add_event(CycleEvent e) {
    events_.push_back(e);
    offsets_.back() = events_.size();
}

CycleTable split_by_trigger(std::span<const TimeTagRecord> records) {
    CycleTable table;
    bool seen_trigger = false;
    std::uint64_t current = 0;
    for (const auto& r : records) {
        if (r.channel == Channel::trigger) {
            seen_trigger = true;
            current = r.timestamp_ps;
            table.begin_cycle(current);
        } else if (!seen_trigger) {
            table.add_discarded();
        } else {
            table.add_event({r.channel, r.timestamp_ps - current});
        }
    }
    if (!seen_trigger) {
        throw DataError("no_trigger", "no trigger events in stream (dead trigger channel)");
    }
    return table;
}

}  // namespace hyperspec
