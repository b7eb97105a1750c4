#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hyperspec {

enum class Channel : std::uint16_t {
    trigger = 0,
    signal = 1,  // upconverted-signal SPAD
    idler = 2,   // upconverted-idler SPAD
};

bool is_valid_channel(std::uint16_t raw) noexcept;

struct TimeTagRecord {
    Channel channel = Channel::trigger;
    std::uint64_t timestamp_ps = 0;

    friend bool operator==(const TimeTagRecord&, const TimeTagRecord&) = default;
};

inline constexpr std::array<char, 4> stream_magic{'T', 'T', 'G', '1'};
inline constexpr std::uint16_t stream_version = 1;
inline constexpr std::size_t stream_header_bytes = 32;
inline constexpr std::size_t stream_record_bytes = 16;

struct StreamHeader {
    std::uint16_t version = stream_version;
    std::uint64_t resolution_ps = 1;
    std::uint64_t pulse_period_ps = 25'000'000;  // 40 kHz
    std::uint64_t record_count = 0;

    friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

struct DecodedStream {
    StreamHeader header;
    std::vector<TimeTagRecord> records;
};

/// Serializes a stream. `header.record_count` is overwritten with
/// `records.size()`. Throws DataError on unsorted input (position = index of
/// the first out-of-order record) or an invalid channel.
std::vector<std::byte> encode_stream(StreamHeader header,
                                     std::span<const TimeTagRecord> records);

/// Parses a .ttg byte stream. Throws DataError "bad_magic" on a foreign
/// file and "truncated" (position = byte offset) when records are missing.
DecodedStream decode_stream(std::span<const std::byte> bytes);

std::vector<std::byte> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::byte> bytes);

struct CycleEvent {
    Channel channel;
    std::uint64_t relative_ps;
};

/// Non-owning view of one trigger cycle.
struct PulseCycle {
    std::uint64_t trigger_ps;
    std::span<const CycleEvent> events;
};

/// All cycles of one stream, stored contiguously: cycle i owns
/// events[offsets[i], offsets[i+1]).
class CycleTable {
public:
    CycleTable() : offsets_{0} {}

    std::size_t size() const noexcept { return triggers_.size(); }
    bool empty() const noexcept { return triggers_.empty(); }
    PulseCycle operator[](std::size_t i) const {
        return {triggers_[i],
                std::span<const CycleEvent>(events_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i])};
    }
    std::size_t event_count() const noexcept { return events_.size(); }
    std::size_t discarded_count() const noexcept { return discarded_; }

    void begin_cycle(std::uint64_t trigger_ps);
    void add_event(CycleEvent e);
    void add_discarded() noexcept { ++discarded_; }

private:
    std::vector<std::uint64_t> triggers_;
    std::vector<std::size_t> offsets_;
    std::vector<CycleEvent> events_;
    std::size_t discarded_ = 0;
};

/// Assigns every detection to the most recent preceding trigger. Detections
/// before the first trigger are counted in `discarded_count()`. Throws
/// DataError "no_trigger" when the trigger channel is silent.
CycleTable split_by_trigger(std::span<const TimeTagRecord> records);

}  // namespace hyperspec
