#include "hyperspec/csv.hpp"

#include "hyperspec/error.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace hyperspec {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string_view rest(line);
    while (true) {
        const auto comma = rest.find(',');
        out.push_back(trim(rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    return out;
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw DataError("missing_column", "CSV has no column '" + std::string(name) + "'");
}

double CsvTable::number(std::size_t row, std::size_t col) const {
    const std::string& s = rows.at(row).at(col);
    if (s == "nan" || s == "NaN") return std::nan("");
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("bad_number", "row " + std::to_string(row + 1) + ": '" + s + "' is not a number", row);
    }
}

std::int64_t CsvTable::integer(std::size_t row, std::size_t col) const {
    const std::string& s = rows.at(row).at(col);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw DataError("bad_number", "row " + std::to_string(row + 1) + ": '" + s + "' is not an integer", row);
    }
    return v;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("io", "cannot open " + path);
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        auto fields = split_line(stripped);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw DataError("bad_row", path + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                                           std::to_string(fields.size()) + " fields, expected " +
                                           std::to_string(t.header.size()),
                            t.rows.size());
        }
        t.rows.push_back(std::move(fields));
    }
    if (!have_header) throw DataError("empty_input", path + " is empty");
    return t;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::trunc) {
    if (!out_) throw ConfigError("io", "cannot write " + path);
    for (const auto& h : header) field(h);
    end_row();
}

CsvWriter& CsvWriter::field(std::string_view s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
}

CsvWriter& CsvWriter::field(double v) { return field(std::string_view(format_number(v))); }

CsvWriter& CsvWriter::field(std::int64_t v) { return field(std::string_view(std::to_string(v))); }

void CsvWriter::end_row() {
    out_ << '\n';
    first_ = true;
}

}  // namespace hyperspec
