#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace hyperspec {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Throws DataError "missing_column".
    std::size_t column(std::string_view name) const;
    double number(std::size_t row, std::size_t col) const;
    std::int64_t integer(std::size_t row, std::size_t col) const;
};

/// Comma-separated, first line is the header, blank lines and '#' comments skipped.
CsvTable read_csv(const std::string& path);

/// Shortest round-trip representation; "nan" for NaN.
std::string format_number(double v);

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);

    CsvWriter& field(std::string_view s);
    CsvWriter& field(double v);
    CsvWriter& field(std::int64_t v);
    CsvWriter& field(int v) { return field(static_cast<std::int64_t>(v)); }
    CsvWriter& field(std::size_t v) { return field(static_cast<std::int64_t>(v)); }
    void end_row();

private:
    std::ofstream out_;
    bool first_ = true;
};

}  // namespace hyperspec
