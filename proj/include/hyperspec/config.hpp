#pragma once

#include "hyperspec/hypercube.hpp"
#include "hyperspec/scan.hpp"
#include "hyperspec/source.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace hyperspec {

/// Minimal TOML-style reader: `[section]` headers, `key = value` lines,
/// numbers, booleans, quoted strings and (nested) numeric arrays. Keys are
/// addressed as "section.key".
class ConfigFile {
public:
    static ConfigFile parse(std::string_view text);
    static ConfigFile load(const std::string& path);

    bool has(const std::string& key) const;
    double number(const std::string& key, double fallback) const;
    std::int64_t integer(const std::string& key, std::int64_t fallback) const;
    bool boolean(const std::string& key, bool fallback) const;
    std::string string(const std::string& key, const std::string& fallback) const;
    std::vector<double> numbers(const std::string& key) const;
    std::vector<std::vector<double>> number_rows(const std::string& key) const;

    /// Throws ConfigError for any key that was never read.
    void reject_unused() const;

private:
    const std::string& raw(const std::string& key) const;
    std::map<std::string, std::string> values_;
    std::map<std::string, int> lines_;
    mutable std::set<std::string> used_;
};

struct GateSettings {
    double width_ns = 150.0;
    double bin_width_ns = 1.0;
    std::optional<double> signal_start_ns;  // auto placement when unset
    std::optional<double> idler_start_ns;
    double window_s = 2.0;
};

struct StreamSettings {
    double duration_s = 1.0;
    double transmission = 1.0;
    double wavelength_nm = 3000.0;
};

struct DemoSettings {
    int grid = 16;
    int planes = 5;
    double drift_slope_per_s = 0.005;
    double calibration_counts = 1e4;
};

struct PathSettings {
    std::string phantom, stream, windows, raw, ftir, spectrum, calibration, cube;
};

struct PipelineConfig {
    SourceConfig source;
    ScanPlanConfig scan;
    double drift_slope_per_s = 0.0;
    GateSettings gate;
    StreamSettings stream;
    DemoSettings demo;
    PathSettings paths;
    std::optional<std::uint64_t> seed;
    bool use_rescaling = true;
    ContrastMode contrast_mode = ContrastMode::difference;
    std::optional<double> lambda_a_nm, lambda_b_nm;
    std::optional<std::vector<int>> region;  // x0, y0, x1, y1
    unsigned threads = 1;
};

/// Relative paths in [paths] resolve against `base_dir`.
PipelineConfig load_pipeline_config(const ConfigFile& file, const std::string& base_dir = "");
PipelineConfig load_pipeline_config(const std::string& path);

}  // namespace hyperspec
