#include "hyperspec/config.hpp"

#include "hyperspec/error.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hyperspec {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// strips a trailing comment that is not inside a quoted string
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

double to_number(const std::string& key, const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (trim(std::string_view(s).substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("bad_value", key + ": '" + s + "' is not a number");
}

// splits the top-level elements of "[a, b, [c, d]]"
std::vector<std::string> split_array(const std::string& key, const std::string& s) {
    const std::string t = trim(s);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']') throw ConfigError("bad_value", key + ": expected an array");
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
        const char c = t[i];
        if (c == '[') ++depth;
        if (c == ']') --depth;
        if (c == ',' && depth == 0) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view text) {
    ConfigFile cfg;
    std::istringstream in{std::string(text)};
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[' && s.back() == ']' && s.find('=') == std::string::npos) {
            section = trim(std::string_view(s).substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("bad_syntax", "line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(s).substr(0, eq));
        const std::string value = trim(std::string_view(s).substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("bad_syntax", "line " + std::to_string(lineno) + ": empty key or value");
        }
        const std::string full = section.empty() ? key : section + "." + key;
        if (cfg.values_.count(full)) {
            throw ConfigError("duplicate_key", "line " + std::to_string(lineno) + ": duplicate key " + full);
        }
        cfg.values_[full] = value;
        cfg.lines_[full] = lineno;
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("io", "cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool ConfigFile::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& ConfigFile::raw(const std::string& key) const {
    used_.insert(key);
    return values_.at(key);
}

double ConfigFile::number(const std::string& key, double fallback) const {
    return has(key) ? to_number(key, raw(key)) : fallback;
}

std::int64_t ConfigFile::integer(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    const double v = to_number(key, raw(key));
    if (v != static_cast<double>(static_cast<std::int64_t>(v))) {
        throw ConfigError("bad_value", key + " must be an integer");
    }
    return static_cast<std::int64_t>(v);
}

bool ConfigFile::boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("bad_value", key + " must be true or false");
}

std::string ConfigFile::string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

std::vector<double> ConfigFile::numbers(const std::string& key) const {
    std::vector<double> out;
    if (!has(key)) return out;
    for (const auto& e : split_array(key, raw(key))) out.push_back(to_number(key, e));
    return out;
}

std::vector<std::vector<double>> ConfigFile::number_rows(const std::string& key) const {
    std::vector<std::vector<double>> out;
    if (!has(key)) return out;
    for (const auto& row : split_array(key, raw(key))) {
        std::vector<double> r;
        for (const auto& e : split_array(key, row)) r.push_back(to_number(key, e));
        out.push_back(std::move(r));
    }
    return out;
}

void ConfigFile::reject_unused() const {
    for (const auto& [k, v] : values_) {
        if (!used_.count(k)) {
            throw ConfigError("unknown_key", "line " + std::to_string(lines_.at(k)) + ": unknown key " + k);
        }
    }
}

PipelineConfig load_pipeline_config(const ConfigFile& f, const std::string& base_dir) {
    PipelineConfig c;

    auto& s = c.source;
    s.rep_rate_hz = f.number("source.rep_rate_hz", s.rep_rate_hz);
    s.pulse_duration_ns = f.number("source.pulse_duration_ns", s.pulse_duration_ns);
    s.mean_pairs_per_pulse = f.number("source.mean_pairs_per_pulse", s.mean_pairs_per_pulse);
    s.signal_chain_efficiency = f.number("source.signal_chain_efficiency", s.signal_chain_efficiency);
    s.idler_chain_efficiency = f.number("source.idler_chain_efficiency", s.idler_chain_efficiency);
    s.dark_rate_signal_hz = f.number("source.dark_rate_signal_hz", s.dark_rate_signal_hz);
    s.dark_rate_idler_hz = f.number("source.dark_rate_idler_hz", s.dark_rate_idler_hz);
    s.excess_noise_sigma = f.number("source.excess_noise_sigma", s.excess_noise_sigma);
    s.jitter_sigma_ns = f.number("source.jitter_sigma_ns", s.jitter_sigma_ns);
    s.arrival_offset_ns = f.number("source.arrival_offset_ns", s.arrival_offset_ns);
    s.window_s = f.number("source.window_s", s.window_s);
    if (f.has("source.conversion_profile")) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& row : f.number_rows("source.conversion_profile")) {
            if (row.size() != 2) throw ConfigError("bad_value", "conversion_profile entries must be [wavelength, factor]");
            pts.emplace_back(row[0], row[1]);
        }
        s.conversion_profile = ConversionProfile(std::move(pts));
    }
    s.validate();

    auto& p = c.scan;
    p.x_extent_um = f.number("scan.x_extent_um", p.x_extent_um);
    p.y_extent_um = f.number("scan.y_extent_um", p.y_extent_um);
    p.step_um = f.number("scan.step_um", p.step_um);
    p.wavelengths_nm = f.numbers("scan.wavelengths_nm");
    p.wavelength_start_nm = f.number("scan.wavelength_start_nm", p.wavelength_start_nm);
    p.wavelength_stop_nm = f.number("scan.wavelength_stop_nm", p.wavelength_stop_nm);
    p.wavelength_step_nm = f.number("scan.wavelength_step_nm", p.wavelength_step_nm);
    p.dwell_s = f.number("scan.dwell_s", p.dwell_s);
    p.reference_points_per_plane =
        static_cast<int>(f.integer("scan.reference_points_per_plane", p.reference_points_per_plane));
    c.drift_slope_per_s = f.number("scan.drift_slope_per_s", c.drift_slope_per_s);

    auto& g = c.gate;
    g.width_ns = f.number("gate.width_ns", g.width_ns);
    g.bin_width_ns = f.number("gate.bin_width_ns", g.bin_width_ns);
    if (f.has("gate.signal_start_ns")) g.signal_start_ns = f.number("gate.signal_start_ns", 0.0);
    if (f.has("gate.idler_start_ns")) g.idler_start_ns = f.number("gate.idler_start_ns", 0.0);
    g.window_s = f.number("gate.window_s", s.window_s);

    c.stream.duration_s = f.number("stream.duration_s", c.stream.duration_s);
    c.stream.transmission = f.number("stream.transmission", c.stream.transmission);
    c.stream.wavelength_nm = f.number("stream.wavelength_nm", c.stream.wavelength_nm);

    c.demo.grid = static_cast<int>(f.integer("demo.grid", c.demo.grid));
    c.demo.planes = static_cast<int>(f.integer("demo.planes", c.demo.planes));
    c.demo.drift_slope_per_s = f.number("demo.drift_slope_per_s", c.demo.drift_slope_per_s);
    c.demo.calibration_counts = f.number("demo.calibration_counts", c.demo.calibration_counts);

    auto path = [&](const char* key) {
        std::string v = f.string(std::string("paths.") + key, "");
        if (!v.empty() && !base_dir.empty() && std::filesystem::path(v).is_relative()) {
            v = (std::filesystem::path(base_dir) / v).string();
        }
        return v;
    };
    c.paths.phantom = path("phantom");
    c.paths.stream = path("stream");
    c.paths.windows = path("windows");
    c.paths.raw = path("raw");
    c.paths.ftir = path("ftir");
    c.paths.spectrum = path("spectrum");
    c.paths.calibration = path("calibration");
    c.paths.cube = path("cube");

    if (f.has("pipeline.seed")) {
        const auto seed = f.integer("pipeline.seed", 0);
        if (seed < 0) throw ConfigError("bad_value", "pipeline.seed must be non-negative");
        c.seed = static_cast<std::uint64_t>(seed);
    }
    c.use_rescaling = f.boolean("pipeline.use_rescaling", c.use_rescaling);
    c.contrast_mode = parse_contrast_mode(f.string("pipeline.contrast_mode", "difference"));
    if (f.has("pipeline.lambda_a_nm")) c.lambda_a_nm = f.number("pipeline.lambda_a_nm", 0.0);
    if (f.has("pipeline.lambda_b_nm")) c.lambda_b_nm = f.number("pipeline.lambda_b_nm", 0.0);
    if (f.has("pipeline.region")) {
        std::vector<int> r;
        for (double v : f.numbers("pipeline.region")) r.push_back(static_cast<int>(v));
        if (r.size() != 4) throw ConfigError("bad_value", "pipeline.region must be [x0, y0, x1, y1]");
        c.region = r;
    }
    const auto threads = f.integer("pipeline.threads", 1);
    if (threads < 1) throw ConfigError("bad_value", "pipeline.threads must be at least 1");
    c.threads = static_cast<unsigned>(threads);

    f.reject_unused();
    return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    const auto file = ConfigFile::load(path);
    return load_pipeline_config(file, std::filesystem::path(path).parent_path().string());
}

}  // namespace hyperspec
