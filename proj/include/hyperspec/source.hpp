#pragma once

#include "hyperspec/scan.hpp"
#include "hyperspec/timetag.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace hyperspec {

/// Relative upconversion efficiency versus wavelength, linearly
/// interpolated. An empty profile is flat at 1.
class ConversionProfile {
public:
    ConversionProfile() = default;
    explicit ConversionProfile(std::vector<std::pair<double, double>> points);

    bool empty() const noexcept { return points_.empty(); }
    const std::vector<std::pair<double, double>>& points() const noexcept { return points_; }

    /// Throws DataError "domain" outside the tabulated range.
    double factor(double wavelength_nm) const;

private:
    std::vector<std::pair<double, double>> points_;
};

struct SourceConfig {
    double rep_rate_hz = 40'000.0;
    double pulse_duration_ns = 15.0;
    double mean_pairs_per_pulse = 1.0;
    double signal_chain_efficiency = 0.03;
    double idler_chain_efficiency = 0.13;
    double dark_rate_signal_hz = 0.0;
    double dark_rate_idler_hz = 0.0;
    double excess_noise_sigma = 0.05;
    double jitter_sigma_ns = 3.0;
    double arrival_offset_ns = 50.0;
    double window_s = 2.0;
    ConversionProfile conversion_profile;

    std::uint64_t pulse_period_ps() const;
    /// Throws ConfigError naming the first offending field.
    void validate() const;
};

struct WindowCounts {
    std::int64_t n_signal = 0;
    std::int64_t n_idler = 0;
    double window_duration_s = 2.0;
    double wavelength_nm = 0.0;
    ScanPoint point;
};

/// One window of gated counts for a (pair-number scale, transmission) setting.
/// `pair_scale` multiplies the mean pair number (slow source drift).
WindowCounts simulate_window(const SourceConfig& cfg, double transmission, double wavelength_nm,
                             std::uint64_t seed, double pair_scale = 1.0);

/// Time-tag events for `duration_s` of acquisition. Triggers are exactly
/// periodic; correlated clicks are jittered around `arrival_offset_ns` and
/// darks are uniform over each cycle.
DecodedStream simulate_events(const SourceConfig& cfg, double transmission, double wavelength_nm,
                              double duration_s, std::uint64_t seed);

std::vector<std::byte> simulate_stream(const SourceConfig& cfg, double transmission, double wavelength_nm,
                                       double duration_s, std::uint64_t seed);

/// Sample transmission keyed by (ix, iy, wavelength).
class Phantom {
public:
    void set(int ix, int iy, double wavelength_nm, double transmission);
    /// Throws DataError "missing_point" naming the point.
    double at(int ix, int iy, double wavelength_nm) const;
    std::size_t size() const noexcept { return values_.size(); }

    static Phantom uniform(const ScanPlan& plan, double transmission);
    static Phantom from_csv(const std::string& path);
    void write_csv(const std::string& path) const;

private:
    using Key = std::tuple<int, int, std::int64_t>;
    static Key key(int ix, int iy, double wavelength_nm);
    std::map<Key, double> values_;
};

struct RawWindow {
    WindowCounts counts;
    std::size_t plane = 0;
    std::size_t batch_index = 0;
    double t_mid_s = 0.0;
};

struct RawDataset {
    ScanPlan plan;
    std::vector<RawWindow> windows;  // acquisition order
};

/// Simulates a full scan. The mean pair number drifts as 1 + drift_slope·t
/// on the scan clock; reference batches see transmission 1. Each window draws
/// from its own substream, so the result is independent of `threads`.
RawDataset simulate_scan(const SourceConfig& cfg, const Phantom& phantom, const ScanPlan& plan,
                         double drift_slope_per_s, std::uint64_t seed, unsigned threads = 1);

void write_raw_csv(const std::string& path, const RawDataset& raw);
/// Reads windows back; the plan must be supplied separately.
std::vector<RawWindow> read_raw_csv(const std::string& path);

}  // namespace hyperspec
