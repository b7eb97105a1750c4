#pragma once

#include "hyperspec/source.hpp"
#include "hyperspec/timetag.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hyperspec {

struct ArrivalHistogram {
    Channel channel = Channel::signal;
    std::uint64_t t0_ps = 0;
    std::uint64_t bin_width_ps = 1000;
    std::vector<std::uint64_t> bins;

    std::uint64_t total() const noexcept;
};

struct GateWindow {
    std::uint64_t start_ps = 0;
    std::uint64_t width_ps = 150'000;

    bool contains(std::uint64_t relative_ps) const noexcept {
        return relative_ps >= start_ps && relative_ps - start_ps < width_ps;
    }
    /// Throws ConfigError for zero width or a gate running past the period.
    void validate(std::uint64_t pulse_period_ps) const;
};

/// Histograms trigger-relative arrival times of `channel` over
/// [range_begin_ps, range_end_ps). The range length must be a multiple of the
/// bin width (ConfigError otherwise). Events outside the range are ignored.
ArrivalHistogram build_histogram(const CycleTable& cycles, Channel channel, std::uint64_t bin_width_ps,
                                 std::uint64_t range_begin_ps, std::uint64_t range_end_ps);

/// Places a gate of `width_ps` (a whole number of bins) where it encloses the
/// most counts. Among equally good placements the one centred on the counts
/// enclosed by the earliest best placement wins; if centring would lose
/// counts, the earliest best placement is kept. Throws DataError
/// "no_photons" for an empty histogram.
GateWindow auto_gate(const ArrivalHistogram& hist, std::uint64_t width_ps);

struct GatedWindows {
    std::vector<WindowCounts> windows;
    std::size_t dropped_cycles = 0;  // cycles of a trailing partial window
};

/// Groups cycles into consecutive windows of `window_duration_s` measured
/// from the first trigger and counts gated clicks per channel. A trailing
/// window shorter than `window_duration_s` is dropped.
GatedWindows gated_counts(const CycleTable& cycles, const GateWindow& gate_signal, const GateWindow& gate_idler,
                          double window_duration_s, std::uint64_t pulse_period_ps, double wavelength_nm = 0.0,
                          ScanPoint point = {});

void write_histogram_csv(const std::string& path, const ArrivalHistogram& hist);

}  // namespace hyperspec
