#include "hyperspec/gating.hpp"

#include "hyperspec/csv.hpp"
#include "hyperspec/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hyperspec {

std::uint64_t ArrivalHistogram::total() const noexcept {
    return std::accumulate(bins.begin(), bins.end(), std::uint64_t{0});
}

void GateWindow::validate(std::uint64_t pulse_period_ps) const {
    if (width_ps == 0) throw ConfigError("gate", "gate width must be positive");
    if (start_ps + width_ps > pulse_period_ps) throw ConfigError("gate", "gate extends past the pulse period");
}

ArrivalHistogram build_histogram(const CycleTable& cycles, Channel channel, std::uint64_t bin_width_ps,
                                 std::uint64_t range_begin_ps, std::uint64_t range_end_ps) {
    if (bin_width_ps == 0) throw ConfigError("histogram", "bin width must be positive");
    if (range_end_ps <= range_begin_ps) throw ConfigError("histogram", "empty histogram range");
    if ((range_end_ps - range_begin_ps) % bin_width_ps != 0) {
        throw ConfigError("histogram", "bin width does not divide the histogram range");
    }
    ArrivalHistogram h;
    h.channel = channel;
    h.t0_ps = range_begin_ps;
    h.bin_width_ps = bin_width_ps;
    h.bins.assign((range_end_ps - range_begin_ps) / bin_width_ps, 0);
    for (std::size_t c = 0; c < cycles.size(); ++c) {
        for (const auto& e : cycles[c].events) {
            if (e.channel != channel || e.relative_ps < range_begin_ps || e.relative_ps >= range_end_ps) continue;
            ++h.bins[(e.relative_ps - range_begin_ps) / bin_width_ps];
        }
    }
    return h;
}

GateWindow auto_gate(const ArrivalHistogram& hist, std::uint64_t width_ps) {
    if (width_ps == 0 || width_ps % hist.bin_width_ps != 0) {
        throw ConfigError("gate", "gate width must be a positive multiple of the bin width");
    }
    const std::size_t w = width_ps / hist.bin_width_ps;
    const std::size_t n = hist.bins.size();
    if (w > n) throw ConfigError("gate", "gate wider than histogram range");
    if (hist.total() == 0) throw DataError("no_photons", "histogram is empty, cannot place gate");

    std::uint64_t sum = std::accumulate(hist.bins.begin(), hist.bins.begin() + static_cast<std::ptrdiff_t>(w),
                                        std::uint64_t{0});
    std::vector<std::uint64_t> sums{sum};
    sums.reserve(n - w + 1);
    for (std::size_t s = 1; s + w <= n; ++s) {
        sum += hist.bins[s + w - 1];
        sum -= hist.bins[s - 1];
        sums.push_back(sum);
    }
    const auto best_it = std::max_element(sums.begin(), sums.end());  // first maximum
    const auto best = static_cast<std::size_t>(best_it - sums.begin());

    double weighted = 0.0;
    for (std::size_t k = best; k < best + w; ++k) weighted += static_cast<double>(k) * static_cast<double>(hist.bins[k]);
    const auto centroid = static_cast<std::ptrdiff_t>(std::floor(weighted / static_cast<double>(*best_it)));
    const auto centred = static_cast<std::size_t>(
        std::clamp<std::ptrdiff_t>(centroid - static_cast<std::ptrdiff_t>((w - 1) / 2), 0,
                                   static_cast<std::ptrdiff_t>(n - w)));
    const std::size_t start = sums[centred] == *best_it ? centred : best;

    return {hist.t0_ps + start * hist.bin_width_ps, width_ps};
}

GatedWindows gated_counts(const CycleTable& cycles, const GateWindow& gate_signal, const GateWindow& gate_idler,
                          double window_duration_s, std::uint64_t pulse_period_ps, double wavelength_nm,
                          ScanPoint point) {
    if (!(window_duration_s > 0.0)) throw ConfigError("gate", "window duration must be positive");
    if (pulse_period_ps == 0) throw ConfigError("gate", "pulse period must be positive");
    gate_signal.validate(pulse_period_ps);
    gate_idler.validate(pulse_period_ps);

    GatedWindows out;
    if (cycles.empty()) return out;

    const auto window_ps = static_cast<std::uint64_t>(std::llround(window_duration_s * 1e12));
    const std::uint64_t first = cycles[0].trigger_ps;
    const std::uint64_t covered = cycles[cycles.size() - 1].trigger_ps - first + pulse_period_ps;
    const std::uint64_t complete = covered / window_ps;

    out.windows.resize(complete);
    for (auto& w : out.windows) {
        w.window_duration_s = window_duration_s;
        w.wavelength_nm = wavelength_nm;
        w.point = point;
    }
    for (std::size_t c = 0; c < cycles.size(); ++c) {
        const auto cycle = cycles[c];
        const std::uint64_t index = (cycle.trigger_ps - first) / window_ps;
        if (index >= complete) {
            ++out.dropped_cycles;
            continue;
        }
        auto& w = out.windows[index];
        for (const auto& e : cycle.events) {
            if (e.channel == Channel::signal && gate_signal.contains(e.relative_ps)) ++w.n_signal;
            if (e.channel == Channel::idler && gate_idler.contains(e.relative_ps)) ++w.n_idler;
        }
    }
    return out;
}

void write_histogram_csv(const std::string& path, const ArrivalHistogram& hist) {
    CsvWriter w(path, {"bin_start_ps", "count"});
    for (std::size_t k = 0; k < hist.bins.size(); ++k) {
        w.field(static_cast<std::int64_t>(hist.t0_ps + k * hist.bin_width_ps))
            .field(static_cast<std::int64_t>(hist.bins[k]));
        w.end_row();
    }
}

}  // namespace hyperspec
