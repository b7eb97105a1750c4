#include "hyperspec/correlation.hpp"

#include "hyperspec/csv.hpp"
#include "hyperspec/error.hpp"
#include "hyperspec/stats.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace hyperspec {

namespace {

Eigen::ArrayXd idler_counts(std::span<const WindowCounts> windows) {
    Eigen::ArrayXd out(static_cast<Eigen::Index>(windows.size()));
    for (std::size_t i = 0; i < windows.size(); ++i) out[static_cast<Eigen::Index>(i)] = static_cast<double>(windows[i].n_idler);
    return out;
}

Eigen::ArrayXd signal_counts(std::span<const WindowCounts> windows) {
    Eigen::ArrayXd out(static_cast<Eigen::Index>(windows.size()));
    for (std::size_t i = 0; i < windows.size(); ++i) out[static_cast<Eigen::Index>(i)] = static_cast<double>(windows[i].n_signal);
    return out;
}

}  // namespace

RescaleResult rescale_idler(std::span<const WindowCounts> windows) {
    if (windows.size() < 2) throw DataError("insufficient_data", "rescaling needs at least two windows");
    RescaleResult r;
    double signal_sum = 0.0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (windows[i].n_signal > 0) {
            r.retained.push_back(i);
            signal_sum += static_cast<double>(windows[i].n_signal);
        } else {
            r.excluded.push_back(i);
        }
    }
    if (r.retained.empty()) throw DataError("empty_input", "every window has zero signal counts");
    r.mean_signal = signal_sum / static_cast<double>(r.retained.size());
    r.values.reserve(r.retained.size());
    for (auto i : r.retained) {
        r.values.push_back(static_cast<double>(windows[i].n_idler) * r.mean_signal /
                           static_cast<double>(windows[i].n_signal));
    }
    return r;
}

NoiseStats noise_stats(std::span<const WindowCounts> windows) {
    if (windows.size() < 2) throw DataError("insufficient_data", "noise statistics need at least two windows");
    const Eigen::ArrayXd raw = idler_counts(windows);
    const auto rescaled = rescale_idler(windows);
    const Eigen::Map<const Eigen::ArrayXd> corr(rescaled.values.data(), static_cast<Eigen::Index>(rescaled.values.size()));

    NoiseStats s;
    s.wavelength_nm = windows.front().wavelength_nm;
    s.mean_idler = stats::mean(raw);
    s.std_raw = stats::sample_stddev(raw);
    s.std_rescaled = stats::sample_stddev(corr);
    s.shot_noise_level = std::sqrt(s.mean_idler);
    return s;
}

CorrelationFit correlation_fit(std::span<const WindowCounts> windows) {
    if (windows.size() < 3) throw DataError("insufficient_data", "correlation fit needs at least three windows");
    const Eigen::ArrayXd x = signal_counts(windows);
    const Eigen::ArrayXd y = idler_counts(windows);
    const double vx = stats::sample_variance(x);
    if (!(vx > 0.0)) throw DataError("degenerate_fit", "signal counts have zero variance");
    const double vy = stats::sample_variance(y);
    const double cxy = stats::sample_covariance(x, y);

    CorrelationFit f;
    f.slope = cxy / vx;
    f.intercept = y.mean() - f.slope * x.mean();
    f.pearson_r = vy > 0.0 ? std::clamp(cxy / std::sqrt(vx * vy), -1.0, 1.0) : 0.0;
    return f;
}

double fwhm(std::span<const double> values) {
    if (values.size() < 10) throw DataError("insufficient_data", "FWHM needs at least ten values");
    const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *min_it, hi = *max_it;
    if (!(hi > lo)) return 0.0;

    const auto k = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(values.size())))) + 1;
    const double bw = (hi - lo) / static_cast<double>(k);
    std::vector<double> counts(k, 0.0);
    for (double v : values) {
        const auto idx = std::min(k - 1, static_cast<std::size_t>((v - lo) / bw));
        counts[idx] += 1.0;
    }
    const auto mode = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    const double half = counts[mode] / 2.0;
    auto centre = [&](std::size_t j) { return lo + (static_cast<double>(j) + 0.5) * bw; };

    double left = lo;
    for (std::size_t j = mode; j-- > 0;) {
        if (counts[j] < half) {
            left = centre(j) + (half - counts[j]) / (counts[j + 1] - counts[j]) * bw;
            break;
        }
    }
    double right = hi;
    for (std::size_t j = mode + 1; j < k; ++j) {
        if (counts[j] < half) {
            right = centre(j - 1) + (counts[j - 1] - half) / (counts[j - 1] - counts[j]) * bw;
            break;
        }
    }
    return right - left;
}

void write_noise_stats_csv(const std::string& path, std::span<const NoiseStats> rows) {
    CsvWriter w(path, {"wavelength_nm", "mean_idler", "std_raw", "std_rescaled", "shot_noise"});
    for (const auto& s : rows) {
        w.field(s.wavelength_nm).field(s.mean_idler).field(s.std_raw).field(s.std_rescaled).field(s.shot_noise_level);
        w.end_row();
    }
}

}  // namespace hyperspec
