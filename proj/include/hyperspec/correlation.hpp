#pragma once

#include "hyperspec/source.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hyperspec {

struct RescaleResult {
    std::vector<double> values;          // one per retained window
    std::vector<std::size_t> retained;   // indices into the input
    std::vector<std::size_t> excluded;   // windows with n_signal == 0
    double mean_signal = 0.0;            // over retained windows
};

/// Correlation-based rescaling of the idler counts:
///   N_corr = N_idler * <N_signal> / N_signal
/// with <N_signal> taken over the retained windows of this batch. Windows with
/// no signal counts are excluded and reported. Throws DataError
/// "insufficient_data" for fewer than two windows and "empty_input" when
/// every window is excluded.
RescaleResult rescale_idler(std::span<const WindowCounts> windows);

struct NoiseStats {
    double wavelength_nm = 0.0;
    double mean_idler = 0.0;
    double std_raw = 0.0;
    double std_rescaled = 0.0;
    double shot_noise_level = 0.0;  // sqrt(mean_idler)
};

/// Sample (n-1) standard deviations of raw and rescaled idler counts.
NoiseStats noise_stats(std::span<const WindowCounts> windows);

struct CorrelationFit {
    double slope = 0.0;
    double intercept = 0.0;
    double pearson_r = 0.0;
};

/// Ordinary least squares of n_idler on n_signal. Needs at least three
/// windows; throws DataError "degenerate_fit" when n_signal is constant.
CorrelationFit correlation_fit(std::span<const WindowCounts> windows);

/// Full width at half maximum of the empirical distribution of `values`:
/// Sturges-rule histogram, half-maximum crossings located by linear
/// interpolation between bin centres. Identical values give 0.
double fwhm(std::span<const double> values);

void write_noise_stats_csv(const std::string& path, std::span<const NoiseStats> rows);

}  // namespace hyperspec
