#include "hyperspec/correlation.hpp"
#include "hyperspec/error.hpp"
#include "hyperspec/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace hyperspec;

namespace {

std::vector<WindowCounts> counts(std::vector<std::int64_t> s, std::vector<std::int64_t> i) {
    std::vector<WindowCounts> w(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        w[k].n_signal = s[k];
        w[k].n_idler = i[k];
    }
    return w;
}

std::vector<WindowCounts> simulated(double sigma, std::uint64_t seed, int n = 2000) {
    SourceConfig cfg;
    cfg.excess_noise_sigma = sigma;
    std::vector<WindowCounts> w;
    for (int k = 0; k < n; ++k) w.push_back(simulate_window(cfg, 1.0, 3000.0, derive_seed(seed, {std::uint64_t(k)})));
    return w;
}

// Rescaled noise floor relative to shot noise when pairs are shared:
// relvar = 1/m_i + 1/m_s - 2/K, so ratio^2 = 1 + eta_i/eta_s - 2 eta_i.
double rescaled_floor(double eta_s, double eta_i) { return std::sqrt(1.0 + eta_i / eta_s - 2.0 * eta_i); }

}  // namespace

TEST(Rescale, ConstantSignalLeavesIdler) {
    const auto r = rescale_idler(counts({10, 10, 10}, {5, 7, 9}));
    EXPECT_EQ(r.values, (std::vector<double>{5, 7, 9}));
    EXPECT_DOUBLE_EQ(r.mean_signal, 10.0);
}

TEST(Rescale, DirectEvaluation) {
    const auto r = rescale_idler(counts({10, 20}, {100, 200}));
    ASSERT_EQ(r.values.size(), 2u);
    EXPECT_DOUBLE_EQ(r.values[0], 150.0);
    EXPECT_DOUBLE_EQ(r.values[1], 150.0);
}

TEST(Rescale, ZeroSignalWindowsExcluded) {
    const auto r = rescale_idler(counts({0, 10, 30}, {5, 100, 300}));
    EXPECT_EQ(r.excluded, (std::vector<std::size_t>{0}));
    EXPECT_EQ(r.retained, (std::vector<std::size_t>{1, 2}));
    EXPECT_DOUBLE_EQ(r.mean_signal, 20.0);
    EXPECT_DOUBLE_EQ(r.values[0], 200.0);
    EXPECT_THROW(rescale_idler(counts({0, 0}, {1, 2})), DataError);
    EXPECT_THROW(rescale_idler(counts({1}, {1})), DataError);
}

TEST(Property, CommonGainCancelsExactly) {
    std::vector<std::int64_t> s, i;
    for (std::int64_t g = 1; g <= 40; ++g) {
        s.push_back(17 * g);
        i.push_back(53 * g);
    }
    const auto r = rescale_idler(counts(s, i));
    const auto [lo, hi] = std::minmax_element(r.values.begin(), r.values.end());
    EXPECT_LE(*hi - *lo, 1e-12 * *hi);
    EXPECT_NEAR(*lo, 53.0 * r.mean_signal / 17.0, 1e-9);
}

TEST(Property, MeanPreservedWithinSamplingError) {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto w = simulated(0.05, seed, 1000);
        const auto r = rescale_idler(w);
        double raw = 0, res = 0, vraw = 0, vres = 0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            raw += w[k].n_idler;
            res += r.values[k];
        }
        raw /= w.size();
        res /= w.size();
        for (std::size_t k = 0; k < w.size(); ++k) {
            vraw += (w[k].n_idler - raw) * (w[k].n_idler - raw);
            vres += (r.values[k] - res) * (r.values[k] - res);
        }
        const double se = std::sqrt((vraw + vres) / (w.size() - 1) / w.size());
        EXPECT_LE(std::abs(res - raw), 3.0 * se);
    }
}

TEST(Noise, ConstantIdler) {
    const auto st = noise_stats(counts({5, 6, 7}, {100, 100, 100}));
    EXPECT_DOUBLE_EQ(st.std_raw, 0.0);
    EXPECT_DOUBLE_EQ(st.shot_noise_level, 10.0);
    EXPECT_DOUBLE_EQ(st.shot_noise_level * st.shot_noise_level, st.mean_idler);
}

TEST(Noise, PoissonRegime) {
    const auto st = noise_stats(simulated(0.0, 10));
    const double raw = st.std_raw / st.shot_noise_level;
    EXPECT_GE(raw, 0.9);
    EXPECT_LE(raw, 1.1);
    // no excess noise to remove: rescaling may only add signal shot noise
    EXPECT_GE(st.std_rescaled / st.shot_noise_level, raw - 0.05);
}

TEST(Noise, ExcessNoiseSuppression) {
    const auto w = simulated(0.05, 11);
    const auto st = noise_stats(w);
    const double raw = st.std_raw / st.shot_noise_level;
    const double res = st.std_rescaled / st.shot_noise_level;
    EXPECT_GT(raw, 3.0);
    EXPECT_LT(res, raw);
    EXPECT_NEAR(res, rescaled_floor(0.03, 0.13), 0.1 * rescaled_floor(0.03, 0.13));

    std::vector<double> raw_values;
    for (const auto& x : w) raw_values.push_back(static_cast<double>(x.n_idler));
    EXPECT_LT(fwhm(rescale_idler(w).values), fwhm(raw_values));
}

TEST(Fit, ExactLine) {
    const auto f = correlation_fit(counts({1, 2, 3}, {2, 4, 6}));
    EXPECT_NEAR(f.slope, 2.0, 1e-12);
    EXPECT_NEAR(f.intercept, 0.0, 1e-12);
    EXPECT_NEAR(f.pearson_r, 1.0, 1e-12);
}

TEST(Fit, DegenerateAndShort) {
    EXPECT_THROW(correlation_fit(counts({1, 1, 1}, {2, 4, 6})), DataError);
    EXPECT_THROW(correlation_fit(counts({1, 2}, {2, 4})), DataError);
}

TEST(Fit, IndependentChannels) { EXPECT_LT(std::abs(correlation_fit(simulated(0.0, 12)).pearson_r), 0.1); }

TEST(Fit, CommonGain) { EXPECT_GT(correlation_fit(simulated(0.1, 13)).pearson_r, 0.8); }

TEST(Fwhm, Gaussian) {
    Engine eng(14);
    std::normal_distribution<double> n(0.0, 10.0);
    std::vector<double> x(100'000);
    for (auto& v : x) v = n(eng);
    const double expected = 2.0 * std::sqrt(2.0 * std::log(2.0)) * 10.0;
    EXPECT_NEAR(fwhm(x), expected, 0.05 * expected);
}

TEST(Fwhm, DegenerateInputs) {
    EXPECT_DOUBLE_EQ(fwhm(std::vector<double>(20, 3.0)), 0.0);
    EXPECT_THROW(fwhm(std::vector<double>(5, 1.0)), DataError);
}
