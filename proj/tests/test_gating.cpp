#include "hyperspec/error.hpp"
#include "hyperspec/gating.hpp"
#include "hyperspec/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace hyperspec;

namespace {

constexpr std::uint64_t kPeriod = 25'000'000;

CycleTable one_cycle(Channel ch, std::initializer_list<std::uint64_t> rel) {
    std::vector<TimeTagRecord> r{{Channel::trigger, 0}};
    for (auto t : rel) r.push_back({ch, t});
    std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.timestamp_ps < b.timestamp_ps; });
    return split_by_trigger(r);
}

ArrivalHistogram hist_from(std::vector<std::uint64_t> bins) {
    ArrivalHistogram h;
    h.bin_width_ps = 1000;
    h.bins = std::move(bins);
    return h;
}

}  // namespace

TEST(Histogram, DirectBinning) {
    const auto t = one_cycle(Channel::signal, {100, 150, 2100});
    const auto h = build_histogram(t, Channel::signal, 1000, 0, 3000);
    EXPECT_EQ(h.bins, (std::vector<std::uint64_t>{2, 0, 1}));
    EXPECT_EQ(h.total(), 3u);
    EXPECT_EQ(build_histogram(t, Channel::idler, 1000, 0, 3000).bins, (std::vector<std::uint64_t>{0, 0, 0}));
}

TEST(Histogram, RangeMustBeWholeBins) {
    const auto t = one_cycle(Channel::signal, {100});
    EXPECT_THROW(build_histogram(t, Channel::signal, 1000, 0, 2500), ConfigError);
    EXPECT_THROW(build_histogram(t, Channel::signal, 0, 0, 2000), ConfigError);
}

TEST(Histogram, PeakAtSimulatedArrival) {
    SourceConfig cfg;
    const auto s = simulate_events(cfg, 1.0, 3000.0, 0.5, 41);
    const auto t = split_by_trigger(s.records);
    for (auto ch : {Channel::signal, Channel::idler}) {
        const auto h = build_histogram(t, ch, 1000, 0, kPeriod);
        const auto peak = std::max_element(h.bins.begin(), h.bins.end()) - h.bins.begin();
        EXPECT_NEAR(static_cast<double>(peak), 50.0, 2.0);
    }
}

TEST(AutoGate, SpikeIsCentred) {
    std::vector<std::uint64_t> bins(100, 0);
    bins[40] = 7;
    const auto g = auto_gate(hist_from(bins), 10'000);
    EXPECT_EQ(g.start_ps, 36'000u);
    EXPECT_EQ(g.width_ps, 10'000u);
}

TEST(AutoGate, UniformTakesEarliest) {
    const auto g = auto_gate(hist_from(std::vector<std::uint64_t>(100, 3)), 10'000);
    EXPECT_EQ(g.start_ps, 0u);
}

TEST(AutoGate, Errors) {
    EXPECT_THROW(auto_gate(hist_from(std::vector<std::uint64_t>(100, 0)), 10'000), DataError);
    EXPECT_THROW(auto_gate(hist_from(std::vector<std::uint64_t>(100, 1)), 10'500), ConfigError);
}

TEST(AutoGate, EnclosesSimulatedPulse) {
    SourceConfig cfg;
    cfg.dark_rate_idler_hz = 2000.0;
    const auto s = simulate_events(cfg, 1.0, 3000.0, 0.5, 42);
    const auto t = split_by_trigger(s.records);
    const auto h = build_histogram(t, Channel::idler, 1000, 0, kPeriod);
    const auto g = auto_gate(h, 150'000);
    // correlated arrivals: everything within 10 jitter widths of the offset
    std::uint64_t inside = 0, correlated = 0;
    for (std::size_t c = 0; c < t.size(); ++c) {
        for (const auto& e : t[c].events) {
            if (e.channel != Channel::idler || e.relative_ps < 20'000 || e.relative_ps > 80'000) continue;
            ++correlated;
            inside += g.contains(e.relative_ps);
        }
    }
    ASSERT_GT(correlated, 1000u);
    EXPECT_GE(static_cast<double>(inside), 0.99 * correlated);
}

TEST(Gate, ContainsAndValidate) {
    const GateWindow g{0, 150'000};
    EXPECT_TRUE(g.contains(10'000));
    EXPECT_FALSE(g.contains(200'000));
    EXPECT_FALSE(g.contains(150'000));
    EXPECT_NO_THROW(g.validate(kPeriod));
    EXPECT_THROW((GateWindow{kPeriod - 100, 150'000}.validate(kPeriod)), ConfigError);
    EXPECT_THROW((GateWindow{0, 0}.validate(kPeriod)), ConfigError);
}

TEST(Counts, DirectGating) {
    const auto t = one_cycle(Channel::signal, {10'000, 200'000});
    const GateWindow g{0, 150'000};
    const auto w = gated_counts(t, g, g, 1.0 / 40'000, kPeriod);
    ASSERT_EQ(w.windows.size(), 1u);
    EXPECT_EQ(w.windows[0].n_signal, 1);
    EXPECT_EQ(w.windows[0].n_idler, 0);
}

TEST(Counts, PartialWindowDropped) {
    std::vector<TimeTagRecord> r;
    for (std::uint64_t c = 0; c < 180'000; ++c) r.push_back({Channel::trigger, c * kPeriod});
    const auto t = split_by_trigger(r);
    const GateWindow g{0, 150'000};
    const auto w = gated_counts(t, g, g, 2.0, kPeriod);
    EXPECT_EQ(w.windows.size(), 2u);
    EXPECT_EQ(w.dropped_cycles, 20'000u);
}

TEST(Counts, DarkThinningExpectation) {
    SourceConfig cfg;
    cfg.mean_pairs_per_pulse = 0.0;
    cfg.dark_rate_idler_hz = 1000.0;
    const int n = 20;
    const auto s = simulate_events(cfg, 1.0, 3000.0, 2.0 * n, 43);
    const auto t = split_by_trigger(s.records);
    const GateWindow g{40'000, 150'000};
    const auto w = gated_counts(t, g, g, 2.0, kPeriod);
    ASSERT_EQ(w.windows.size(), static_cast<std::size_t>(n));
    double mean = 0;
    for (const auto& x : w.windows) mean += x.n_idler;
    mean /= n;
    const double expected = 1000.0 * 2.0 * 150.0 / 25'000.0;
    EXPECT_NEAR(mean, expected, 3.0 * std::sqrt(expected / n));
}

TEST(Property, GatedNeverExceedsTotalAndShrinkingNeverAdds) {
    SourceConfig cfg;
    cfg.dark_rate_signal_hz = 20'000.0;
    cfg.dark_rate_idler_hz = 20'000.0;
    const auto s = simulate_events(cfg, 1.0, 3000.0, 0.2, 44);
    const auto t = split_by_trigger(s.records);
    const GateWindow all{0, kPeriod};
    const auto total = gated_counts(t, all, all, 0.05, kPeriod);
    Engine eng(45);
    for (int trial = 0; trial < 30; ++trial) {
        const std::uint64_t start = eng() % 200'000;
        const std::uint64_t width = 1 + eng() % 300'000;
        const std::uint64_t shrink = eng() % width;
        const GateWindow wide{start, width};
        const GateWindow narrow{start + shrink / 2, width - shrink};
        const auto a = gated_counts(t, wide, wide, 0.05, kPeriod);
        const auto b = gated_counts(t, narrow, narrow, 0.05, kPeriod);
        ASSERT_EQ(a.windows.size(), total.windows.size());
        for (std::size_t k = 0; k < a.windows.size(); ++k) {
            EXPECT_LE(a.windows[k].n_signal, total.windows[k].n_signal);
            EXPECT_LE(a.windows[k].n_idler, total.windows[k].n_idler);
            EXPECT_LE(b.windows[k].n_signal, a.windows[k].n_signal);
            EXPECT_LE(b.windows[k].n_idler, a.windows[k].n_idler);
        }
    }
}

TEST(Histogram, CsvHasOneRowPerBin) {
    const auto path = (std::filesystem::path(::testing::TempDir()) / "hist.csv").string();
    write_histogram_csv(path, hist_from({1, 2, 3}));
    std::ifstream in(path);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    EXPECT_EQ(lines, 4);
}

TEST(Counts, StreamAgreesWithWindowModel) {
    SourceConfig cfg;
    cfg.window_s = 0.05;
    const int n = 100;
    const auto s = simulate_events(cfg, 0.8, 3000.0, cfg.window_s * n, 46);
    const auto t = split_by_trigger(s.records);
    const GateWindow g{0, 150'000};
    const auto streamed = gated_counts(t, g, g, cfg.window_s, kPeriod);
    ASSERT_EQ(streamed.windows.size(), static_cast<std::size_t>(n));

    auto stats = [](const std::vector<double>& x) {
        double m = 0, v = 0;
        for (double e : x) m += e;
        m /= x.size();
        for (double e : x) v += (e - m) * (e - m);
        return std::pair{m, v / (x.size() - 1)};
    };
    for (bool idler : {false, true}) {
        std::vector<double> a, b;
        for (int k = 0; k < n; ++k) {
            const auto& w = streamed.windows[k];
            a.push_back(static_cast<double>(idler ? w.n_idler : w.n_signal));
            const auto d = simulate_window(cfg, 0.8, 3000.0, derive_seed(47, {std::uint64_t(k)}));
            b.push_back(static_cast<double>(idler ? d.n_idler : d.n_signal));
        }
        const auto [ma, va] = stats(a);
        const auto [mb, vb] = stats(b);
        EXPECT_NEAR(ma, mb, 3.0 * std::sqrt(va / n + vb / n));
    }
}
