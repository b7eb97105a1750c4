#include "hyperspec/source.hpp"

#include "hyperspec/csv.hpp"
#include "hyperspec/error.hpp"
#include "hyperspec/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <thread>

namespace hyperspec {

ConversionProfile::ConversionProfile(std::vector<std::pair<double, double>> points) : points_(std::move(points)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!(points_[i].second > 0.0)) {
            throw ConfigError("conversion_profile", "conversion profile values must be strictly positive");
        }
        if (i > 0 && !(points_[i].first > points_[i - 1].first)) {
            throw ConfigError("conversion_profile", "conversion profile wavelengths must be strictly increasing");
        }
    }
}

double ConversionProfile::factor(double wavelength_nm) const {
    if (points_.empty()) return 1.0;
    if (wavelength_nm < points_.front().first || wavelength_nm > points_.back().first) {
        throw DataError("domain", "wavelength " + std::to_string(wavelength_nm) + " nm outside conversion profile");
    }
    if (points_.size() == 1) return points_.front().second;
    auto hi = std::upper_bound(points_.begin(), points_.end(), wavelength_nm,
                               [](double w, const auto& p) { return w < p.first; });
    if (hi == points_.end()) return points_.back().second;
    auto lo = std::prev(hi);
    const double f = (wavelength_nm - lo->first) / (hi->first - lo->first);
    return lo->second + f * (hi->second - lo->second);
}

std::uint64_t SourceConfig::pulse_period_ps() const {
    return static_cast<std::uint64_t>(std::llround(1e12 / rep_rate_hz));
}

void SourceConfig::validate() const {
    auto require = [](bool ok, const char* field, const char* what) {
        if (!ok) throw ConfigError("source", std::string(field) + " " + what);
    };
    require(rep_rate_hz > 0.0, "rep_rate_hz", "must be positive");
    require(pulse_duration_ns > 0.0, "pulse_duration_ns", "must be positive");
    require(mean_pairs_per_pulse >= 0.0, "mean_pairs_per_pulse", "must be non-negative");
    require(signal_chain_efficiency > 0.0 && signal_chain_efficiency <= 1.0, "signal_chain_efficiency",
            "must lie in (0, 1]");
    require(idler_chain_efficiency > 0.0 && idler_chain_efficiency <= 1.0, "idler_chain_efficiency",
            "must lie in (0, 1]");
    require(dark_rate_signal_hz >= 0.0, "dark_rate_signal_hz", "must be non-negative");
    require(dark_rate_idler_hz >= 0.0, "dark_rate_idler_hz", "must be non-negative");
    require(excess_noise_sigma >= 0.0, "excess_noise_sigma", "must be non-negative");
    require(jitter_sigma_ns >= 0.0, "jitter_sigma_ns", "must be non-negative");
    require(window_s > 0.0, "window_s", "must be positive");
    require(arrival_offset_ns >= 0.0 && arrival_offset_ns * 1e3 < static_cast<double>(pulse_period_ps()),
            "arrival_offset_ns", "must lie inside the pulse period");
}

namespace {

std::int64_t poisson(Engine& eng, double mean) {
    if (!(mean > 0.0)) return 0;
    return std::poisson_distribution<std::int64_t>(mean)(eng);
}

std::int64_t binomial(Engine& eng, std::int64_t n, double p) {
    if (n <= 0 || !(p > 0.0)) return 0;
    if (p >= 1.0) return n;
    return std::binomial_distribution<std::int64_t>(n, p)(eng);
}

double draw_gain(Engine& eng, double sigma) {
    const double g = std::normal_distribution<double>(1.0, sigma)(eng);
    return std::max(0.0, g);
}

void check_transmission(double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DataError("domain", "transmission " + std::to_string(t) + " outside [0, 1]");
    }
}

}  // namespace

WindowCounts simulate_window(const SourceConfig& cfg, double transmission, double wavelength_nm, std::uint64_t seed,
                             double pair_scale) {
    check_transmission(transmission);
    const double profile = cfg.conversion_profile.factor(wavelength_nm);
    Engine eng(seed);
    const double g = draw_gain(eng, cfg.excess_noise_sigma);
    const double mean_pairs =
        g * cfg.mean_pairs_per_pulse * std::max(0.0, pair_scale) * cfg.rep_rate_hz * cfg.window_s * profile;
    const std::int64_t pairs = poisson(eng, mean_pairs);

    WindowCounts w;
    w.window_duration_s = cfg.window_s;
    w.wavelength_nm = wavelength_nm;
    w.n_signal = binomial(eng, pairs, cfg.signal_chain_efficiency) + poisson(eng, cfg.dark_rate_signal_hz * cfg.window_s);
    w.n_idler = binomial(eng, pairs, transmission * cfg.idler_chain_efficiency) +
                poisson(eng, cfg.dark_rate_idler_hz * cfg.window_s);
    return w;
}

DecodedStream simulate_events(const SourceConfig& cfg, double transmission, double wavelength_nm, double duration_s,
                              std::uint64_t seed) {
    cfg.validate();
    check_transmission(transmission);
    if (!(duration_s > 0.0)) throw ConfigError("stream", "duration_s must be positive");
    const double profile = cfg.conversion_profile.factor(wavelength_nm);

    const std::uint64_t period = cfg.pulse_period_ps();
    const auto n_cycles = static_cast<std::uint64_t>(std::llround(duration_s * cfg.rep_rate_hz));
    const auto cycles_per_window =
        std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(cfg.window_s * cfg.rep_rate_hz)));
    const double offset_ps = cfg.arrival_offset_ns * 1e3;
    const double jitter_ps = cfg.jitter_sigma_ns * 1e3;

    DecodedStream out;
    out.header.pulse_period_ps = period;
    auto& records = out.records;

    for (std::uint64_t c0 = 0, w = 0; c0 < n_cycles; c0 += cycles_per_window, ++w) {
        const std::uint64_t c1 = std::min(n_cycles, c0 + cycles_per_window);
        const std::uint64_t n = c1 - c0;
        const std::size_t first = records.size();
        Engine eng(derive_seed(seed, {w}));

        for (std::uint64_t c = c0; c < c1; ++c) records.push_back({Channel::trigger, c * period});

        const double g = draw_gain(eng, cfg.excess_noise_sigma);
        const std::int64_t pairs = poisson(eng, g * cfg.mean_pairs_per_pulse * profile * static_cast<double>(n));
        std::uniform_int_distribution<std::uint64_t> pick_cycle(c0, c1 - 1);
        std::bernoulli_distribution signal_click(cfg.signal_chain_efficiency);
        std::bernoulli_distribution idler_click(transmission * cfg.idler_chain_efficiency);
        std::normal_distribution<double> arrival(offset_ps, jitter_ps);
        auto arrival_ps = [&] {
            const double t = jitter_ps > 0.0 ? arrival(eng) : offset_ps;
            return static_cast<std::uint64_t>(std::clamp(std::llround(t), 0LL, static_cast<long long>(period) - 1));
        };
        for (std::int64_t k = 0; k < pairs; ++k) {
            const std::uint64_t trigger = pick_cycle(eng) * period;
            if (signal_click(eng)) records.push_back({Channel::signal, trigger + arrival_ps()});
            if (idler_click(eng)) records.push_back({Channel::idler, trigger + arrival_ps()});
        }

        const double span_s = static_cast<double>(n * period) * 1e-12;
        std::uniform_int_distribution<std::uint64_t> uniform_time(c0 * period, c1 * period - 1);
        for (auto [channel, rate] : {std::pair{Channel::signal, cfg.dark_rate_signal_hz},
                                     std::pair{Channel::idler, cfg.dark_rate_idler_hz}}) {
            const std::int64_t darks = poisson(eng, rate * span_s);
            for (std::int64_t k = 0; k < darks; ++k) records.push_back({channel, uniform_time(eng)});
        }

        // triggers sort ahead of detections sharing their timestamp
        std::sort(records.begin() + static_cast<std::ptrdiff_t>(first), records.end(), [](const auto& a, const auto& b) {
            return a.timestamp_ps != b.timestamp_ps ? a.timestamp_ps < b.timestamp_ps : a.channel < b.channel;
        });
    }
    out.header.record_count = records.size();
    return out;
}

std::vector<std::byte> simulate_stream(const SourceConfig& cfg, double transmission, double wavelength_nm,
                                       double duration_s, std::uint64_t seed) {
    const auto s = simulate_events(cfg, transmission, wavelength_nm, duration_s, seed);
    return encode_stream(s.header, s.records);
}

Phantom::Key Phantom::key(int ix, int iy, double wavelength_nm) {
    return {ix, iy, std::llround(wavelength_nm * 1e6)};
}

void Phantom::set(int ix, int iy, double wavelength_nm, double transmission) {
    check_transmission(transmission);
    values_[key(ix, iy, wavelength_nm)] = transmission;
}

double Phantom::at(int ix, int iy, double wavelength_nm) const {
    auto it = values_.find(key(ix, iy, wavelength_nm));
    if (it == values_.end()) {
        throw DataError("missing_point", "phantom has no value at ix=" + std::to_string(ix) + " iy=" +
                                             std::to_string(iy) + " wavelength_nm=" + format_number(wavelength_nm));
    }
    return it->second;
}

Phantom Phantom::uniform(const ScanPlan& plan, double transmission) {
    Phantom p;
    for (double w : plan.wavelengths_nm()) {
        for (int iy = 0; iy < plan.ny(); ++iy) {
            for (int ix = 0; ix < plan.nx(); ++ix) p.set(ix, iy, w, transmission);
        }
    }
    return p;
}

Phantom Phantom::from_csv(const std::string& path) {
    const auto t = read_csv(path);
    const auto cx = t.column("ix"), cy = t.column("iy"), cw = t.column("wavelength_nm"), ct = t.column("transmission");
    Phantom p;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        p.set(static_cast<int>(t.integer(r, cx)), static_cast<int>(t.integer(r, cy)), t.number(r, cw), t.number(r, ct));
    }
    return p;
}

void Phantom::write_csv(const std::string& path) const {
    CsvWriter w(path, {"ix", "iy", "wavelength_nm", "transmission"});
    for (const auto& [k, v] : values_) {
        w.field(std::get<0>(k)).field(std::get<1>(k)).field(static_cast<double>(std::get<2>(k)) * 1e-6).field(v);
        w.end_row();
    }
}

RawDataset simulate_scan(const SourceConfig& cfg, const Phantom& phantom, const ScanPlan& plan,
                         double drift_slope_per_s, std::uint64_t seed, unsigned threads) {
    cfg.validate();
    const auto steps = plan.timeline();

    std::vector<double> transmission(steps.size(), 1.0);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& s = steps[i];
        if (s.point.site == Site::pixel) {
            transmission[i] = phantom.at(s.point.ix, s.point.iy, plan.wavelengths_nm()[s.plane]);
        }
    }

    // the window length of the scan is the plan's dwell, not the source default
    SourceConfig scan_cfg = cfg;
    scan_cfg.window_s = plan.dwell_s();

    RawDataset raw;
    raw.plan = plan;
    raw.windows.resize(steps.size());
    auto run = [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto& s = steps[i];
            const double wl = plan.wavelengths_nm()[s.plane];
            const std::uint64_t sub = derive_seed(
                seed, {s.plane, static_cast<std::uint64_t>(s.point.site), static_cast<std::uint64_t>(s.point.ix),
                       static_cast<std::uint64_t>(s.point.iy), s.batch_index});
            RawWindow& rw = raw.windows[i];
            rw.counts = simulate_window(scan_cfg, transmission[i], wl, sub, 1.0 + drift_slope_per_s * s.t_mid_s);
            rw.counts.point = s.point;
            rw.plane = s.plane;
            rw.batch_index = s.batch_index;
            rw.t_mid_s = s.t_mid_s;
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(steps.size())));
    if (n_threads == 1) {
        run(0, steps.size());
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (steps.size() + n_threads - 1) / n_threads;
        for (unsigned t = 0; t < n_threads; ++t) {
            const std::size_t b = t * chunk, e = std::min(steps.size(), b + chunk);
            if (b < e) pool.emplace_back(run, b, e);
        }
    }
    return raw;
}

namespace {

const char* site_name(Site s) {
    switch (s) {
        case Site::pixel: return "pixel";
        case Site::reference_pre: return "pre";
        case Site::reference_post: return "post";
    }
    return "pixel";
}

Site parse_site(const std::string& s, std::size_t row) {
    if (s == "pixel") return Site::pixel;
    if (s == "pre") return Site::reference_pre;
    if (s == "post") return Site::reference_post;
    throw DataError("bad_site", "row " + std::to_string(row + 1) + ": unknown site '" + s + "'", row);
}

}  // namespace

void write_raw_csv(const std::string& path, const RawDataset& raw) {
    CsvWriter w(path, {"plane", "site", "ix", "iy", "batch_index", "t_mid_s", "wavelength_nm", "window_s", "n_signal",
                       "n_idler"});
    for (const auto& rw : raw.windows) {
        w.field(rw.plane)
            .field(std::string_view(site_name(rw.counts.point.site)))
            .field(rw.counts.point.ix)
            .field(rw.counts.point.iy)
            .field(rw.batch_index)
            .field(rw.t_mid_s)
            .field(rw.counts.wavelength_nm)
            .field(rw.counts.window_duration_s)
            .field(rw.counts.n_signal)
            .field(rw.counts.n_idler);
        w.end_row();
    }
}

std::vector<RawWindow> read_raw_csv(const std::string& path) {
    const auto t = read_csv(path);
    const auto c_plane = t.column("plane"), c_site = t.column("site"), c_ix = t.column("ix"), c_iy = t.column("iy"),
               c_batch = t.column("batch_index"), c_t = t.column("t_mid_s"), c_wl = t.column("wavelength_nm"),
               c_win = t.column("window_s"), c_s = t.column("n_signal"), c_i = t.column("n_idler");
    std::vector<RawWindow> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        RawWindow rw;
        rw.plane = static_cast<std::size_t>(t.integer(r, c_plane));
        rw.counts.point = {parse_site(t.rows[r][c_site], r), static_cast<int>(t.integer(r, c_ix)),
                           static_cast<int>(t.integer(r, c_iy))};
        rw.batch_index = static_cast<std::size_t>(t.integer(r, c_batch));
        rw.t_mid_s = t.number(r, c_t);
        rw.counts.wavelength_nm = t.number(r, c_wl);
        rw.counts.window_duration_s = t.number(r, c_win);
        rw.counts.n_signal = t.integer(r, c_s);
        rw.counts.n_idler = t.integer(r, c_i);
        if (rw.counts.n_signal < 0 || rw.counts.n_idler < 0) {
            throw DataError("bad_count", "row " + std::to_string(r + 1) + ": negative count", r);
        }
        out.push_back(rw);
    }
    return out;
}

}  // namespace hyperspec
