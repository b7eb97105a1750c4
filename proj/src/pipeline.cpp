#include "hyperspec/pipeline.hpp"

#include "hyperspec/csv.hpp"
#include "hyperspec/gating.hpp"
#include "hyperspec/rng.hpp"
#include "hyperspec/stats.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

namespace hyperspec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace synthetic {

namespace {

struct Band {
    double centre_nm, sigma_nm, depth;
};

double band_sum(double wl, double baseline, std::initializer_list<Band> bands) {
    double d = baseline;
    for (const auto& b : bands) {
        const double z = (wl - b.centre_nm) / b.sigma_nm;
        d += b.depth * std::exp(-0.5 * z * z);
    }
    return d;
}

}  // namespace

double polystyrene_like_depth(double wl) {
    return band_sum(wl, 0.03,
                    {{3030.0, 40.0, 0.25},
                     {3245.0, 8.0, 1.2},
                     {3268.0, 8.0, 1.0},
                     {3305.0, 10.0, 1.4},
                     {3420.0, 14.0, 1.6},
                     {3509.0, 12.0, 1.2}});
}

double hydrated_like_depth(double wl) {
    return band_sum(wl, 0.05, {{2990.0, 110.0, 0.9}, {3420.0, 15.0, 0.7}, {3505.0, 12.0, 0.4}});
}

TransmissionSpectrum ftir_spectrum(double (*depth)(double), double lo_nm, double hi_nm, double step_nm) {
    TransmissionSpectrum s;
    s.source = SpectrumSource::ftir;
    const auto n = static_cast<std::size_t>(std::floor((hi_nm - lo_nm) / step_nm + 1e-9)) + 1;
    for (std::size_t k = 0; k < n; ++k) {
        const double wl = lo_nm + static_cast<double>(k) * step_nm;
        s.points.push_back({wl, std::exp(-depth(wl)), 0.0});
    }
    return s;
}

TransmissionSpectrum CountsSpectrum::transmission() const {
    TransmissionSpectrum s;
    for (std::size_t k = 0; k < wavelength_nm.size(); ++k) {
        const auto t = hyperspec::transmission(counts_sample[k], counts_ref[k]);
        if (!t) continue;
        const double unc = *t * std::sqrt(1.0 / std::max(counts_sample[k], 1.0) + 1.0 / counts_ref[k]);
        s.points.push_back({wavelength_nm[k], *t, unc});
    }
    return s;
}

void CountsSpectrum::write_csv(const std::string& path) const {
    CsvWriter w(path, {"wavelength_nm", "counts_sample", "counts_ref"});
    for (std::size_t k = 0; k < wavelength_nm.size(); ++k) {
        w.field(wavelength_nm[k]).field(counts_sample[k]).field(counts_ref[k]);
        w.end_row();
    }
}

CountsSpectrum calibration_scan(const CalibrationModel& truth, const AbsorptionCurve& curve, double counts,
                                std::uint64_t seed, double start_nm, double step_nm, std::size_t points) {
    CountsSpectrum s;
    Engine eng(seed);
    for (std::size_t k = 0; k < points; ++k) {
        const double wl = start_nm + static_cast<double>(k) * step_nm;
        const double t = model_transmission(wl, truth, curve);
        s.wavelength_nm.push_back(wl);
        if (counts <= 0.0) {
            s.counts_sample.push_back(t);
            s.counts_ref.push_back(1.0);
        } else {
            s.counts_sample.push_back(static_cast<double>(std::poisson_distribution<std::int64_t>(counts * t)(eng)));
            s.counts_ref.push_back(static_cast<double>(std::poisson_distribution<std::int64_t>(counts)(eng)));
        }
    }
    return s;
}

}  // namespace synthetic

NoiseExperiment run_noise_experiment(const SourceConfig& cfg, std::size_t count, double wavelength_nm,
                                     std::uint64_t seed) {
    cfg.validate();
    NoiseExperiment e;
    e.windows.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        e.windows.push_back(simulate_window(cfg, 1.0, wavelength_nm, derive_seed(seed, {i})));
    }
    e.stats = noise_stats(e.windows);
    e.fit = correlation_fit(e.windows);
    std::vector<double> raw;
    raw.reserve(count);
    for (const auto& w : e.windows) raw.push_back(static_cast<double>(w.n_idler));
    e.fwhm_raw = fwhm(raw);
    e.fwhm_rescaled = fwhm(rescale_idler(e.windows).values);
    return e;
}

GatingExperiment run_dark_gating_experiment(std::uint64_t cycles, double dark_rate_hz, double gate_width_ns,
                                            std::uint64_t seed) {
    SourceConfig cfg;
    cfg.mean_pairs_per_pulse = 0.0;
    cfg.dark_rate_idler_hz = dark_rate_hz;
    cfg.excess_noise_sigma = 0.0;
    const double duration_s = static_cast<double>(cycles) / cfg.rep_rate_hz;
    cfg.window_s = duration_s;

    const auto bytes = simulate_stream(cfg, 1.0, 3000.0, duration_s, seed);
    const auto stream = decode_stream(bytes);
    const auto table = split_by_trigger(stream.records);

    GatingExperiment e;
    e.cycles = table.size();
    for (std::size_t c = 0; c < table.size(); ++c) {
        for (const auto& ev : table[c].events) e.total_darks += ev.channel == Channel::idler ? 1 : 0;
    }
    const auto width_ps = static_cast<std::uint64_t>(std::llround(gate_width_ns * 1e3));
    const auto offset_ps = static_cast<std::uint64_t>(std::llround(cfg.arrival_offset_ns * 1e3));
    const GateWindow gate{offset_ps > width_ps / 2 ? offset_ps - width_ps / 2 : 0, width_ps};
    const auto gated = gated_counts(table, gate, gate, duration_s, stream.header.pulse_period_ps);
    for (const auto& w : gated.windows) e.gated_darks += static_cast<std::uint64_t>(w.n_idler);
    e.expected_fraction = static_cast<double>(width_ps) / static_cast<double>(stream.header.pulse_period_ps);
    return e;
}

double drift_exactness_error(const ScanPlan& plan, double slope_per_s, std::uint64_t seed) {
    const double level = 1e4;
    Engine eng(seed);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    const auto timeline = plan.timeline();
    double worst = 0.0;
    for (std::size_t p = 0; p < plan.planes(); ++p) {
        ReferenceLevels ref;
        int npre = 0, npost = 0;
        std::vector<double> truth, counts, times;
        for (const auto& s : timeline) {
            if (s.plane != p) continue;
            const double c = level * (1.0 + slope_per_s * s.t_mid_s);
            if (s.point.site == Site::reference_pre) {
                ref.pre += c;
                ref.t_pre_s += s.t_mid_s;
                ++npre;
            } else if (s.point.site == Site::reference_post) {
                ref.post += c;
                ref.t_post_s += s.t_mid_s;
                ++npost;
            } else {
                truth.push_back(u(eng));
                counts.push_back(truth.back() * c);
                times.push_back(s.t_mid_s);
            }
        }
        ref.pre /= npre;
        ref.t_pre_s /= npre;
        ref.post /= npost;
        ref.t_post_s /= npost;
        const auto n = static_cast<Eigen::Index>(truth.size());
        const Eigen::Map<const Eigen::ArrayXd> tv(truth.data(), n);
        const auto corrected =
            drift_correct(Eigen::Map<const Eigen::ArrayXd>(counts.data(), n), ref, Eigen::Map<const Eigen::ArrayXd>(times.data(), n));
        worst = std::max(worst, ((corrected - tv).abs() / tv).maxCoeff());
    }
    return worst;
}

namespace {

bool same_cube(const HyperCube& a, const HyperCube& b) {
    if (a.planes() != b.planes() || a.wavelengths_nm != b.wavelengths_nm) return false;
    for (std::size_t p = 0; p < a.planes(); ++p) {
        if (!(a.valid[p] == b.valid[p]).all()) return false;
        // NaN-safe bitwise comparison of the masked data
        for (Eigen::Index i = 0; i < a.data[p].size(); ++i) {
            if (std::memcmp(&a.data[p](i), &b.data[p](i), sizeof(double)) != 0) return false;
            if (std::memcmp(&a.uncertainty[p](i), &b.uncertainty[p](i), sizeof(double)) != 0) return false;
        }
    }
    return true;
}

struct Check {
    std::string name;
    double value;
    std::string condition;
    bool pass;
};

json check_json(const Check& c) {
    return {{"metric", c.name}, {"value", c.value}, {"condition", c.condition}, {"pass", c.pass}};
}

}  // namespace

DemoResult run_demo(const PipelineConfig& cfg, const std::string& out_dir, std::uint64_t seed, bool include_metrics) {
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);
    const fs::path root(out_dir);

    DemoResult res;
    res.calibration_truth = {1.01, -5.0, 1.4};
    const auto& truth = res.calibration_truth;

    // calibration against the polystyrene-like reference
    fs::create_directories(root / "calibration");
    const auto ftir = synthetic::ftir_spectrum(&synthetic::polystyrene_like_depth);
    const auto ps_curve = AbsorptionCurve::from_ftir(ftir);
    const auto counts =
        synthetic::calibration_scan(truth, ps_curve, cfg.demo.calibration_counts, derive_seed(seed, {1}));
    write_spectrum_csv((root / "calibration" / "ftir.csv").string(), ftir);
    counts.write_csv((root / "calibration" / "spectrum.csv").string());
    res.calibration = fit_calibration(counts.transmission(), ftir);
    const auto& model = res.calibration.model;
    {
        json m = {{"a", model.a},
                  {"b", model.b},
                  {"R", model.R},
                  {"residual_rms", res.calibration.residual_rms},
                  {"iterations", res.calibration.iterations},
                  {"points_used", res.calibration.points_used}};
        std::ofstream((root / "calibration" / "model.json").string(), std::ios::trunc) << m.dump(2) << '\n';
    }

    // two-material phantom: left half polystyrene-like at thickness R, right half hydrated-like
    ScanPlanConfig plan_cfg = cfg.scan;
    const int grid = cfg.demo.grid;
    plan_cfg.step_um = 25.0;
    plan_cfg.x_extent_um = plan_cfg.y_extent_um = 25.0 * (grid - 1);
    plan_cfg.wavelengths_nm.clear();
    for (int k = 0; k < cfg.demo.planes; ++k) {
        plan_cfg.wavelengths_nm.push_back(cfg.demo.planes == 1 ? 2900.0 : 2900.0 + 700.0 * k / (cfg.demo.planes - 1));
    }
    const auto plan = build_scan_plan(plan_cfg);
    const int split = grid / 2;

    auto truth_a = [&](double nominal) { return std::exp(-truth.R * synthetic::polystyrene_like_depth(truth.map(nominal))); };
    auto truth_b = [&](double nominal) { return std::exp(-synthetic::hydrated_like_depth(truth.map(nominal))); };

    Phantom phantom;
    for (double wl : plan.wavelengths_nm()) {
        for (int iy = 0; iy < plan.ny(); ++iy) {
            for (int ix = 0; ix < plan.nx(); ++ix) phantom.set(ix, iy, wl, ix < split ? truth_a(wl) : truth_b(wl));
        }
    }
    phantom.write_csv((root / "phantom.csv").string());

    const auto raw = simulate_scan(cfg.source, phantom, plan, cfg.demo.drift_slope_per_s, derive_seed(seed, {2}),
                                   cfg.threads);
    write_raw_csv((root / "raw.csv").string(), raw);

    const auto cube = assemble_cube(raw, model, cfg.use_rescaling);
    res.cube_dir = (root / "cube").string();
    write_cube(res.cube_dir, cube);

    const Region region_a = Region::rect(0, 0, split, grid);
    const Region region_b = Region::rect(split, 0, grid, grid);
    json planes = json::array();
    for (std::size_t p = 0; p < plan.planes(); ++p) {
        const double nominal = plan.wavelengths_nm()[p];
        res.max_axis_error_nm = std::max(res.max_axis_error_nm, std::abs(cube.wavelengths_nm[p] - truth.map(nominal)));
        json entry = {{"nominal_nm", nominal}, {"calibrated_nm", cube.wavelengths_nm[p]}};
        for (auto [name, region, expected] :
             {std::tuple{"A", &region_a, truth_a(nominal)}, std::tuple{"B", &region_b, truth_b(nominal)}}) {
            double sum = 0.0;
            int n = 0;
            for (const auto& [ix, iy] : region->pixels) {
                if (!cube.valid[p](ix, iy)) continue;
                sum += cube.data[p](ix, iy);
                ++n;
            }
            const double mean = n ? sum / n : std::nan("");
            const double err = std::abs(mean - expected) / expected;
            res.max_region_error = std::max(res.max_region_error, std::isnan(err) ? 1.0 : err);
            entry[name] = {{"mean", mean}, {"truth", expected}, {"relative_error", err}};
        }
        planes.push_back(entry);
    }

    const std::size_t pa = 0, pb = plan.planes() / 2;
    const auto contrast = contrast_image(cube, cube.wavelengths_nm[pa], cube.wavelengths_nm[pb], cfg.contrast_mode);
    write_contrast_csv((root / "contrast.csv").string(), contrast);
    json contrast_json = {{"lambda_a_nm", contrast.lambda_a_nm},
                          {"lambda_b_nm", contrast.lambda_b_nm},
                          {"mode", contrast_mode_name(contrast.mode)}};
    const double la = plan.wavelengths_nm()[pa], lb = plan.wavelengths_nm()[pb];
    for (auto [name, region, expected] :
         {std::tuple{"A", &region_a, cfg.contrast_mode == ContrastMode::ratio ? truth_a(la) / truth_a(lb)
                                                                                 : truth_a(la) - truth_a(lb)},
          std::tuple{"B", &region_b, cfg.contrast_mode == ContrastMode::ratio ? truth_b(la) / truth_b(lb)
                                                                                 : truth_b(la) - truth_b(lb)}}) {
        double sum = 0.0;
        int n = 0;
        for (const auto& [ix, iy] : region->pixels) {
            if (!contrast.valid(ix, iy)) continue;
            sum += contrast.values(ix, iy);
            ++n;
        }
        const double mean = n ? sum / n : std::nan("");
        const double err = std::abs(std::abs(mean) - std::abs(expected)) / std::abs(expected);
        res.max_contrast_error = std::max(res.max_contrast_error, std::isnan(err) ? 1.0 : err);
        contrast_json[name] = {{"mean", mean}, {"truth", expected}, {"relative_error", err}};
    }

    json spectra;
    for (auto [name, region] : {std::pair{"A", &region_a}, std::pair{"B", &region_b}}) {
        const auto spectrum = extract_spectrum(cube, *region);
        write_spectrum_csv((root / (std::string("spectrum_") + name + ".csv")).string(), spectrum);
        double sq = 0.0;
        for (const auto& pt : spectrum.points) {
            const double nominal = model.unmap(pt.wavelength_nm);
            const double expected = std::string(name) == "A" ? truth_a(nominal) : truth_b(nominal);
            sq += (pt.transmission - expected) * (pt.transmission - expected);
        }
        const double rms = spectrum.points.empty() ? 1.0 : std::sqrt(sq / static_cast<double>(spectrum.points.size()));
        res.max_spectrum_rms = std::max(res.max_spectrum_rms, rms);
        spectra[name] = {{"rms_error", rms}, {"points", spectrum.points.size()}};
    }

    std::vector<Check> checks{
        {"cube_region_max_relative_error", res.max_region_error, "< 0.05", res.max_region_error < 0.05},
        {"contrast_max_relative_error", res.max_contrast_error, "< 0.05", res.max_contrast_error < 0.05},
        {"spectrum_max_rms", res.max_spectrum_rms, "< 0.03", res.max_spectrum_rms < 0.03},
    };

    if (include_metrics) {
        SourceConfig noise_cfg;
        noise_cfg.mean_pairs_per_pulse = 1.0;
        noise_cfg.signal_chain_efficiency = 0.03;
        noise_cfg.idler_chain_efficiency = 0.13;
        noise_cfg.excess_noise_sigma = 0.05;
        const auto excess = run_noise_experiment(noise_cfg, 2000, 3000.0, derive_seed(seed, {10}));
        noise_cfg.excess_noise_sigma = 0.0;
        const auto quiet = run_noise_experiment(noise_cfg, 2000, 3000.0, derive_seed(seed, {11}));
        noise_cfg.excess_noise_sigma = 0.1;
        const auto strong = run_noise_experiment(noise_cfg, 2000, 3000.0, derive_seed(seed, {12}));
        const auto gating = run_dark_gating_experiment(1'000'000, 1e5, 150.0, derive_seed(seed, {13}));

        const auto noiseless = fit_calibration(
            synthetic::calibration_scan(truth, ps_curve, 0.0, 0).transmission(), ftir);
        auto rel = [](double got, double want) { return std::abs(got - want) / std::abs(want); };
        auto worst = [&](const CalibrationModel& m) {
            return std::max({rel(m.a, truth.a), rel(m.b, truth.b), rel(m.R, truth.R)});
        };

        const double idler_hi = idler_wavelength(1510.0, 1064.0);
        const double idler_lo = idler_wavelength(1683.0, 1064.0);
        const double round_trip =
            std::max(rel(signal_wavelength(idler_hi, 1064.0), 1510.0), rel(signal_wavelength(idler_lo, 1064.0), 1683.0));

        const unsigned other_threads = cfg.threads == 1 ? 4 : 1;
        const auto rerun = assemble_cube(simulate_scan(cfg.source, phantom, plan, cfg.demo.drift_slope_per_s,
                                                       derive_seed(seed, {2}), other_threads),
                                         model, cfg.use_rescaling);
        const bool deterministic = same_cube(cube, rerun);
        const double drift_error = drift_exactness_error(build_scan_plan({}), 0.005, derive_seed(seed, {14}));

        const std::vector<Check> more{
            {"noise_raw_ratio_sigma0.05", excess.raw_ratio(), "> 3", excess.raw_ratio() > 3.0},
            {"noise_rescaled_ratio_sigma0.05", excess.rescaled_ratio(), "< 2", excess.rescaled_ratio() < 2.0},
            {"fwhm_rescaled_minus_raw", excess.fwhm_rescaled - excess.fwhm_raw, "< 0",
             excess.fwhm_rescaled < excess.fwhm_raw},
            {"noise_raw_ratio_sigma0", quiet.raw_ratio(), "in [0.9, 1.1]",
             quiet.raw_ratio() >= 0.9 && quiet.raw_ratio() <= 1.1},
            {"noise_rescaled_minus_raw_sigma0", quiet.rescaled_ratio() - quiet.raw_ratio(), ">= -0.05",
             quiet.rescaled_ratio() >= quiet.raw_ratio() - 0.05},
            {"pearson_r_sigma0.1", strong.fit.pearson_r, "> 0.8", strong.fit.pearson_r > 0.8},
            {"abs_pearson_r_sigma0", std::abs(quiet.fit.pearson_r), "< 0.1", std::abs(quiet.fit.pearson_r) < 0.1},
            {"dark_gate_fraction", gating.fraction(), "within 10% of 6e-3",
             std::abs(gating.fraction() / gating.expected_fraction - 1.0) <= 0.1},
            {"calibration_noiseless_worst_relative_error", worst(noiseless.model), "< 1e-3",
             worst(noiseless.model) < 1e-3},
            {"calibration_noisy_worst_relative_error", worst(model), "< 0.02", worst(model) < 0.02},
            {"idler_wavelength_1510", idler_hi, "3602.3 +/- 0.1", std::abs(idler_hi - 3602.3) <= 0.1},
            {"idler_wavelength_1683", idler_lo, "2892.9 +/- 0.1", std::abs(idler_lo - 2892.9) <= 0.1},
            {"wavelength_round_trip_relative_error", round_trip, "<= 1e-12", round_trip <= 1e-12},
            {"cube_identical_across_thread_counts", deterministic ? 1.0 : 0.0, "== 1", deterministic},
            {"drift_correction_max_relative_error", drift_error, "<= 1e-12", drift_error <= 1e-12},
        };
        checks.insert(checks.end(), more.begin(), more.end());
    }

    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json report = {{"seed", seed},
                   {"calibration",
                    {{"fitted", {{"a", model.a}, {"b", model.b}, {"R", model.R}}},
                     {"truth", {{"a", truth.a}, {"b", truth.b}, {"R", truth.R}}},
                     {"residual_rms", res.calibration.residual_rms},
                     {"max_axis_error_nm", res.max_axis_error_nm}}},
                   {"planes", planes},
                   {"contrast", contrast_json},
                   {"spectra", spectra},
                   {"runtime_s", res.seconds}};
    json jchecks = json::array();
    bool all = true;
    for (const auto& c : checks) {
        jchecks.push_back(check_json(c));
        all = all && c.pass;
    }
    report["checks"] = jchecks;
    report["all_pass"] = all;
    res.report_path = (root / "report.json").string();
    std::ofstream(res.report_path, std::ios::trunc) << report.dump(2) << '\n';
    return res;
}

}  // namespace hyperspec
