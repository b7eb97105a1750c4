#include "hyperspec/cli.hpp"

#include "hyperspec/config.hpp"
#include "hyperspec/csv.hpp"
#include "hyperspec/error.hpp"
#include "hyperspec/gating.hpp"
#include "hyperspec/pipeline.hpp"
#include "hyperspec/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace hyperspec::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::pair<const char*, const char*> kSubcommands[] = {
    {"simulate", "time-tag stream and raw scan counts from the source model"},
    {"gate", "arrival histograms, gates and per-window counts from a .ttg stream"},
    {"correlate", "signal-idler correlation rescaling and noise statistics"},
    {"calibrate", "fit (a, b, R) of a counts spectrum against an FTIR reference"},
    {"cube", "assemble the drift-corrected, calibrated hypercube"},
    {"contrast", "two-wavelength contrast image from a cube"},
    {"spectrum", "region-averaged spectrum from a cube"},
    {"demo", "end-to-end synthetic phantom experiment with a metrics report"},
};

struct Context {
    PipelineConfig cfg;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    fs::path out;
    std::vector<std::string> outputs;

    std::string file(const std::string& name) {
        outputs.push_back(name);
        return (out / name).string();
    }

    std::uint64_t require_seed() const {
        if (!seed) throw ConfigError("missing_seed", "a seed is required (--seed or pipeline.seed)");
        return *seed;
    }

    const std::string& require_path(const std::string& value, const char* key) const {
        if (value.empty()) throw ConfigError("missing_key", std::string("paths.") + key + " is not set");
        if (!fs::exists(value)) throw ConfigError("missing_input", std::string("paths.") + key + ": " + value + " does not exist");
        return value;
    }

    void write_manifest(const std::string& subcommand, json extra = json::object()) {
        json m = {{"subcommand", subcommand},
                  {"config", config_path},
                  {"seed", seed ? json(*seed) : json(nullptr)},
                  {"outputs", outputs}};
        for (auto& [k, v] : extra.items()) m[k] = v;
        std::ofstream((out / "manifest.json").string(), std::ios::trunc) << m.dump(2) << '\n';
    }
};

void write_model_json(const std::string& path, const CalibrationFit& fit) {
    const json m = {{"a", fit.model.a},
                    {"b", fit.model.b},
                    {"R", fit.model.R},
                    {"residual_rms", fit.residual_rms},
                    {"iterations", fit.iterations},
                    {"points_used", fit.points_used}};
    std::ofstream(path, std::ios::trunc) << m.dump(2) << '\n';
}

CalibrationModel read_model_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("missing_input", "cannot open " + path);
    try {
        json m;
        in >> m;
        CalibrationModel model{m.at("a").get<double>(), m.at("b").get<double>(), m.at("R").get<double>()};
        model.validate();
        return model;
    } catch (const json::exception& e) {
        throw DataError("bad_model", path + ": " + e.what());
    }
}

void write_windows_csv(const std::string& path, std::span<const WindowCounts> windows) {
    CsvWriter w(path, {"window", "wavelength_nm", "window_s", "n_signal", "n_idler"});
    for (std::size_t k = 0; k < windows.size(); ++k) {
        w.field(k).field(windows[k].wavelength_nm).field(windows[k].window_duration_s).field(windows[k].n_signal)
            .field(windows[k].n_idler);
        w.end_row();
    }
}

std::vector<WindowCounts> read_windows_csv(const std::string& path) {
    const auto t = read_csv(path);
    const auto cw = t.column("wavelength_nm"), cd = t.column("window_s"), cs = t.column("n_signal"),
               ci = t.column("n_idler");
    std::vector<WindowCounts> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        WindowCounts w;
        w.wavelength_nm = t.number(r, cw);
        w.window_duration_s = t.number(r, cd);
        w.n_signal = t.integer(r, cs);
        w.n_idler = t.integer(r, ci);
        if (w.n_signal < 0 || w.n_idler < 0) throw DataError("bad_counts", "negative count in " + path, r);
        out.push_back(w);
    }
    return out;
}

ScanPlan plan_from(const PipelineConfig& cfg) { return build_scan_plan(cfg.scan); }

Region region_from(const PipelineConfig& cfg, const HyperCube& cube) {
    if (!cfg.region) return Region::rect(0, 0, cube.nx(), cube.ny());
    const auto& r = *cfg.region;
    return Region::rect(r[0], r[1], r[2], r[3]);
}

void cmd_simulate(Context& ctx) {
    const auto seed = ctx.require_seed();
    const auto& cfg = ctx.cfg;
    const auto bytes = simulate_stream(cfg.source, cfg.stream.transmission, cfg.stream.wavelength_nm,
                                       cfg.stream.duration_s, derive_seed(seed, {0}));
    write_file_bytes(ctx.file("stream.ttg"), bytes);

    const auto plan = plan_from(cfg);
    const auto phantom = cfg.paths.phantom.empty() ? Phantom::uniform(plan, 1.0)
                                                   : Phantom::from_csv(ctx.require_path(cfg.paths.phantom, "phantom"));
    phantom.write_csv(ctx.file("phantom.csv"));
    const auto raw = simulate_scan(cfg.source, phantom, plan, cfg.drift_slope_per_s, derive_seed(seed, {1}), cfg.threads);
    write_raw_csv(ctx.file("raw.csv"), raw);
    ctx.write_manifest("simulate", {{"stream_bytes", bytes.size()}, {"raw_windows", raw.windows.size()}});
}

void cmd_gate(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto bytes = read_file_bytes(ctx.require_path(cfg.paths.stream, "stream"));
    const auto stream = decode_stream(bytes);
    const auto table = split_by_trigger(stream.records);
    const auto period = stream.header.pulse_period_ps;
    const auto bin_ps = static_cast<std::uint64_t>(std::llround(cfg.gate.bin_width_ns * 1e3));
    const auto width_ps = static_cast<std::uint64_t>(std::llround(cfg.gate.width_ns * 1e3));
    if (bin_ps == 0) throw ConfigError("bad_value", "gate.bin_width_ns must be positive");

    json gates;
    GateWindow chosen[2];
    const std::pair<Channel, const std::optional<double>*> channels[] = {{Channel::signal, &cfg.gate.signal_start_ns},
                                                                         {Channel::idler, &cfg.gate.idler_start_ns}};
    for (int k = 0; k < 2; ++k) {
        const auto [channel, fixed] = channels[k];
        const auto hist = build_histogram(table, channel, bin_ps, 0, period);
        const char* name = channel == Channel::signal ? "signal" : "idler";
        write_histogram_csv(ctx.file(std::string("histogram_") + name + ".csv"), hist);
        if (fixed->has_value()) {
            if (**fixed < 0.0) throw ConfigError("bad_value", std::string("gate.") + name + "_start_ns must be >= 0");
            chosen[k] = {static_cast<std::uint64_t>(std::llround(**fixed * 1e3)), width_ps};
        } else {
            chosen[k] = auto_gate(hist, width_ps);
        }
        chosen[k].validate(period);
        gates[name] = {{"start_ps", chosen[k].start_ps}, {"width_ps", chosen[k].width_ps}, {"auto", !fixed->has_value()}};
    }
    const auto gated = gated_counts(table, chosen[0], chosen[1], cfg.gate.window_s, period, cfg.stream.wavelength_nm);
    write_windows_csv(ctx.file("windows.csv"), gated.windows);
    ctx.write_manifest("gate", {{"gates", gates},
                                {"cycles", table.size()},
                                {"discarded_events", table.discarded_count()},
                                {"windows", gated.windows.size()},
                                {"dropped_cycles", gated.dropped_cycles}});
}

void cmd_correlate(Context& ctx) {
    const auto windows = read_windows_csv(ctx.require_path(ctx.cfg.paths.windows, "windows"));
    const auto rescaled = rescale_idler(windows);
    {
        CsvWriter w(ctx.file("rescaled.csv"), {"window", "n_signal", "n_idler", "n_idler_rescaled"});
        for (std::size_t k = 0; k < rescaled.retained.size(); ++k) {
            const auto& win = windows[rescaled.retained[k]];
            w.field(rescaled.retained[k]).field(win.n_signal).field(win.n_idler).field(rescaled.values[k]);
            w.end_row();
        }
    }
    const auto stats = noise_stats(windows);
    write_noise_stats_csv(ctx.file("noise_stats.csv"), std::span(&stats, 1));
    json extra = {{"excluded_windows", rescaled.excluded}, {"mean_signal", rescaled.mean_signal}};
    if (windows.size() >= 3) {
        const auto fit = correlation_fit(windows);
        extra["fit"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"pearson_r", fit.pearson_r}};
    }
    ctx.write_manifest("correlate", extra);
}

void cmd_calibrate(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto ftir = read_ftir_csv(ctx.require_path(cfg.paths.ftir, "ftir"));
    const auto measured = read_counts_spectrum_csv(ctx.require_path(cfg.paths.spectrum, "spectrum"));
    const auto fit = fit_calibration(measured, ftir);
    write_model_json(ctx.file("model.json"), fit);
    write_spectrum_csv(ctx.file("calibrated_spectrum.csv"), apply_calibration(fit.model, measured));
    ctx.write_manifest("calibrate", {{"a", fit.model.a}, {"b", fit.model.b}, {"R", fit.model.R}});
}

void cmd_cube(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto plan = plan_from(cfg);
    const auto windows = read_raw_csv(ctx.require_path(cfg.paths.raw, "raw"));
    const CalibrationModel model =
        cfg.paths.calibration.empty() ? CalibrationModel{} : read_model_json(ctx.require_path(cfg.paths.calibration, "calibration"));
    const auto cube = assemble_cube(plan, windows, model, cfg.use_rescaling);
    write_cube(ctx.out.string(), cube);
}

void cmd_contrast(Context& ctx) {
    const auto& cfg = ctx.cfg;
    if (!cfg.lambda_a_nm || !cfg.lambda_b_nm) {
        throw ConfigError("missing_key", "pipeline.lambda_a_nm and pipeline.lambda_b_nm are required");
    }
    const auto cube = read_cube(ctx.require_path(cfg.paths.cube, "cube"));
    const auto image = contrast_image(cube, *cfg.lambda_a_nm, *cfg.lambda_b_nm, cfg.contrast_mode);
    write_contrast_csv(ctx.file("contrast.csv"), image);
    ctx.write_manifest("contrast", {{"lambda_a_nm", image.lambda_a_nm},
                                    {"lambda_b_nm", image.lambda_b_nm},
                                    {"mode", contrast_mode_name(image.mode)}});
}

void cmd_spectrum(Context& ctx) {
    const auto cube = read_cube(ctx.require_path(ctx.cfg.paths.cube, "cube"));
    const auto spectrum = extract_spectrum(cube, region_from(ctx.cfg, cube));
    write_spectrum_csv(ctx.file("spectrum.csv"), spectrum);
    ctx.write_manifest("spectrum", {{"points", spectrum.points.size()}});
}

void cmd_demo(Context& ctx) {
    const auto seed = ctx.seed.value_or(1);
    const auto result = run_demo(ctx.cfg, ctx.out.string(), seed);
    ctx.outputs = {"calibration/ftir.csv", "calibration/spectrum.csv", "calibration/model.json", "phantom.csv",
                   "raw.csv", "cube/manifest.json", "contrast.csv", "spectrum_A.csv", "spectrum_B.csv", "report.json"};
    ctx.seed = seed;
    ctx.write_manifest("demo", {{"report", "report.json"}, {"runtime_s", result.seconds}});
}

std::string one_line(std::string s) {
    for (auto& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Single-photon upconversion hyperspectral imaging pipeline", "hyperspec"};
    app.require_subcommand(1, 1);
    std::string config_path;
    std::int64_t seed = -1;
    std::string out_dir = "hyperspec_out";
    for (const auto& [name, description] : kSubcommands) {
        auto* sub = app.add_subcommand(name, description);
        sub->add_option("--config", config_path, "TOML-style configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "master RNG seed")->check(CLI::NonNegativeNumber);
        sub->add_option("--out", out_dir, "output directory");
    }

    if (argc > 1 && argv[1][0] != '-' &&
        std::none_of(std::begin(kSubcommands), std::end(kSubcommands),
                     [&](const auto& sc) { return std::string_view(argv[1]) == sc.first; })) {
        err << "error: kind=unknown_subcommand msg=" << one_line(argv[1]) << '\n' << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: kind=usage msg=" << one_line(e.what()) << '\n' << app.help();
        return 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        Context ctx;
        ctx.config_path = config_path;
        ctx.cfg = config_path.empty() ? load_pipeline_config(ConfigFile::parse(""))
                                      : load_pipeline_config(config_path);
        ctx.seed = seed >= 0 ? std::optional<std::uint64_t>(static_cast<std::uint64_t>(seed)) : ctx.cfg.seed;
        ctx.out = out_dir;
        fs::create_directories(ctx.out);

        if (name == "simulate") cmd_simulate(ctx);
        else if (name == "gate") cmd_gate(ctx);
        else if (name == "correlate") cmd_correlate(ctx);
        else if (name == "calibrate") cmd_calibrate(ctx);
        else if (name == "cube") cmd_cube(ctx);
        else if (name == "contrast") cmd_contrast(ctx);
        else if (name == "spectrum") cmd_spectrum(ctx);
        else cmd_demo(ctx);
        out << name << ": wrote " << ctx.out.string() << '\n';
        return 0;
    } catch (const ConfigError& e) {
        err << "error: kind=" << e.code() << " msg=" << one_line(e.what()) << '\n';
        return 2;
    } catch (const DataError& e) {
        err << "error: kind=" << e.code() << " msg=" << one_line(e.what());
        if (e.position()) err << " at=" << *e.position();
        err << '\n';
        return 3;
    } catch (const fs::filesystem_error& e) {
        err << "error: kind=io msg=" << one_line(e.what()) << '\n';
        return 3;
    }
}

}  // namespace hyperspec::cli
