#include "hyperspec/cli.hpp"
#include "hyperspec/config.hpp"
#include "hyperspec/error.hpp"
#include "hyperspec/pipeline.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hyperspec;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "hyperspec");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int status = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {status, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::path(::testing::TempDir()) / ("cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Config, ParsesSectionsAndValues) {
    const auto f = ConfigFile::parse(R"(
# comment
top = 3
[source]
excess_noise_sigma = 0.1   # trailing comment
name = "a # b"
flag = true
[scan]
wavelengths_nm = [2900, 3000.5]
rows = [[1, 2], [3, 4]]
)");
    EXPECT_EQ(f.integer("top", 0), 3);
    EXPECT_DOUBLE_EQ(f.number("source.excess_noise_sigma", 0), 0.1);
    EXPECT_EQ(f.string("source.name", ""), "a # b");
    EXPECT_TRUE(f.boolean("source.flag", false));
    EXPECT_EQ(f.numbers("scan.wavelengths_nm"), (std::vector<double>{2900, 3000.5}));
    EXPECT_EQ(f.number_rows("scan.rows").size(), 2u);
    EXPECT_NO_THROW(f.reject_unused());
    EXPECT_DOUBLE_EQ(f.number("missing", 7.5), 7.5);
}

TEST(Config, Errors) {
    EXPECT_THROW(ConfigFile::parse("a = 1\na = 2"), ConfigError);
    EXPECT_THROW(ConfigFile::parse("just words"), ConfigError);
    EXPECT_THROW(ConfigFile::parse("x = abc").number("x", 0), ConfigError);
    EXPECT_THROW(ConfigFile::parse("x = 1.5").integer("x", 0), ConfigError);
    EXPECT_THROW(load_pipeline_config(ConfigFile::parse("[source]\ntypo = 1")), ConfigError);
    EXPECT_THROW(load_pipeline_config(ConfigFile::parse("[source]\nidler_chain_efficiency = 2")), ConfigError);
    EXPECT_THROW(load_pipeline_config(ConfigFile::parse("[pipeline]\nregion = [1, 2]")), ConfigError);
    EXPECT_THROW(load_pipeline_config(ConfigFile::parse("[pipeline]\ncontrast_mode = \"sum\"")), ConfigError);
}

TEST(Config, PipelineValuesAndRelativePaths) {
    const auto c = load_pipeline_config(ConfigFile::parse(R"(
[source]
excess_noise_sigma = 0.02
conversion_profile = [[2900, 0.8], [3600, 1.0]]
[scan]
wavelengths_nm = [2900, 3100]
drift_slope_per_s = 0.01
[paths]
raw = "data/raw.csv"
cube = "/abs/cube"
[pipeline]
seed = 42
use_rescaling = false
contrast_mode = "ratio"
region = [0, 1, 2, 3]
threads = 3
)"),
                                        "/base");
    EXPECT_DOUBLE_EQ(c.source.excess_noise_sigma, 0.02);
    EXPECT_DOUBLE_EQ(c.source.conversion_profile.factor(3250), 0.9);
    EXPECT_DOUBLE_EQ(c.drift_slope_per_s, 0.01);
    EXPECT_EQ(c.paths.raw, "/base/data/raw.csv");
    EXPECT_EQ(c.paths.cube, "/abs/cube");
    EXPECT_EQ(c.seed, 42u);
    EXPECT_FALSE(c.use_rescaling);
    EXPECT_EQ(c.contrast_mode, ContrastMode::ratio);
    EXPECT_EQ(*c.region, (std::vector<int>{0, 1, 2, 3}));
    EXPECT_EQ(c.threads, 3u);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
    const auto r = run({"frobnicate"});
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("error: kind=unknown_subcommand"), std::string::npos);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_EQ(run({}).status, 2);
    EXPECT_EQ(run({"gate", "--bogus"}).status, 2);
}

TEST(Cli, SimulateNeedsSeed) {
    const auto dir = scratch("noseed");
    const auto r = run({"simulate", "--out", dir.string()});
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("kind=missing_seed"), std::string::npos);
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, SimulateIsByteIdentical) {
    const auto a = scratch("sim_a"), b = scratch("sim_b");
    ASSERT_EQ(run({"simulate", "--seed", "5", "--out", a.string()}).status, 0);
    ASSERT_EQ(run({"simulate", "--seed", "5", "--out", b.string()}).status, 0);
    for (const char* f : {"stream.ttg", "raw.csv", "phantom.csv", "manifest.json"}) {
        ASSERT_TRUE(fs::exists(a / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    const auto m = nlohmann::json::parse(slurp(a / "manifest.json"));
    EXPECT_EQ(m["seed"], 5);
    EXPECT_EQ(m["raw_windows"], 15 * (32 * 32 + 8));
}

TEST(Cli, ChainRunsAndIsIdempotent) {
    const auto dir = scratch("chain");
    write(dir / "run.toml", R"(
[scan]
x_extent_um = 100
y_extent_um = 100
wavelengths_nm = [2900, 3200]
[stream]
duration_s = 2
[gate]
window_s = 0.1
[paths]
stream = "sim/stream.ttg"
raw = "sim/raw.csv"
windows = "gate/windows.csv"
cube = "cube"
[pipeline]
seed = 9
lambda_a_nm = 2900
lambda_b_nm = 3200
region = [0, 0, 2, 2]
)");
    const auto cfg = (dir / "run.toml").string();
    auto sub = [&](const char* name, const char* out) { return run({name, "--config", cfg, "--out", (dir / out).string()}); };
    ASSERT_EQ(sub("simulate", "sim").status, 0);
    ASSERT_EQ(sub("gate", "gate").status, 0);
    const auto windows = slurp(dir / "gate" / "windows.csv");
    EXPECT_EQ(std::count(windows.begin(), windows.end(), '\n'), 21);
    ASSERT_EQ(sub("gate", "gate").status, 0);
    EXPECT_EQ(slurp(dir / "gate" / "windows.csv"), windows);
    const auto gm = nlohmann::json::parse(slurp(dir / "gate" / "manifest.json"));
    EXPECT_NEAR(gm["gates"]["idler"]["start_ps"].get<double>() + 75'000.0, 50'000.0, 80'000.0);

    ASSERT_EQ(sub("correlate", "corr").status, 0);
    EXPECT_TRUE(fs::exists(dir / "corr" / "noise_stats.csv"));
    ASSERT_EQ(sub("cube", "cube").status, 0);
    const auto manifest = slurp(dir / "cube" / "manifest.json");
    ASSERT_EQ(sub("cube", "cube").status, 0);
    EXPECT_EQ(slurp(dir / "cube" / "manifest.json"), manifest);
    EXPECT_EQ(slurp(dir / "cube" / "plane_001.csv").size() > 0, true);
    ASSERT_EQ(sub("contrast", "contrast").status, 0);
    ASSERT_EQ(sub("spectrum", "spectrum").status, 0);
    const auto spectrum = slurp(dir / "spectrum" / "spectrum.csv");
    EXPECT_EQ(std::count(spectrum.begin(), spectrum.end(), '\n'), 3);
}

TEST(Cli, CalibrateRecoversModel) {
    const auto dir = scratch("calibrate");
    const CalibrationModel truth{1.01, -5.0, 1.4};
    const auto ftir = synthetic::ftir_spectrum(&synthetic::polystyrene_like_depth);
    write_spectrum_csv((dir / "ftir.csv").string(), ftir);
    synthetic::calibration_scan(truth, AbsorptionCurve::from_ftir(ftir), 0.0, 0).write_csv((dir / "spectrum.csv").string());
    write(dir / "cal.toml", "[paths]\nftir = \"ftir.csv\"\nspectrum = \"spectrum.csv\"\n");
    ASSERT_EQ(run({"calibrate", "--config", (dir / "cal.toml").string(), "--out", (dir / "out").string()}).status, 0);
    const auto m = nlohmann::json::parse(slurp(dir / "out" / "model.json"));
    EXPECT_NEAR(m["a"].get<double>(), 1.01, 1.01e-3);
    EXPECT_NEAR(m["b"].get<double>(), -5.0, 5e-3);
    EXPECT_NEAR(m["R"].get<double>(), 1.4, 1.4e-3);
}

TEST(Cli, DataErrorsExitThree) {
    const auto dir = scratch("data_error");
    write(dir / "bad.ttg", "XXXXnot a stream at all, long enough to hold a header");
    write(dir / "g.toml", "[paths]\nstream = \"bad.ttg\"\n");
    const auto r = run({"gate", "--config", (dir / "g.toml").string(), "--out", (dir / "out").string()});
    EXPECT_EQ(r.status, 3);
    EXPECT_NE(r.err.find("kind=bad_magic"), std::string::npos);

    write(dir / "m.toml", "[paths]\nstream = \"missing.ttg\"\n");
    EXPECT_EQ(run({"gate", "--config", (dir / "m.toml").string(), "--out", (dir / "out").string()}).status, 2);
}

TEST(Cli, BinaryExitStatus) {
    const std::string cmd = std::string(HYPERSPEC_CLI) + " nonsense >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 2);
}
