#include "hyperspec/csv.hpp"
#include "hyperspec/hypercube.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace hyperspec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string plane_file(const char* stem, std::size_t plane) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s_%03zu.csv", stem, plane);
    return buf;
}

}  // namespace

void write_cube(const std::string& dir, const HyperCube& cube) {
    fs::create_directories(dir);
    const fs::path root(dir);

    json planes = json::array();
    for (std::size_t p = 0; p < cube.planes(); ++p) {
        const auto data_name = plane_file("plane", p);
        const auto unc_name = plane_file("uncertainty", p);
        CsvWriter data((root / data_name).string(), {"ix", "iy", "transmission"});
        CsvWriter unc((root / unc_name).string(), {"ix", "iy", "uncertainty"});
        for (int iy = 0; iy < cube.ny(); ++iy) {
            for (int ix = 0; ix < cube.nx(); ++ix) {
                const bool ok = cube.valid[p](ix, iy);
                data.field(ix).field(iy).field(ok ? cube.data[p](ix, iy) : std::nan(""));
                data.end_row();
                unc.field(ix).field(iy).field(ok ? cube.uncertainty[p](ix, iy) : std::nan(""));
                unc.end_row();
            }
        }
        planes.push_back({{"index", p},
                          {"wavelength_nm", cube.wavelengths_nm[p]},
                          {"nominal_wavelength_nm", cube.plan.wavelengths_nm()[p]},
                          {"file", data_name},
                          {"uncertainty_file", unc_name},
                          {"masked_pixels", cube.masked_count(p)}});
    }

    CsvWriter refs((root / "reference.csv").string(),
                   {"plane", "wavelength_nm", "pre_ref", "post_ref", "t_pre_s", "t_post_s", "valid"});
    for (std::size_t p = 0; p < cube.planes(); ++p) {
        const auto& r = cube.references[p];
        refs.field(p).field(cube.wavelengths_nm[p]).field(r.pre).field(r.post).field(r.t_pre_s).field(r.t_post_s)
            .field(r.valid() ? 1 : 0);
        refs.end_row();
    }

    const auto& plan = cube.plan;
    json manifest = {
        {"format", "hyperspec-cube"},
        {"version", 1},
        {"plan",
         {{"x_extent_um", plan.x_extent_um()},
          {"y_extent_um", plan.y_extent_um()},
          {"step_um", plan.step_um()},
          {"nx", plan.nx()},
          {"ny", plan.ny()},
          {"wavelengths_nm", plan.wavelengths_nm()},
          {"dwell_s", plan.dwell_s()},
          {"reference_points_per_plane", plan.reference_points_per_plane()}}},
        {"calibration", {{"a", cube.calibration.a}, {"b", cube.calibration.b}, {"R", cube.calibration.R}}},
        {"provenance", {{"rescaled", cube.rescaled}, {"reference_file", "reference.csv"}}},
        {"planes", planes},
    };
    std::ofstream((root / "manifest.json").string(), std::ios::trunc) << manifest.dump(2) << '\n';
}

HyperCube read_cube(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream in((root / "manifest.json").string());
    if (!in) throw ConfigError("io", "no manifest.json in " + dir);
    json m;
    try {
        in >> m;
    } catch (const json::exception& e) {
        throw DataError("bad_manifest", std::string("manifest.json: ") + e.what());
    }
    if (m.value("format", "") != "hyperspec-cube") throw DataError("bad_manifest", "not a cube manifest");

    HyperCube cube;
    try {
        const auto& jp = m.at("plan");
        ScanPlanConfig cfg;
        cfg.x_extent_um = jp.at("x_extent_um").get<double>();
        cfg.y_extent_um = jp.at("y_extent_um").get<double>();
        cfg.step_um = jp.at("step_um").get<double>();
        cfg.wavelengths_nm = jp.at("wavelengths_nm").get<std::vector<double>>();
        cfg.dwell_s = jp.at("dwell_s").get<double>();
        cfg.reference_points_per_plane = jp.at("reference_points_per_plane").get<int>();
        cube.plan = build_scan_plan(cfg);
        const auto& jc = m.at("calibration");
        cube.calibration = {jc.at("a").get<double>(), jc.at("b").get<double>(), jc.at("R").get<double>()};
        cube.rescaled = m.at("provenance").at("rescaled").get<bool>();

        for (const auto& plane : m.at("planes")) {
            cube.wavelengths_nm.push_back(plane.at("wavelength_nm").get<double>());
            Eigen::ArrayXXd data = Eigen::ArrayXXd::Constant(cube.nx(), cube.ny(), std::nan(""));
            Eigen::ArrayXXd unc = data;
            BoolArray valid = BoolArray::Constant(cube.nx(), cube.ny(), false);
            const auto t = read_csv((root / plane.at("file").get<std::string>()).string());
            const auto cx = t.column("ix"), cy = t.column("iy"), ct = t.column("transmission");
            for (std::size_t r = 0; r < t.rows.size(); ++r) {
                const auto ix = t.integer(r, cx), iy = t.integer(r, cy);
                if (ix < 0 || iy < 0 || ix >= cube.nx() || iy >= cube.ny()) {
                    throw DataError("bad_plane", "pixel outside grid in " + plane.at("file").get<std::string>(), r);
                }
                const double v = t.number(r, ct);
                data(ix, iy) = v;
                valid(ix, iy) = !std::isnan(v);
            }
            const auto uf = root / plane.value("uncertainty_file", std::string{});
            if (fs::is_regular_file(uf)) {
                const auto tu = read_csv(uf.string());
                const auto ux = tu.column("ix"), uy = tu.column("iy"), uu = tu.column("uncertainty");
                for (std::size_t r = 0; r < tu.rows.size(); ++r) {
                    const auto ix = tu.integer(r, ux), iy = tu.integer(r, uy);
                    if (ix >= 0 && iy >= 0 && ix < cube.nx() && iy < cube.ny()) unc(ix, iy) = tu.number(r, uu);
                }
            }
            cube.data.push_back(std::move(data));
            cube.uncertainty.push_back(std::move(unc));
            cube.valid.push_back(std::move(valid));
        }
    } catch (const json::exception& e) {
        throw DataError("bad_manifest", std::string("manifest.json: ") + e.what());
    }

    const auto rt = read_csv((root / "reference.csv").string());
    const auto cp = rt.column("plane"), cpre = rt.column("pre_ref"), cpost = rt.column("post_ref"),
               ctp = rt.column("t_pre_s"), ctq = rt.column("t_post_s");
    cube.references.resize(cube.planes());
    for (std::size_t r = 0; r < rt.rows.size(); ++r) {
        const auto p = static_cast<std::size_t>(rt.integer(r, cp));
        if (p < cube.planes()) {
            cube.references[p] = {rt.number(r, cpre), rt.number(r, cpost), rt.number(r, ctp), rt.number(r, ctq)};
        }
    }
    return cube;
}

void write_contrast_csv(const std::string& path, const ContrastImage& image) {
    // grid: one row per iy, one column per ix
    std::vector<std::string> header;
    for (Eigen::Index ix = 0; ix < image.values.rows(); ++ix) header.push_back("ix" + std::to_string(ix));
    CsvWriter w(path, header);
    for (Eigen::Index iy = 0; iy < image.values.cols(); ++iy) {
        for (Eigen::Index ix = 0; ix < image.values.rows(); ++ix) {
            w.field(image.valid(ix, iy) ? image.values(ix, iy) : std::nan(""));
        }
        w.end_row();
    }
}

}  // namespace hyperspec
