#include "hyperspec/hypercube.hpp"

#include "hyperspec/correlation.hpp"
#include "hyperspec/csv.hpp"
#include "hyperspec/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace hyperspec {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

// Canonical per-plane layout of the raw windows: indices into the input, so
// the assembled cube never depends on record order.
struct PlaneIndex {
    std::vector<std::optional<std::size_t>> pre, post;
    std::vector<std::optional<std::size_t>> pixels;  // ix + nx * iy
};

std::string point_name(std::size_t plane, const ScanPoint& p, std::size_t batch) {
    switch (p.site) {
        case Site::reference_pre: return "plane " + std::to_string(plane) + " pre-reference " + std::to_string(batch);
        case Site::reference_post: return "plane " + std::to_string(plane) + " post-reference " + std::to_string(batch);
        case Site::pixel: break;
    }
    return "plane " + std::to_string(plane) + " pixel (" + std::to_string(p.ix) + "," + std::to_string(p.iy) + ")";
}

std::vector<PlaneIndex> index_windows(const ScanPlan& plan, std::span<const RawWindow> windows) {
    const auto refs = static_cast<std::size_t>(plan.reference_points_per_plane());
    std::vector<PlaneIndex> idx(plan.planes());
    for (auto& p : idx) {
        p.pre.resize(refs);
        p.post.resize(refs);
        p.pixels.resize(plan.pixels_per_plane());
    }
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        const auto& pt = w.counts.point;
        if (w.plane >= plan.planes()) {
            throw DataError("bad_window", "window " + std::to_string(i) + " refers to plane " + std::to_string(w.plane), i);
        }
        std::optional<std::size_t>* slot = nullptr;
        if (pt.site == Site::pixel) {
            if (pt.ix < 0 || pt.iy < 0 || pt.ix >= plan.nx() || pt.iy >= plan.ny()) {
                throw DataError("bad_window", "window " + std::to_string(i) + " lies outside the scan grid", i);
            }
            slot = &idx[w.plane].pixels[static_cast<std::size_t>(pt.ix) + static_cast<std::size_t>(plan.nx()) * pt.iy];
        } else {
            auto& batch = pt.site == Site::reference_pre ? idx[w.plane].pre : idx[w.plane].post;
            if (w.batch_index >= batch.size()) {
                throw DataError("bad_window", "window " + std::to_string(i) + " has reference index " +
                                                  std::to_string(w.batch_index) + " beyond the plan",
                                i);
            }
            slot = &batch[w.batch_index];
        }
        if (slot->has_value()) {
            throw DataError("duplicate_window", "duplicate window for " + point_name(w.plane, pt, w.batch_index), i);
        }
        *slot = i;
    }

    std::vector<std::string> gaps;
    for (std::size_t plane = 0; plane < idx.size(); ++plane) {
        for (std::size_t r = 0; r < refs; ++r) {
            if (!idx[plane].pre[r]) gaps.push_back(point_name(plane, {Site::reference_pre, 0, 0}, r));
            if (!idx[plane].post[r]) gaps.push_back(point_name(plane, {Site::reference_post, 0, 0}, r));
        }
        for (int iy = 0; iy < plan.ny(); ++iy) {
            for (int ix = 0; ix < plan.nx(); ++ix) {
                if (!idx[plane].pixels[static_cast<std::size_t>(ix) + static_cast<std::size_t>(plan.nx()) * iy]) {
                    gaps.push_back(point_name(plane, {Site::pixel, ix, iy}, 0));
                }
            }
        }
    }
    if (!gaps.empty()) {
        std::string msg = std::to_string(gaps.size()) + " missing windows:";
        const std::size_t shown = std::min<std::size_t>(gaps.size(), 20);
        for (std::size_t k = 0; k < shown; ++k) msg += (k ? "; " : " ") + gaps[k];
        if (shown < gaps.size()) msg += "; ...";
        throw DataError("assembly_gap", msg);
    }
    return idx;
}

}  // namespace

std::size_t HyperCube::masked_count(std::size_t plane) const {
    return static_cast<std::size_t>((!valid[plane]).count());
}

HyperCube assemble_cube(const ScanPlan& plan, std::span<const RawWindow> windows, const CalibrationModel& calibration,
                        bool use_rescaling) {
    calibration.validate();
    const auto index = index_windows(plan, windows);
    const int nx = plan.nx(), ny = plan.ny();

    HyperCube cube;
    cube.plan = plan;
    cube.calibration = calibration;
    cube.rescaled = use_rescaling;
    for (double w : plan.wavelengths_nm()) cube.wavelengths_nm.push_back(calibration.map(w));

    for (std::size_t plane = 0; plane < plan.planes(); ++plane) {
        const auto& pi = index[plane];
        // pre batch, pixels in raster order, post batch
        std::vector<std::size_t> order;
        for (const auto& s : pi.pre) order.push_back(*s);
        for (const auto& s : pi.pixels) order.push_back(*s);
        for (const auto& s : pi.post) order.push_back(*s);

        std::vector<WindowCounts> batch;
        batch.reserve(order.size());
        for (auto i : order) batch.push_back(windows[i].counts);

        // value per canonical slot; nullopt where rescaling had to drop the window
        std::vector<std::optional<double>> value(order.size());
        if (use_rescaling) {
            try {
                const auto r = rescale_idler(batch);
                for (std::size_t k = 0; k < r.retained.size(); ++k) value[r.retained[k]] = r.values[k];
            } catch (const DataError&) {
                // no signal anywhere in the plane: leave every slot empty
            }
        } else {
            for (std::size_t k = 0; k < batch.size(); ++k) value[k] = static_cast<double>(batch[k].n_idler);
        }

        const std::size_t refs = pi.pre.size();
        auto batch_level = [&](std::size_t first) {
            double sum = 0.0, t = 0.0;
            std::size_t n = 0;
            for (std::size_t k = first; k < first + refs; ++k) {
                if (!value[k]) continue;
                sum += *value[k];
                t += windows[order[k]].t_mid_s;
                ++n;
            }
            return n ? std::pair{sum / n, t / n} : std::pair{0.0, 0.0};
        };
        const std::size_t post_first = refs + pi.pixels.size();
        const auto [pre, t_pre] = batch_level(0);
        const auto [post, t_post] = batch_level(post_first);
        ReferenceLevels ref{pre, post, t_pre, t_post};

        double ref_counts = 0.0;
        for (std::size_t k = 0; k < refs; ++k) {
            ref_counts += static_cast<double>(batch[k].n_idler + batch[post_first + k].n_idler);
        }

        Eigen::ArrayXXd data = Eigen::ArrayXXd::Constant(nx, ny, nan);
        Eigen::ArrayXXd sigma = Eigen::ArrayXXd::Constant(nx, ny, nan);
        BoolArray valid = BoolArray::Constant(nx, ny, false);
        if (ref.valid()) {
            for (int iy = 0; iy < ny; ++iy) {
                for (int ix = 0; ix < nx; ++ix) {
                    const std::size_t k = refs + static_cast<std::size_t>(ix) + static_cast<std::size_t>(nx) * iy;
                    if (!value[k]) continue;
                    const auto& w = windows[order[k]];
                    const Eigen::Array<double, 1, 1> v{*value[k]}, t{w.t_mid_s};
                    const double tr = drift_correct(v, ref, t)[0];
                    double rel = 1.0 / std::max<double>(1.0, static_cast<double>(w.counts.n_idler)) + 1.0 / ref_counts;
                    if (use_rescaling) rel += 1.0 / static_cast<double>(w.counts.n_signal);
                    data(ix, iy) = tr;
                    sigma(ix, iy) = std::abs(tr) * std::sqrt(rel);
                    valid(ix, iy) = true;
                }
            }
        }
        cube.data.push_back(std::move(data));
        cube.uncertainty.push_back(std::move(sigma));
        cube.valid.push_back(std::move(valid));
        cube.references.push_back(ref);
    }
    return cube;
}

HyperCube apply_calibration(const CalibrationModel& model, HyperCube cube) {
    model.validate();
    for (auto& w : cube.wavelengths_nm) w = model.map(w);
    cube.calibration = {model.a * cube.calibration.a, model.a * cube.calibration.b + model.b, model.R};
    return cube;
}

std::size_t find_plane(const HyperCube& cube, double wavelength_nm) {
    const auto& axis = cube.wavelengths_nm;
    if (axis.empty()) throw DataError("lookup", "cube has no wavelength planes");
    std::size_t best = 0;
    for (std::size_t k = 1; k < axis.size(); ++k) {
        if (std::abs(axis[k] - wavelength_nm) < std::abs(axis[best] - wavelength_nm)) best = k;
    }
    double spacing = std::numeric_limits<double>::infinity();
    if (best > 0) spacing = std::min(spacing, axis[best] - axis[best - 1]);
    if (best + 1 < axis.size()) spacing = std::min(spacing, axis[best + 1] - axis[best]);
    const double tolerance = std::isfinite(spacing) ? 0.5 * spacing : 1e-6;
    if (std::abs(axis[best] - wavelength_nm) > tolerance) {
        throw DataError("lookup", "no plane within half a step of " + format_number(wavelength_nm) + " nm");
    }
    return best;
}

ContrastImage contrast_image(const HyperCube& cube, double lambda_a_nm, double lambda_b_nm, ContrastMode mode) {
    const std::size_t a = find_plane(cube, lambda_a_nm);
    const std::size_t b = find_plane(cube, lambda_b_nm);
    ContrastImage img;
    img.lambda_a_nm = cube.wavelengths_nm[a];
    img.lambda_b_nm = cube.wavelengths_nm[b];
    img.mode = mode;
    img.valid = cube.valid[a] && cube.valid[b];
    if (mode == ContrastMode::difference) {
        img.values = cube.data[a] - cube.data[b];
    } else {
        constexpr double floor = 1e-3;
        img.valid = img.valid && (cube.data[b] >= floor);
        img.values = cube.data[a] / cube.data[b];
    }
    img.values = img.valid.select(img.values, nan);
    return img;
}

Region Region::rect(int x0, int y0, int x1, int y1) {
    Region r;
    for (int iy = y0; iy < y1; ++iy) {
        for (int ix = x0; ix < x1; ++ix) r.pixels.emplace_back(ix, iy);
    }
    return r;
}

TransmissionSpectrum extract_spectrum(const HyperCube& cube, const Region& region) {
    if (region.pixels.empty()) throw DataError("region", "region is empty");
    for (const auto& [ix, iy] : region.pixels) {
        if (ix < 0 || iy < 0 || ix >= cube.nx() || iy >= cube.ny()) {
            throw DataError("region", "pixel (" + std::to_string(ix) + "," + std::to_string(iy) + ") outside the cube");
        }
    }
    TransmissionSpectrum s;
    s.source = SpectrumSource::single_photon;
    for (std::size_t plane = 0; plane < cube.planes(); ++plane) {
        std::vector<double> vals;
        double single_sigma = 0.0;
        for (const auto& [ix, iy] : region.pixels) {
            if (!cube.valid[plane](ix, iy)) continue;
            vals.push_back(cube.data[plane](ix, iy));
            single_sigma = cube.uncertainty[plane](ix, iy);
        }
        if (vals.empty()) continue;
        const Eigen::Map<const Eigen::ArrayXd> v(vals.data(), static_cast<Eigen::Index>(vals.size()));
        const double se = vals.size() >= 2 ? stats::sample_stddev(v) / std::sqrt(static_cast<double>(vals.size()))
                                           : single_sigma;
        s.points.push_back({cube.wavelengths_nm[plane], stats::mean(v), se});
    }
    return s;
}

ContrastMode parse_contrast_mode(const std::string& s) {
    if (s == "difference") return ContrastMode::difference;
    if (s == "ratio") return ContrastMode::ratio;
    throw ConfigError("contrast_mode", "contrast mode must be 'difference' or 'ratio', got '" + s + "'");
}

const char* contrast_mode_name(ContrastMode m) { return m == ContrastMode::ratio ? "ratio" : "difference"; }

}  // namespace hyperspec
