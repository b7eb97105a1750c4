#include "hyperspec/scan.hpp"

#include "hyperspec/error.hpp"

#include <cmath>
#include <string>

namespace hyperspec {

namespace {

constexpr double axis_low_nm = 2900.0;
constexpr double axis_high_nm = 3600.0;
constexpr double axis_tolerance_nm = 1e-9;

int grid_points(double extent_um, double step_um) {
    // tolerance keeps 775/25 from landing just below 31
    return static_cast<int>(std::floor(extent_um / step_um + 1e-9)) + 1;
}

}  // namespace

std::vector<ScanPoint> ScanPlan::pixel_order() const {
    std::vector<ScanPoint> order;
    order.reserve(pixels_per_plane());
    for (int iy = 0; iy < ny_; ++iy) {
        for (int k = 0; k < nx_; ++k) {
            const int ix = (iy % 2 == 0) ? k : nx_ - 1 - k;
            order.push_back({Site::pixel, ix, iy});
        }
    }
    return order;
}

std::vector<ScanStep> ScanPlan::timeline() const {
    const auto pixels = pixel_order();
    std::vector<ScanStep> steps;
    steps.reserve(planes() * (pixels.size() + 2 * static_cast<std::size_t>(refs_)));
    double t = 0.0;
    auto push = [&](std::size_t plane, ScanPoint p, std::size_t batch) {
        steps.push_back({plane, p, batch, t, t + 0.5 * dwell_s_});
        t += dwell_s_;
    };
    for (std::size_t plane = 0; plane < planes(); ++plane) {
        for (int r = 0; r < refs_; ++r) push(plane, {Site::reference_pre, 0, 0}, static_cast<std::size_t>(r));
        for (const auto& p : pixels) push(plane, p, 0);
        for (int r = 0; r < refs_; ++r) push(plane, {Site::reference_post, 0, 0}, static_cast<std::size_t>(r));
    }
    return steps;
}

ScanPlan build_scan_plan(const ScanPlanConfig& cfg) {
    if (!(cfg.step_um > 0.0)) throw ConfigError("scan", "step_um must be positive");
    if (!(cfg.x_extent_um >= 0.0) || !(cfg.y_extent_um >= 0.0)) {
        throw ConfigError("scan", "extents must be non-negative");
    }
    if (cfg.step_um > cfg.x_extent_um || cfg.step_um > cfg.y_extent_um) {
        throw ConfigError("scan", "step_um exceeds scan extent");
    }
    if (!(cfg.dwell_s > 0.0)) throw ConfigError("scan", "dwell_s must be positive");
    if (cfg.reference_points_per_plane < 1) {
        throw ConfigError("scan", "reference_points_per_plane must be at least 1");
    }

    ScanPlan plan;
    plan.nx_ = grid_points(cfg.x_extent_um, cfg.step_um);
    plan.ny_ = grid_points(cfg.y_extent_um, cfg.step_um);
    plan.step_um_ = cfg.step_um;
    plan.x_extent_um_ = cfg.x_extent_um;
    plan.y_extent_um_ = cfg.y_extent_um;
    plan.dwell_s_ = cfg.dwell_s;
    plan.refs_ = cfg.reference_points_per_plane;

    if (!cfg.wavelengths_nm.empty()) {
        plan.wavelengths_ = cfg.wavelengths_nm;
    } else {
        if (!(cfg.wavelength_step_nm > 0.0) || cfg.wavelength_stop_nm < cfg.wavelength_start_nm) {
            throw ConfigError("scan", "invalid wavelength range");
        }
        const auto n = static_cast<int>(
            std::floor((cfg.wavelength_stop_nm - cfg.wavelength_start_nm) / cfg.wavelength_step_nm + 1e-9));
        for (int k = 0; k <= n; ++k) plan.wavelengths_.push_back(cfg.wavelength_start_nm + k * cfg.wavelength_step_nm);
    }
    for (std::size_t i = 0; i < plan.wavelengths_.size(); ++i) {
        const double w = plan.wavelengths_[i];
        if (w < axis_low_nm - axis_tolerance_nm || w > axis_high_nm + axis_tolerance_nm) {
            throw ConfigError("scan", "wavelength " + std::to_string(w) + " nm outside 2900-3600 nm");
        }
        if (i > 0 && !(w > plan.wavelengths_[i - 1])) {
            throw ConfigError("scan", "wavelengths must be strictly increasing");
        }
    }
    if (plan.wavelengths_.empty()) throw ConfigError("scan", "empty wavelength axis");
    return plan;
}

}  // namespace hyperspec
