#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hyperspec {

enum class Site : std::uint8_t { pixel = 0, reference_pre = 1, reference_post = 2 };

struct ScanPoint {
    Site site = Site::pixel;
    int ix = 0;
    int iy = 0;

    friend bool operator==(const ScanPoint&, const ScanPoint&) = default;
    friend auto operator<=>(const ScanPoint&, const ScanPoint&) = default;
};

struct ScanPlanConfig {
    double x_extent_um = 775.0;
    double y_extent_um = 775.0;
    double step_um = 25.0;
    // explicit axis; when empty the axis is generated from start/stop/step
    std::vector<double> wavelengths_nm;
    double wavelength_start_nm = 2900.0;
    double wavelength_stop_nm = 3600.0;
    double wavelength_step_nm = 50.0;
    double dwell_s = 2.0;
    int reference_points_per_plane = 4;  // windows in each of the pre and post batches
};

/// One acquisition in the scan timeline. Times are on a single clock that
/// starts at the first window of the first plane.
struct ScanStep {
    std::size_t plane = 0;
    ScanPoint point;
    std::size_t batch_index = 0;  // position inside a reference batch, 0 for pixels
    double t_start_s = 0.0;
    double t_mid_s = 0.0;
};

class ScanPlan {
public:
    ScanPlan() = default;

    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }
    double step_um() const noexcept { return step_um_; }
    double x_extent_um() const noexcept { return x_extent_um_; }
    double y_extent_um() const noexcept { return y_extent_um_; }
    const std::vector<double>& wavelengths_nm() const noexcept { return wavelengths_; }
    std::size_t planes() const noexcept { return wavelengths_.size(); }
    double dwell_s() const noexcept { return dwell_s_; }
    int reference_points_per_plane() const noexcept { return refs_; }

    std::size_t pixels_per_plane() const noexcept { return static_cast<std::size_t>(nx_) * ny_; }
    double pixel_dwell_per_plane_s() const noexcept { return pixels_per_plane() * dwell_s_; }
    double plane_duration_s() const noexcept { return (pixels_per_plane() + 2.0 * refs_) * dwell_s_; }

    /// Serpentine raster: even rows left to right, odd rows right to left.
    std::vector<ScanPoint> pixel_order() const;

    /// Acquisition order per plane: pre-reference batch, pixels, post-reference batch.
    std::vector<ScanStep> timeline() const;

    friend ScanPlan build_scan_plan(const ScanPlanConfig& cfg);

private:
    int nx_ = 0;
    int ny_ = 0;
    double step_um_ = 0.0;
    double x_extent_um_ = 0.0;
    double y_extent_um_ = 0.0;
    std::vector<double> wavelengths_;
    double dwell_s_ = 0.0;
    int refs_ = 0;
};

/// Throws ConfigError for a step larger than an extent, a non-increasing
/// axis, or wavelengths outside 2900-3600 nm.
ScanPlan build_scan_plan(const ScanPlanConfig& cfg);

}  // namespace hyperspec
