#pragma once

#include "hyperspec/calibration.hpp"
#include "hyperspec/error.hpp"
#include "hyperspec/scan.hpp"
#include "hyperspec/source.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hyperspec {

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Reference level of one plane, measured before and after the pixel scan.
struct ReferenceLevels {
    double pre = 0.0;
    double post = 0.0;
    double t_pre_s = 0.0;
    double t_post_s = 0.0;

    bool valid() const noexcept { return pre > 0.0 && post > 0.0; }

    /// Linear interpolation in time between the two batches.
    double at(double t_s) const noexcept {
        if (t_post_s == t_pre_s) return 0.5 * (pre + post);
        return pre + (post - pre) * (t_s - t_pre_s) / (t_post_s - t_pre_s);
    }
};

/// Divides each count by the reference level interpolated at its
/// acquisition time. Throws DataError "invalid_reference" for a
/// non-positive reference.
template <typename DerivedC, typename DerivedT>
Eigen::Array<typename DerivedC::Scalar, Eigen::Dynamic, 1> drift_correct(const Eigen::ArrayBase<DerivedC>& counts,
                                                                        const ReferenceLevels& ref,
                                                                        const Eigen::ArrayBase<DerivedT>& times_s) {
    if (!ref.valid()) throw DataError("invalid_reference", "reference level must be positive");
    Eigen::Array<typename DerivedC::Scalar, Eigen::Dynamic, 1> out(counts.size());
    for (Eigen::Index i = 0; i < counts.size(); ++i) out[i] = counts.derived()(i) / ref.at(times_s.derived()(i));
    return out;
}

struct HyperCube {
    ScanPlan plan;
    std::vector<double> wavelengths_nm;       // calibrated axis
    std::vector<Eigen::ArrayXXd> data;        // per plane, nx × ny transmission
    std::vector<Eigen::ArrayXXd> uncertainty; // per plane, counting error
    std::vector<BoolArray> valid;             // per plane mask, true = usable
    std::vector<ReferenceLevels> references;  // per plane
    CalibrationModel calibration;
    bool rescaled = false;

    std::size_t planes() const noexcept { return data.size(); }
    int nx() const noexcept { return plan.nx(); }
    int ny() const noexcept { return plan.ny(); }
    std::size_t masked_count(std::size_t plane) const;
};

/// Builds the cube from raw windows: optional correlation rescaling over each
/// wavelength plane, drift-corrected normalization against the plane's
/// reference batches, and the calibrated wavelength axis. Planes with an
/// unusable reference are masked. Throws DataError "assembly_gap" listing
/// every missing window.
HyperCube assemble_cube(const ScanPlan& plan, std::span<const RawWindow> windows, const CalibrationModel& calibration,
                        bool use_rescaling);
inline HyperCube assemble_cube(const RawDataset& raw, const CalibrationModel& calibration, bool use_rescaling) {
    return assemble_cube(raw.plan, raw.windows, calibration, use_rescaling);
}

/// Calibrates the wavelength axis in place of the current one.
HyperCube apply_calibration(const CalibrationModel& model, HyperCube cube);

enum class ContrastMode { difference, ratio };

struct ContrastImage {
    Eigen::ArrayXXd values;
    BoolArray valid;
    double lambda_a_nm = 0.0;
    double lambda_b_nm = 0.0;
    ContrastMode mode = ContrastMode::difference;
};

/// Plane closest to `wavelength_nm`, accepted within half the local plane
/// spacing. Throws DataError "lookup" otherwise.
std::size_t find_plane(const HyperCube& cube, double wavelength_nm);

/// difference: T(λa) - T(λb); ratio: T(λa) / T(λb), masked where T(λb) < 1e-3.
ContrastImage contrast_image(const HyperCube& cube, double lambda_a_nm, double lambda_b_nm,
                             ContrastMode mode = ContrastMode::difference);

struct Region {
    std::vector<std::pair<int, int>> pixels;

    /// Pixels with x0 <= ix < x1 and y0 <= iy < y1.
    static Region rect(int x0, int y0, int x1, int y1);
};

/// Per-plane mean over the unmasked pixels of `region`, with the standard
/// error of that mean (the pixel's counting error for a one-pixel region).
/// Planes without any usable pixel are omitted.
TransmissionSpectrum extract_spectrum(const HyperCube& cube, const Region& region);

void write_cube(const std::string& dir, const HyperCube& cube);
HyperCube read_cube(const std::string& dir);
void write_contrast_csv(const std::string& path, const ContrastImage& image);

ContrastMode parse_contrast_mode(const std::string& s);
const char* contrast_mode_name(ContrastMode m);

}  // namespace hyperspec
