#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace hyperspec {

enum class SpectrumSource { single_photon, ftir };

struct SpectrumPoint {
    double wavelength_nm = 0.0;
    double transmission = 0.0;
    double uncertainty = 0.0;
};

struct TransmissionSpectrum {
    std::vector<SpectrumPoint> points;
    SpectrumSource source = SpectrumSource::single_photon;

    /// Throws DataError unless wavelengths strictly increase and
    /// transmissions are finite and non-negative.
    void validate() const;
};

/// Sample / reference. std::nullopt marks a point without a usable reference.
std::optional<double> transmission(double sample_counts, double reference_counts);

/// Energy conservation of the down-conversion: 1/idler = 1/pump - 1/signal.
/// Throws DataError "domain" unless signal_nm > pump_nm.
double idler_wavelength(double signal_nm, double pump_nm);
/// Inverse of idler_wavelength for the same pump.
double signal_wavelength(double idler_nm, double pump_nm);
/// Sum-frequency output: input·pump / (input + pump).
double upconverted_wavelength(double input_nm, double pump_nm);

/// Wavelength map λ' = aλ + b together with the thickness exponent R.
struct CalibrationModel {
    double a = 1.0;
    double b = 0.0;  // nm
    double R = 1.0;

    double map(double wavelength_nm) const noexcept { return a * wavelength_nm + b; }
    double unmap(double calibrated_nm) const noexcept { return (calibrated_nm - b) / a; }
    /// Throws ConfigError unless a > 0 and R > 0.
    void validate() const;
};

/// Optical depth α(λ)·x on a tabulated axis, linearly interpolated.
class AbsorptionCurve {
public:
    AbsorptionCurve() = default;
    AbsorptionCurve(std::vector<double> wavelengths_nm, std::vector<double> optical_depth);

    /// α·x = -ln(clamp(T, floor, 1)) for every FTIR point.
    static AbsorptionCurve from_ftir(const TransmissionSpectrum& ftir, double floor = 1e-6);

    double min_nm() const { return wavelengths_.front(); }
    double max_nm() const { return wavelengths_.back(); }
    bool contains(double wavelength_nm) const noexcept {
        return !wavelengths_.empty() && wavelength_nm >= wavelengths_.front() && wavelength_nm <= wavelengths_.back();
    }
    /// Throws DataError "extrapolation" outside the tabulated range.
    double at(double wavelength_nm) const;
    /// Same as at() but holds the edge value outside the range.
    double at_clamped(double wavelength_nm) const noexcept;
    /// Curve with every optical depth multiplied by `factor`.
    AbsorptionCurve scaled(double factor) const;

    const std::vector<double>& wavelengths_nm() const noexcept { return wavelengths_; }
    const std::vector<double>& optical_depth() const noexcept { return depth_; }

private:
    std::vector<double> wavelengths_;
    std::vector<double> depth_;
};

/// Absorptance of the calibrated model at nominal wavelength λ:
///   T_SP(λ') = 1 - exp(-α(λ')x),  T_C = 1 - (1 - T_SP)^R,  λ' = aλ + b
/// Throws DataError "extrapolation" when λ' leaves the curve.
double absorptance_model(double wavelength_nm, const CalibrationModel& model, const AbsorptionCurve& curve);
/// 1 - absorptance_model.
double model_transmission(double wavelength_nm, const CalibrationModel& model, const AbsorptionCurve& curve);

struct CalibrationFit {
    CalibrationModel model;
    double residual_rms = 0.0;
    double final_cost = 0.0;
    int iterations = 0;
    std::size_t points_used = 0;
};

struct FitOptions {
    double relative_tolerance = 1e-8;
    int max_iterations = 200;
    double jacobian_step = 1e-6;  // relative, central differences
    double ftir_floor = 1e-6;
    std::size_t min_overlap = 10;
};

/// Least-squares fit of (a, b, R) so that 1 - absorptance_model matches the
/// measured transmission, starting from (1, 0, 1). Levenberg-Marquardt with a
/// central-difference Jacobian. Throws DataError "insufficient_overlap" with
/// fewer than `min_overlap` measured points inside the FTIR range and
/// "no_convergence" (message carries cost and iteration count) when the
/// iteration limit is hit.
CalibrationFit fit_calibration(const TransmissionSpectrum& measured, const TransmissionSpectrum& ftir,
                               const FitOptions& options = {});

/// Replaces every wavelength λ by aλ + b.
TransmissionSpectrum apply_calibration(const CalibrationModel& model, TransmissionSpectrum spectrum);

/// FTIR file: wavelength_nm, transmission.
TransmissionSpectrum read_ftir_csv(const std::string& path);
/// Single-photon file: wavelength_nm, counts_sample, counts_ref. Points with
/// no reference counts are skipped.
TransmissionSpectrum read_counts_spectrum_csv(const std::string& path);
void write_spectrum_csv(const std::string& path, const TransmissionSpectrum& spectrum);

}  // namespace hyperspec
