#include "hyperspec/calibration.hpp"

#include "hyperspec/csv.hpp"
#include "hyperspec/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace hyperspec {

void TransmissionSpectrum::validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (!std::isfinite(p.transmission) || p.transmission < 0.0) {
            throw DataError("bad_transmission", "non-finite or negative transmission at point " + std::to_string(i), i);
        }
        if (i > 0 && !(p.wavelength_nm > points[i - 1].wavelength_nm)) {
            throw DataError("unsorted", "wavelengths must strictly increase (point " + std::to_string(i) + ")", i);
        }
    }
}

std::optional<double> transmission(double sample_counts, double reference_counts) {
    if (!(reference_counts > 0.0)) return std::nullopt;
    return sample_counts / reference_counts;
}

double idler_wavelength(double signal_nm, double pump_nm) {
    if (!(pump_nm > 0.0) || !(signal_nm > pump_nm)) {
        throw DataError("domain", "signal wavelength must exceed the pump wavelength");
    }
    return 1.0 / (1.0 / pump_nm - 1.0 / signal_nm);
}

double signal_wavelength(double idler_nm, double pump_nm) {
    if (!(pump_nm > 0.0) || !(idler_nm > pump_nm)) {
        throw DataError("domain", "idler wavelength must exceed the pump wavelength");
    }
    return 1.0 / (1.0 / pump_nm - 1.0 / idler_nm);
}

double upconverted_wavelength(double input_nm, double pump_nm) {
    if (!(input_nm > 0.0) || !(pump_nm > 0.0)) throw DataError("domain", "wavelengths must be positive");
    return input_nm * pump_nm / (input_nm + pump_nm);
}

void CalibrationModel::validate() const {
    if (!(a > 0.0)) throw ConfigError("calibration", "a must be positive");
    if (!(R > 0.0)) throw ConfigError("calibration", "R must be positive");
    if (!std::isfinite(b)) throw ConfigError("calibration", "b must be finite");
}

AbsorptionCurve::AbsorptionCurve(std::vector<double> wavelengths_nm, std::vector<double> optical_depth)
    : wavelengths_(std::move(wavelengths_nm)), depth_(std::move(optical_depth)) {
    if (wavelengths_.size() != depth_.size() || wavelengths_.size() < 2) {
        throw DataError("bad_curve", "absorption curve needs at least two matching points");
    }
    for (std::size_t i = 0; i < wavelengths_.size(); ++i) {
        if (!(depth_[i] >= 0.0) || !std::isfinite(depth_[i])) {
            throw DataError("bad_curve", "optical depth must be finite and non-negative", i);
        }
        if (i > 0 && !(wavelengths_[i] > wavelengths_[i - 1])) {
            throw DataError("unsorted", "absorption curve wavelengths must strictly increase", i);
        }
    }
}

AbsorptionCurve AbsorptionCurve::from_ftir(const TransmissionSpectrum& ftir, double floor) {
    ftir.validate();
    std::vector<double> w, d;
    w.reserve(ftir.points.size());
    d.reserve(ftir.points.size());
    for (const auto& p : ftir.points) {
        w.push_back(p.wavelength_nm);
        d.push_back(-std::log(std::clamp(p.transmission, floor, 1.0)));
    }
    return {std::move(w), std::move(d)};
}

double AbsorptionCurve::at_clamped(double wavelength_nm) const noexcept {
    if (wavelength_nm <= wavelengths_.front()) return depth_.front();
    if (wavelength_nm >= wavelengths_.back()) return depth_.back();
    const auto hi = static_cast<std::size_t>(
        std::upper_bound(wavelengths_.begin(), wavelengths_.end(), wavelength_nm) - wavelengths_.begin());
    const std::size_t lo = hi - 1;
    const double f = (wavelength_nm - wavelengths_[lo]) / (wavelengths_[hi] - wavelengths_[lo]);
    return depth_[lo] + f * (depth_[hi] - depth_[lo]);
}

double AbsorptionCurve::at(double wavelength_nm) const {
    if (!contains(wavelength_nm)) {
        throw DataError("extrapolation", "wavelength " + format_number(wavelength_nm) + " nm outside absorption curve [" +
                                             format_number(min_nm()) + ", " + format_number(max_nm()) + "]");
    }
    return at_clamped(wavelength_nm);
}

AbsorptionCurve AbsorptionCurve::scaled(double factor) const {
    auto d = depth_;
    for (auto& v : d) v *= factor;
    return {wavelengths_, std::move(d)};
}

double absorptance_model(double wavelength_nm, const CalibrationModel& model, const AbsorptionCurve& curve) {
    const double single_pass = 1.0 - std::exp(-curve.at(model.map(wavelength_nm)));
    return 1.0 - std::pow(1.0 - single_pass, model.R);
}

double model_transmission(double wavelength_nm, const CalibrationModel& model, const AbsorptionCurve& curve) {
    return 1.0 - absorptance_model(wavelength_nm, model, curve);
}

namespace {

using Params = Eigen::Vector3d;

struct Problem {
    const AbsorptionCurve& curve;
    Eigen::VectorXd wavelengths;
    Eigen::VectorXd measured;

    // Edge-held interpolation keeps the cost defined while the iterate
    // wanders; the public model still refuses to extrapolate.
    Eigen::VectorXd residuals(const Params& p) const {
        Eigen::VectorXd r(wavelengths.size());
        for (Eigen::Index i = 0; i < wavelengths.size(); ++i) {
            const double depth = curve.at_clamped(p[0] * wavelengths[i] + p[1]);
            r[i] = std::exp(-p[2] * depth) - measured[i];
        }
        return r;
    }

    Eigen::MatrixX3d jacobian(const Params& p, double rel_step) const {
        Eigen::MatrixX3d J(wavelengths.size(), 3);
        for (int j = 0; j < 3; ++j) {
            const double h = rel_step * std::max(1.0, std::abs(p[j]));
            Params up = p, down = p;
            up[j] += h;
            down[j] -= h;
            J.col(j) = (residuals(up) - residuals(down)) / (2.0 * h);
        }
        return J;
    }
};

}  // namespace

CalibrationFit fit_calibration(const TransmissionSpectrum& measured, const TransmissionSpectrum& ftir,
                               const FitOptions& options) {
    measured.validate();
    const auto curve = AbsorptionCurve::from_ftir(ftir, options.ftir_floor);

    std::vector<double> wl, tm;
    for (const auto& p : measured.points) {
        if (curve.contains(p.wavelength_nm)) {
            wl.push_back(p.wavelength_nm);
            tm.push_back(p.transmission);
        }
    }
    if (wl.size() < options.min_overlap) {
        throw DataError("insufficient_overlap", "only " + std::to_string(wl.size()) +
                                                    " measured points overlap the FTIR range, need " +
                                                    std::to_string(options.min_overlap));
    }

    Problem problem{curve, Eigen::Map<Eigen::VectorXd>(wl.data(), static_cast<Eigen::Index>(wl.size())),
                    Eigen::Map<Eigen::VectorXd>(tm.data(), static_cast<Eigen::Index>(tm.size()))};

    Params p(1.0, 0.0, 1.0);
    Eigen::VectorXd r = problem.residuals(p);
    double cost = 0.5 * r.squaredNorm();
    double damping = -1.0;
    int iter = 0;
    bool converged = false;

    while (iter < options.max_iterations && !converged) {
        ++iter;
        const Eigen::MatrixX3d J = problem.jacobian(p, options.jacobian_step);
        const Eigen::Matrix3d JtJ = J.transpose() * J;
        const Eigen::Vector3d g = J.transpose() * r;
        if (damping < 0.0) damping = 1e-3 * JtJ.diagonal().maxCoeff();
        if (g.lpNorm<Eigen::Infinity>() == 0.0) {
            converged = true;
            break;
        }

        // inner loop: raise damping until a step reduces the cost
        bool accepted = false;
        while (!accepted) {
            Eigen::Matrix3d A = JtJ;
            A.diagonal() += damping * JtJ.diagonal().cwiseMax(1e-12);
            const Params step = A.ldlt().solve(-g);
            const Params trial = p + step;
            if (trial[0] > 0.0 && trial[2] > 0.0) {
                const Eigen::VectorXd rt = problem.residuals(trial);
                const double trial_cost = 0.5 * rt.squaredNorm();
                if (trial_cost < cost) {
                    const double rel_change = (cost - trial_cost) / std::max(cost, 1e-300);
                    p = trial;
                    r = rt;
                    cost = trial_cost;
                    damping = std::max(damping / 10.0, 1e-15);
                    accepted = true;
                    converged = rel_change < options.relative_tolerance || cost == 0.0;
                    continue;
                }
            }
            damping *= 10.0;
            if (damping > 1e20 || step.norm() <= 1e-15 * (p.norm() + 1e-15)) {
                // no descent direction left at this precision
                converged = true;
                break;
            }
        }
    }
    if (!converged) {
        throw DataError("no_convergence", "calibration fit did not converge: cost=" + format_number(cost) +
                                              " iterations=" + std::to_string(iter));
    }

    CalibrationFit fit;
    fit.model = {p[0], p[1], p[2]};
    fit.final_cost = cost;
    fit.iterations = iter;
    fit.points_used = wl.size();
    fit.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
    return fit;
}

TransmissionSpectrum apply_calibration(const CalibrationModel& model, TransmissionSpectrum spectrum) {
    model.validate();
    for (auto& p : spectrum.points) p.wavelength_nm = model.map(p.wavelength_nm);
    return spectrum;
}

TransmissionSpectrum read_ftir_csv(const std::string& path) {
    const auto t = read_csv(path);
    const auto cw = t.column("wavelength_nm"), ct = t.column("transmission");
    TransmissionSpectrum s;
    s.source = SpectrumSource::ftir;
    for (std::size_t r = 0; r < t.rows.size(); ++r) s.points.push_back({t.number(r, cw), t.number(r, ct), 0.0});
    s.validate();
    return s;
}

TransmissionSpectrum read_counts_spectrum_csv(const std::string& path) {
    const auto t = read_csv(path);
    const auto cw = t.column("wavelength_nm"), cs = t.column("counts_sample"), cr = t.column("counts_ref");
    TransmissionSpectrum s;
    s.source = SpectrumSource::single_photon;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double sample = t.number(r, cs), ref = t.number(r, cr);
        const auto tr = transmission(sample, ref);
        if (!tr) continue;
        // Poisson counting error of the ratio
        const double unc = *tr * std::sqrt(1.0 / std::max(sample, 1.0) + 1.0 / ref);
        s.points.push_back({t.number(r, cw), *tr, unc});
    }
    s.validate();
    return s;
}

void write_spectrum_csv(const std::string& path, const TransmissionSpectrum& spectrum) {
    CsvWriter w(path, {"wavelength_nm", "transmission", "uncertainty"});
    for (const auto& p : spectrum.points) {
        w.field(p.wavelength_nm).field(p.transmission).field(p.uncertainty);
        w.end_row();
    }
}

}  // namespace hyperspec
