#pragma once

#include "hyperspec/calibration.hpp"
#include "hyperspec/config.hpp"
#include "hyperspec/correlation.hpp"
#include "hyperspec/hypercube.hpp"
#include "hyperspec/source.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hyperspec {

namespace synthetic {

/// Optical depth of a polystyrene-like film: aromatic and aliphatic C-H
/// stretch bands on a weak baseline.
double polystyrene_like_depth(double wavelength_nm);
/// Second material: broad O-H band plus weaker aliphatic C-H bands.
double hydrated_like_depth(double wavelength_nm);

/// Tabulated transmission exp(-depth) on [lo, hi] with the given step.
TransmissionSpectrum ftir_spectrum(double (*depth)(double), double lo_nm = 2700.0, double hi_nm = 3800.0,
                                   double step_nm = 0.5);

struct CountsSpectrum {
    std::vector<double> wavelength_nm;
    std::vector<double> counts_sample;
    std::vector<double> counts_ref;

    TransmissionSpectrum transmission() const;
    void write_csv(const std::string& path) const;
};

/// Single-photon calibration scan of a sample whose true transmission is
/// model_transmission(λ, truth, curve) on the nominal axis `points` × `step`
/// starting at `start_nm`. `counts` <= 0 gives the noiseless expectation;
/// otherwise sample and reference counts are Poisson around `counts`.
CountsSpectrum calibration_scan(const CalibrationModel& truth, const AbsorptionCurve& curve, double counts,
                                std::uint64_t seed, double start_nm = 2900.0, double step_nm = 7.0,
                                std::size_t points = 100);

}  // namespace synthetic

struct NoiseExperiment {
    std::vector<WindowCounts> windows;
    NoiseStats stats;
    CorrelationFit fit;
    double fwhm_raw = 0.0;
    double fwhm_rescaled = 0.0;

    double raw_ratio() const { return stats.std_raw / stats.shot_noise_level; }
    double rescaled_ratio() const { return stats.std_rescaled / stats.shot_noise_level; }
};

/// `count` independent windows at transmission 1.
NoiseExperiment run_noise_experiment(const SourceConfig& cfg, std::size_t count, double wavelength_nm,
                                     std::uint64_t seed);

struct GatingExperiment {
    std::uint64_t cycles = 0;
    std::uint64_t total_darks = 0;
    std::uint64_t gated_darks = 0;
    double expected_fraction = 0.0;  // gate width / pulse period

    double fraction() const { return total_darks ? static_cast<double>(gated_darks) / total_darks : 0.0; }
};

/// Idler darks only (no pairs) streamed through encode/decode, trigger
/// segmentation and a fixed gate.
GatingExperiment run_dark_gating_experiment(std::uint64_t cycles, double dark_rate_hz, double gate_width_ns,
                                            std::uint64_t seed);

/// Largest relative error of drift_correct on noiseless counts whose level
/// drifts as 1 + slope·t on the plan's clock (pixel transmissions drawn from
/// `seed`). Zero up to rounding for linear drift.
double drift_exactness_error(const ScanPlan& plan, double slope_per_s, std::uint64_t seed);

struct DemoResult {
    CalibrationFit calibration;
    CalibrationModel calibration_truth;
    double max_region_error = 0.0;    // relative, over regions and planes
    double max_contrast_error = 0.0;  // relative, over regions
    double max_spectrum_rms = 0.0;    // absolute transmission
    double max_axis_error_nm = 0.0;
    double seconds = 0.0;
    std::string cube_dir;
    std::string report_path;
};

/// Full synthetic experiment: calibration against a polystyrene-like FTIR
/// reference, a drifting two-material phantom scan, cube assembly, contrast
/// and region spectra. Writes every artifact and report.json under out_dir.
/// The phantom geometry and wavelength planes come from cfg.demo.
DemoResult run_demo(const PipelineConfig& cfg, const std::string& out_dir, std::uint64_t seed,
                    bool include_metrics = true);

}  // namespace hyperspec
