#pragma once

// `[section] key = value` run configuration. Every default is the canonical
// facing-detector / spectrometer / audit setup, so an empty file is valid.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "backflash/circuit_model.hpp"
#include "backflash/leakage_audit.hpp"
#include "backflash/sim_engine.hpp"
#include "backflash/timing_analysis.hpp"

namespace backflash {

struct DetectorSettings {
  double dark_rate_cps = 500.0;
  double dead_time_ns = 1000.0;
  double active_diameter_um = 500.0;
  // Photoelectron generation probability table; efficiency is
  // detection_probability * p_gen(lambda).
  std::filesystem::path generation_file;
  double detection_probability = kDetectionProbability;
};

struct EmissionSettings {
  // Detected differential intensity (photons/sr). The simulator uses
  // differential_intensity_true when set, else detected / <eta_2>.
  double differential_intensity_detected = 39.0;
  std::optional<double> differential_intensity_true;
  std::filesystem::path spectrum_file;
  BreakdownProfile profile;
};

// Optics and background light that differ between the two setups.
struct ModeSettings {
  double ambient_rate_1_cps = 0.0;
  double ambient_rate_2_cps = 0.0;
  double solid_angle_1to2_sr = 0.0;
  double solid_angle_2to1_sr = 0.0;
  double delay_line_ns = 0.0;
  double coupling_efficiency = 1.0;
};

struct AnalysisSettings {
  double bin_width_ns = kDefaultBinWidthNs;
  TimeWindow histogram_range = kDefaultHistogramRange;
  TimeWindow net_window = kNetRateWindow;
  double peak_split_ns = kDefaultPeakSplitNs;
  double alpha = 1e3;
};

struct AuditSettings {
  double diff_intensity_per_sr = 39.0;
  double active_diameter_um = 500.0;
  double published_brilliance = kPublishedBrilliance;
  WavelengthRange range = kAuditRange;
  double mode_waist_um = 2.5;
  std::filesystem::path spectrum_file;
  std::filesystem::path generation_file;
  double detection_probability = kDetectionProbability;
  std::filesystem::path filter_file;  // empty: no filter
};

struct RunConfig {
  std::array<DetectorSettings, 2> detectors;
  EmissionSettings emission;
  ModeSettings facing;
  ModeSettings spectrometer;
  double grating_center_nm = 860.0;
  double grating_fwhm_nm = 3.3;
  ScanSettings scan;
  AnalysisSettings analysis;
  AuditSettings audit;
  double duration_s = 100.0;
  std::uint64_t seed = 1;

  static RunConfig defaults();

  // Loads the curves and builds validated simulator inputs.
  std::array<DetectorConfig, 2> build_detectors(OpticsMode mode) const;
  OpticsConfig build_optics(OpticsMode mode) const;
  LeakageInputs build_leakage_inputs() const;
  void validate() const;
};

SpectralCurve load_efficiency(const std::filesystem::path& generation_file, double detection_probability);

// Relative paths resolve against base_dir. Unknown sections or keys and
// malformed values throw ConfigError.
RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir,
                           const std::string& source = "<stream>");
RunConfig load_run_config(const std::filesystem::path& path);

std::string_view mode_name(OpticsMode mode);
OpticsMode parse_mode(std::string_view name);

}  // namespace backflash
