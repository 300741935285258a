#pragma once

// Event-driven Monte Carlo of two Geiger-mode APDs that see each other's
// breakdown flashes, either directly through an aperture (facing) or through
// a grating acting as a tunable bandpass (spectrometer).
//
// Each detector has a homogeneous Poisson background (dark + ambient) thinned
// by a non-paralyzable dead time. Every breakdown emits a flash toward the
// other detector; each photon survives with probability
// coupling * eta_target(lambda) [* grating(lambda)] and triggers a breakdown
// at its arrival time if the target is live. Optical propagation delay is
// zero; detector 1's reported timestamps are shifted by the delay line.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "backflash/events.hpp"
#include "backflash/flash_emission.hpp"
#include "backflash/spectrum_analysis.hpp"

namespace backflash {

struct DetectorConfig {
  int id = 1;
  double dark_rate_cps = 500.0;
  double ambient_rate_cps = 0.0;
  double dead_time_ns = 1000.0;
  SpectralCurve efficiency;  // total detection efficiency, kind efficiency
  double active_diameter_um = 500.0;
  EmissionModel emission;

  double background_rate_cps() const { return dark_rate_cps + ambient_rate_cps; }
  void validate() const;
};

enum class OpticsMode { facing, spectrometer };

struct OpticsConfig {
  OpticsMode mode = OpticsMode::facing;
  double solid_angle_1to2_sr = 4.67e-4;
  double solid_angle_2to1_sr = 4.0 * 4.67e-4;
  double delay_line_ns = 63.0;
  double coupling_efficiency = 1.0;
  double grating_center_nm = 860.0;
  double grating_fwhm_nm = 3.3;

  void validate() const;
};

// Gaussian bandpass with unit peak: 0.5 at center +- fwhm/2.
double grating_transmission(double wavelength_nm, double center_nm, double fwhm_nm);

// Deterministic for a fixed seed. Output is merged in reported-time order.
std::vector<EventRecord> simulate(const std::array<DetectorConfig, 2>& detectors,
                                  const OpticsConfig& optics, double duration_s,
                                  std::uint64_t seed);

// Non-paralyzable dead-time loss: measured = rate / (1 + rate * dead_time).
double dead_time_corrected_rate(double nominal_rate_cps, double dead_time_ns);
// Inverse of the above.
double nominal_rate_for_measured(double measured_rate_cps, double dead_time_ns);

struct ScanSettings {
  double start_nm = 700.0;
  double stop_nm = 1000.0;
  double step_nm = 5.0;
  double integration_time_s = 50.0;
  double coincidence_window_ns = 70.0;

  std::vector<double> wavelengths() const;
  void validate() const;
};

// Independent per-point seed derived from (seed, index).
std::uint64_t scan_point_seed(std::uint64_t seed, std::size_t index);

// One spectrometer-mode simulation per grating setting. jobs > 1 runs points
// concurrently; the result does not depend on jobs.
std::vector<SpectralScanPoint> simulate_scan(const std::array<DetectorConfig, 2>& detectors,
                                             OpticsConfig optics, const ScanSettings& settings,
                                             std::uint64_t seed, unsigned jobs = 1);

}  // namespace backflash
