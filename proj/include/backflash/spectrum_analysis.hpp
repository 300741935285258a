#pragma once

// Spectrometer-mode reconstruction: per grating setting, the accidental-
// corrected coincidence count normalized to the emitting diode's count,
//   I(lambda) = alpha * (N_c - N_1 N_2 tau_c / T) / N_1.
// The result is the spectrum as measured, i.e. still weighted by the
// detector efficiency and the instrument kernel.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "backflash/events.hpp"
#include "backflash/spectral_curve.hpp"

namespace backflash {

inline constexpr double kDefaultSpectrumAlpha = 1e3;

struct SpectralScanPoint {
  double wavelength_nm = 0.0;
  std::int64_t coincidences = 0;  // N_c
  std::int64_t counts_1 = 0;      // N_1
  std::int64_t counts_2 = 0;      // N_2
  double integration_time_s = 0.0;
  double coincidence_window_ns = 0.0;

  void validate() const;
  double accidentals() const;  // N_1 N_2 tau_c / T
};

struct ScanPointDiagnostic {
  double wavelength_nm = 0.0;
  double raw_value = 0.0;  // before clamping
  double sigma = 0.0;      // Poisson error of N_c propagated through the formula
  bool clamped = false;    // raw value was negative, reported as 0
  bool excluded = false;   // N_1 == 0 or otherwise unusable
  std::string reason;
};

struct NormalizedSpectrum {
  SpectralCurve curve;  // excluded points are absent
  std::vector<ScanPointDiagnostic> points;
};

// Throws DomainError if fewer than two points survive.
NormalizedSpectrum normalize_spectrum(std::span<const SpectralScanPoint> scan,
                                      double alpha = kDefaultSpectrumAlpha);

enum class FeatureKind { maximum, edge };

struct SpectralFeature {
  FeatureKind kind;
  double wavelength_nm;
};

struct FeatureThresholds {
  double maximum_fraction = 0.10;    // of the global smoothed peak
  double edge_median_factor = 3.0;   // times the median |derivative|
};

// Local maxima of the 3-point smoothed curve and steepest local descents.
std::vector<SpectralFeature> locate_features(const SpectralCurve& curve,
                                             const FeatureThresholds& thresholds = {});

// Counts one scan point from an event stream: N_c pairs with detector 2 in
// [t_1, t_1 + tau_c] after undoing the detector-1 delay line.
SpectralScanPoint scan_point_from_events(std::span<const EventRecord> events, double wavelength_nm,
                                         double coincidence_window_ns, double integration_time_s,
                                         double delay_line_ns = 0.0);

// Scan file: `wavelength_nm,N_c,N_1,N_2,T_s,tau_c_ns`.
void write_scan(std::ostream& out, std::span<const SpectralScanPoint> scan,
                const csv::Metadata& metadata = {});
std::vector<SpectralScanPoint> read_scan(std::istream& in, const std::string& source = "<stream>",
                                         csv::Metadata* metadata = nullptr);
std::vector<SpectralScanPoint> load_scan(const std::filesystem::path& path,
                                         csv::Metadata* metadata = nullptr);

}  // namespace backflash
