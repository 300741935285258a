#pragma once

// Back-flash leakage into a single spatial mode of a quantum channel.
//
// Canonical chain: brilliance B = (dn/dOmega) / A_D, photons coupled into one
// Gaussian mode N_r = B * lambda^2 / 4, efficiency correction
// beta = int(I / eta) / int(I), corrected leakage N_r^corr = beta * N_r.
//
// Two internal inconsistencies of the published chain are surfaced instead of
// resolved: the published brilliance is ten times the value implied by the
// measured intensity over the active area, and the literal mode-overlap
// integral evaluates to lambda^2 / (8 pi) rather than lambda^2 / 4.

#include <iosfwd>
#include <optional>
#include <string>

#include "backflash/csv.hpp"
#include "backflash/spectral_curve.hpp"

namespace backflash {

inline constexpr double kPublishedBrilliance = 2e-3;   // photons / (sr um^2)
inline constexpr double kDetectionProbability = 0.55;  // photoelectron detection at 20 V excess
inline constexpr WavelengthRange kAuditRange{700.0, 1050.0};

// photons/(sr um^2) from photons/sr over a circular area of the given diameter.
double brilliance(double diff_intensity_per_sr, double active_diameter_um);

// B * lambda^2 / 4 (lambda in um).
double single_mode_coupling(double brilliance, double wavelength_um);

struct ModeEtendue {
  double radial_um2 = 0.0;   // int_0^inf exp(-2 r^2 / w0^2) r dr
  double angular_sr = 0.0;   // int exp(-2 theta^2 / theta_D^2) 2 pi theta dtheta
  double quadrature = 0.0;   // product of the two
  double closed_form = 0.0;  // w0^2 theta_D^2 pi^2 / 4
};

// Requires w0 > 0 and 0 < theta_D < 0.2 rad. Throws DomainError, or Error if
// the adaptive quadrature misses its tolerance.
ModeEtendue gaussian_mode_etendue(double w0_um, double theta_d_rad);

// Trapezoid on the union grid of both curves restricted to range.
double beta_correction(const SpectralCurve& spectrum, const SpectralCurve& eta, WavelengthRange range);

double corrected_leakage(double coupled_photons, double beta);

// Leakage with a transmission curve T in front of the diode:
//   N_corr * int(I/eta T lambda^2) / int(I/eta lambda^2),
// so T == 1 reproduces N_corr and T == 0 gives 0.
double filtered_leakage(const SpectralCurve& spectrum, const SpectralCurve& eta,
                        const SpectralCurve& filter, double corrected_leakage_photons,
                        WavelengthRange range);

// int(lambda I) / int(I) over range, in nm.
double mean_wavelength(const SpectralCurve& spectrum, WavelengthRange range);

struct LeakageInputs {
  double diff_intensity_per_sr = 39.0;
  double active_diameter_um = 500.0;
  double published_brilliance = kPublishedBrilliance;
  WavelengthRange range = kAuditRange;
  double mode_waist_um = 2.5;             // for the etendue cross-check only
  std::optional<SpectralCurve> spectrum;  // measured I(lambda); required
  std::optional<SpectralCurve> eta;       // detection efficiency; required
  std::optional<SpectralCurve> filter;
  std::string filter_description = "none";
};

struct LeakageBudget {
  double brilliance = 0.0;                  // canonical (published) value
  double brilliance_first_principles = 0.0;
  double wavelength_um = 0.0;
  double prefactor_closed_form_um2 = 0.0;   // lambda^2 / 4
  double prefactor_literal_um2 = 0.0;       // lambda^2 / (8 pi)
  double coupled_photons = 0.0;             // N_r, canonical
  double coupled_photons_first_principles = 0.0;
  double coupled_photons_literal = 0.0;
  double beta = 1.0;
  double corrected_photons = 0.0;           // beta * N_r
  std::optional<double> filtered_photons;
  std::string filter_description = "none";
  WavelengthRange range = kAuditRange;
  ModeEtendue etendue;
  double mode_waist_um = 0.0;
};

// The coupling wavelength is the I-weighted mean over the range. Throws
// DomainError when the spectrum or eta is missing.
LeakageBudget audit_leakage(const LeakageInputs& inputs);

void write_audit_report(std::ostream& out, const LeakageBudget& budget, const csv::Metadata& provenance);
void write_audit_summary_csv(std::ostream& out, const LeakageBudget& budget,
                             const csv::Metadata& provenance);

}  // namespace backflash
