#pragma once

// Light emitted during one breakdown: Poisson photon count proportional to
// the solid angle (isotropic emission), emission times following the
// discharge pulse shape, wavelengths from the normalized emission spectrum.

#include <functional>
#include <random>
#include <vector>

#include "backflash/circuit_model.hpp"
#include "backflash/spectral_curve.hpp"

namespace backflash {

using Rng = std::mt19937_64;

// Inverse-CDF sampler for a piecewise-linear density. Precomputes the
// cumulative integral at the knots.
class SpectrumSampler {
 public:
  explicit SpectrumSampler(const SpectralCurve& spectrum);

  // u in [0, 1); throws DomainError otherwise.
  double inverse_cdf(double u) const;
  // Analytic CDF of the normalized density.
  double cdf(double wavelength_nm) const;
  const SpectralCurve& spectrum() const { return spectrum_; }

 private:
  SpectralCurve spectrum_;
  std::vector<double> cumulative_;  // unnormalized, cumulative_[0] == 0
  double total_ = 0.0;
};

double spectrum_cdf_inverse(const SpectralCurve& spectrum, double u);

struct FlashPhoton {
  double emission_time_ns;
  double wavelength_nm;
};

class EmissionModel {
 public:
  // differential_intensity_true: photons/sr per breakdown, already corrected
  // for detection efficiency. The spectrum is normalized to unit integral.
  EmissionModel(double differential_intensity_true, const SpectralCurve& spectrum,
                BreakdownProfile timing);

  double differential_intensity_true() const { return intensity_; }
  const SpectralCurve& spectrum() const { return normalized_; }
  const SpectrumSampler& sampler() const { return sampler_; }
  const BreakdownProfile& timing() const { return timing_; }

  // Spectrum-averaged efficiency <eta>: the fraction of emitted photons a
  // detector with efficiency curve eta registers.
  double detected_fraction(const SpectralCurve& eta) const;
  // int s(lambda) pass(lambda) dlambda by adaptive quadrature per spectrum
  // cell; pass must lie in [0, 1].
  double passing_fraction(const std::function<double(double)>& pass) const;

 private:
  double intensity_;
  SpectralCurve normalized_;
  SpectrumSampler sampler_;
  BreakdownProfile timing_;
};

// Appends the photons of one flash into out (cleared first).
void sample_flash(const EmissionModel& model, double breakdown_time_ns, double solid_angle_sr,
                  Rng& rng, std::vector<FlashPhoton>& out);
std::vector<FlashPhoton> sample_flash(const EmissionModel& model, double breakdown_time_ns,
                                      double solid_angle_sr, Rng& rng);

// Emission times of the photons of one flash that survive a wavelength
// dependent loss with mean pass probability pass_fraction (see
// EmissionModel::passing_fraction). Same distribution as sample_flash
// followed by independent thinning, without drawing wavelengths.
void sample_flash_times(const EmissionModel& model, double breakdown_time_ns, double solid_angle_sr,
                        double pass_fraction, Rng& rng, std::vector<double>& out);

}  // namespace backflash
