#pragma once

// Expected reconstructed spectrum for a spectrometer scan, by direct
// quadrature: alpha * P(detector 2 fires | detector 1 breakdown).

#include <cmath>
#include <numbers>

#include "backflash/sim_engine.hpp"

namespace backflash::testing {

// int s(l) eta2(l) g(l - center) dl with Simpson on a 0.005 nm grid.
inline double passband_fraction(const DetectorConfig& emitter, const DetectorConfig& target,
                                const OpticsConfig& optics, double center_nm) {
  const SpectralCurve& s = emitter.emission.spectrum();
  const double sigma = optics.grating_fwhm_nm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  const double lo = std::max(center_nm - 12.0 * sigma, s.support().min_nm);
  const double hi = std::min(center_nm + 12.0 * sigma, s.support().max_nm);
  if (!(hi > lo)) return 0.0;
  const int n = 2 * static_cast<int>(std::ceil((hi - lo) / 0.01));
  const double h = (hi - lo) / n;
  auto f = [&](double l) {
    const double d = (l - center_nm) / sigma;
    return s(l) * target.efficiency(l) * std::exp(-0.5 * d * d);
  };
  double sum = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  return sum * h / 3.0;
}

// alpha * (1 - exp(-mu)) * live fraction of detector 2.
inline double expected_intensity(const std::array<DetectorConfig, 2>& det, const OpticsConfig& optics,
                                 double center_nm, double alpha) {
  const double mu = det[0].emission.differential_intensity_true() * optics.solid_angle_1to2_sr *
                    optics.coupling_efficiency * passband_fraction(det[0], det[1], optics, center_nm);
  const double r2 = dead_time_corrected_rate(det[1].background_rate_cps(), det[1].dead_time_ns);
  const double live = 1.0 - r2 * det[1].dead_time_ns * 1e-9;
  return alpha * -std::expm1(-mu) * live;
}

}  // namespace backflash::testing
