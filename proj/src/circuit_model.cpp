#include "backflash/circuit_model.hpp"

#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <numbers>

#include "backflash/error.hpp"

namespace backflash {

void BreakdownProfile::validate_shape() const {
  if (!std::isfinite(decay_tau_ns) || !(decay_tau_ns > 0.0))
    throw InvalidProfile("breakdown profile: decay tau must be > 0");
  if (!std::isfinite(jitter_sigma_ns) || jitter_sigma_ns < 0.0)
    throw InvalidProfile("breakdown profile: jitter sigma must be >= 0");
  if (!std::isfinite(onset_t0_ns)) throw InvalidProfile("breakdown profile: onset must be finite");
}

void BreakdownProfile::validate() const {
  validate_shape();
  if (!std::isfinite(total_charge_pc) || !(total_charge_pc > 0.0))
    throw InvalidProfile("breakdown profile: total charge must be > 0");
  if (!std::isfinite(overvoltage_v) || !(overvoltage_v > 0.0))
    throw InvalidProfile("breakdown profile: overvoltage must be > 0");
}

namespace emg {

namespace {
constexpr double kSqrt2 = std::numbers::sqrt2;
}

double erfcx(double z) {
  if (z < 25.0) return std::exp(z * z) * std::erfc(z);
  // Asymptotic series; the next term is below 1e-12 relative at z = 25.
  const double iz2 = 1.0 / (z * z);
  const double series =
      1.0 + iz2 * (-0.5 + iz2 * (0.75 + iz2 * (-1.875 + iz2 * (6.5625 - iz2 * 29.53125))));
  return series / (z * std::sqrt(std::numbers::pi));
}

double density(double x, double tau, double sigma) {
  if (sigma == 0.0) return x >= 0.0 ? std::exp(-x / tau) / tau : 0.0;
  const double z = (sigma / tau - x / sigma) / kSqrt2;
  if (z < 0.0) {
    const double r = sigma / tau;
    return 0.5 / tau * std::exp(0.5 * r * r - x / tau) * std::erfc(z);
  }
  const double u = x / sigma;
  return 0.5 / tau * std::exp(-0.5 * u * u) * erfcx(z);
}

double cdf(double x, double tau, double sigma) {
  if (sigma == 0.0) return x >= 0.0 ? -std::expm1(-x / tau) : 0.0;
  if (x < 0.0) {
    // Both terms share the Gaussian factor; factoring it out avoids underflow.
    const double w = -x / (sigma * kSqrt2);
    const double z = w + sigma / (tau * kSqrt2);
    const double u = x / sigma;
    return 0.5 * std::exp(-0.5 * u * u) * (erfcx(w) - erfcx(z));
  }
  const double phi = 0.5 * std::erfc(-x / (sigma * kSqrt2));
  return phi - tau * density(x, tau, sigma);
}

double interval(double a, double b, double tau, double sigma) {
  if (!(b > a)) return 0.0;
  if (sigma == 0.0 || a < 0.0) return cdf(b, tau, sigma) - cdf(a, tau, sigma);
  // Both ends on the tail side: difference of upper Gaussian tails and densities.
  const double s = sigma * kSqrt2;
  const double gauss = 0.5 * (std::erfc(a / s) - std::erfc(b / s));
  return gauss - tau * (density(b, tau, sigma) - density(a, tau, sigma));
}

}  // namespace emg

double emg_density(double t_ns, const BreakdownProfile& p) {
  p.validate_shape();
  return emg::density(t_ns - p.onset_t0_ns, p.decay_tau_ns, p.jitter_sigma_ns);
}

double emg_cdf(double t_ns, const BreakdownProfile& p) {
  p.validate_shape();
  return emg::cdf(t_ns - p.onset_t0_ns, p.decay_tau_ns, p.jitter_sigma_ns);
}

double discharge_current(double t_ns, const BreakdownProfile& p) {
  if (!std::isfinite(p.total_charge_pc) || p.total_charge_pc < 0.0)
    throw InvalidProfile("breakdown profile: total charge must be >= 0");
  const double f = emg_density(t_ns, p);
  return p.total_charge_pc == 0.0 ? 0.0 : p.total_charge_pc * f;
}

PulsePeak discharge_peak(const BreakdownProfile& p) {
  p.validate_shape();
  const double lo = p.onset_t0_ns - 5.0 * p.jitter_sigma_ns;
  const double hi = p.onset_t0_ns + 5.0 * p.jitter_sigma_ns + p.decay_tau_ns;
  if (p.jitter_sigma_ns == 0.0) return {p.onset_t0_ns, discharge_current(p.onset_t0_ns, p)};
  const auto neg = [&](double t) { return -emg_density(t, p); };
  const auto [t, v] = boost::math::tools::brent_find_minima(neg, lo, hi, 30);
  return {t, p.total_charge_pc * -v};
}

double parasitic_capacitance(double charge_pc, double overvoltage_v) {
  if (!std::isfinite(overvoltage_v) || !(overvoltage_v > 0.0))
    throw DomainError("parasitic capacitance: overvoltage must be > 0");
  return charge_pc / overvoltage_v;
}

}  // namespace backflash
