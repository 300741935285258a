#include "backflash/flash_emission.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "backflash/error.hpp"

namespace backflash {

namespace {

SpectralCurve normalized(const SpectralCurve& s) {
  const double total = s.integral();
  if (!(total > 0.0)) throw DomainError("emission spectrum has zero integral");
  return s.with_kind(CurveKind::emission).scaled(1.0 / total);
}

}  // namespace

SpectrumSampler::SpectrumSampler(const SpectralCurve& spectrum) : spectrum_(spectrum) {
  const auto x = spectrum_.wavelengths();
  const auto f = spectrum_.values();
  cumulative_.resize(x.size());
  cumulative_[0] = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i)
    cumulative_[i] = cumulative_[i - 1] + 0.5 * (x[i] - x[i - 1]) * (f[i] + f[i - 1]);
  total_ = cumulative_.back();
  if (!(total_ > 0.0)) throw DomainError("spectrum sampler: zero integral");
}

double SpectrumSampler::inverse_cdf(double u) const {
  if (!(u >= 0.0 && u < 1.0)) throw DomainError("spectrum inverse CDF: u must lie in [0, 1)");
  const auto x = spectrum_.wavelengths();
  const auto f = spectrum_.values();
  const double target = u * total_;
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  std::size_t k = static_cast<std::size_t>(it - cumulative_.begin());
  k = std::clamp<std::size_t>(k, 1, x.size() - 1) - 1;
  const double h = x[k + 1] - x[k];
  const double r = target - cumulative_[k];
  const double slope = (f[k + 1] - f[k]) / h;
  // Solve f_k d + slope d^2 / 2 = r in the cancellation-free form.
  const double disc = std::max(f[k] * f[k] + 2.0 * slope * r, 0.0);
  const double denom = f[k] + std::sqrt(disc);
  const double d = denom > 0.0 ? 2.0 * r / denom : 0.0;
  return std::min(x[k] + std::clamp(d, 0.0, h), x.back());
}

double SpectrumSampler::cdf(double nm) const {
  const auto x = spectrum_.wavelengths();
  const auto f = spectrum_.values();
  if (nm <= x.front()) return 0.0;
  if (nm >= x.back()) return 1.0;
  const auto it = std::upper_bound(x.begin(), x.end(), nm);
  const std::size_t k = static_cast<std::size_t>(it - x.begin()) - 1;
  const double d = nm - x[k];
  const double slope = (f[k + 1] - f[k]) / (x[k + 1] - x[k]);
  return (cumulative_[k] + f[k] * d + 0.5 * slope * d * d) / total_;
}

double spectrum_cdf_inverse(const SpectralCurve& spectrum, double u) {
  return SpectrumSampler(spectrum).inverse_cdf(u);
}

EmissionModel::EmissionModel(double differential_intensity_true, const SpectralCurve& spectrum,
                             BreakdownProfile timing)
    : intensity_(differential_intensity_true),
      normalized_(normalized(spectrum)),
      sampler_(normalized_),
      timing_(timing) {
  if (!std::isfinite(intensity_) || intensity_ < 0.0)
    throw DomainError("emission model: differential intensity must be >= 0");
  timing_.validate_shape();
}

double EmissionModel::detected_fraction(const SpectralCurve& eta) const {
  // Product of two piecewise-linear curves on the union grid.
  const WavelengthRange s = normalized_.support();
  const SpectralCurve* curves[] = {&normalized_, &eta};
  const std::vector<double> grid = union_grid(curves, s);
  std::vector<double> y(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) y[i] = normalized_(grid[i]) * eta(grid[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    // Simpson on each cell is exact for the quadratic product.
    const double m = 0.5 * (grid[i] + grid[i + 1]);
    sum += (grid[i + 1] - grid[i]) / 6.0 * (y[i] + 4.0 * normalized_(m) * eta(m) + y[i + 1]);
  }
  return sum;
}

double EmissionModel::passing_fraction(const std::function<double(double)>& pass) const {
  const auto x = normalized_.wavelengths();
  auto f = [&](double wl) { return normalized_(wl) * pass(wl); };
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    sum += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, x[i], x[i + 1], 12, 1e-11);
  return std::clamp(sum, 0.0, 1.0);
}

namespace {

long flash_size(const EmissionModel& model, double solid_angle_sr, Rng& rng) {
  if (!(solid_angle_sr >= 0.0 && solid_angle_sr <= 4.0 * std::numbers::pi))
    throw DomainError("sample_flash: solid angle must lie in [0, 4 pi]");
  const double mean = model.differential_intensity_true() * solid_angle_sr;
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<long>(mean)(rng);
}

double draw_wavelength(const EmissionModel& model, Rng& rng) {
  const double u = std::min(std::uniform_real_distribution<double>(0.0, 1.0)(rng), std::nextafter(1.0, 0.0));
  return model.sampler().inverse_cdf(u);
}

double draw_time(const BreakdownProfile& p, double breakdown_time_ns, Rng& rng) {
  double t = breakdown_time_ns + p.onset_t0_ns + p.decay_tau_ns * std::exponential_distribution<double>(1.0)(rng);
  if (p.jitter_sigma_ns > 0.0) t += p.jitter_sigma_ns * std::normal_distribution<double>(0.0, 1.0)(rng);
  return t;
}

}  // namespace

void sample_flash(const EmissionModel& model, double breakdown_time_ns, double solid_angle_sr,
                  Rng& rng, std::vector<FlashPhoton>& out) {
  out.clear();
  const long n = flash_size(model, solid_angle_sr, rng);
  for (long i = 0; i < n; ++i) {
    const double t = draw_time(model.timing(), breakdown_time_ns, rng);
    out.push_back({t, draw_wavelength(model, rng)});
  }
}

void sample_flash_times(const EmissionModel& model, double breakdown_time_ns, double solid_angle_sr,
                        double pass_fraction, Rng& rng, std::vector<double>& out) {
  out.clear();
  if (!(solid_angle_sr >= 0.0 && solid_angle_sr <= 4.0 * std::numbers::pi))
    throw DomainError("sample_flash: solid angle must lie in [0, 4 pi]");
  if (!(pass_fraction >= 0.0 && pass_fraction <= 1.0))
    throw DomainError("sample_flash_times: pass fraction must lie in [0, 1]");
  const long n = flash_size(model, solid_angle_sr * pass_fraction, rng);
  for (long i = 0; i < n; ++i) out.push_back(draw_time(model.timing(), breakdown_time_ns, rng));
}

std::vector<FlashPhoton> sample_flash(const EmissionModel& model, double breakdown_time_ns,
                                      double solid_angle_sr, Rng& rng) {
  std::vector<FlashPhoton> out;
  sample_flash(model, breakdown_time_ns, solid_angle_sr, rng, out);
  return out;
}

}  // namespace backflash
