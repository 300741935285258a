#include "backflash/leakage_audit.hpp"

#include <fmt/format.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

#include "backflash/error.hpp"
#include "backflash/kernels.hpp"

namespace backflash {

namespace {

constexpr double kPi = std::numbers::pi;

void check_range(WavelengthRange range) {
  if (!(range.max_nm > range.min_nm) || !std::isfinite(range.min_nm) || !std::isfinite(range.max_nm))
    throw DomainError("wavelength range must satisfy min < max");
}

struct Sampled {
  std::vector<double> grid, spectrum, eta;
};

// I and eta on the union grid, with the positivity checks shared by beta and
// the filtered leakage.
Sampled sample_pair(const SpectralCurve& spectrum, const SpectralCurve& eta, WavelengthRange range,
                    const SpectralCurve* extra = nullptr) {
  check_range(range);
  std::vector<const SpectralCurve*> curves{&spectrum, &eta};
  if (extra) curves.push_back(extra);
  Sampled s;
  s.grid = union_grid(curves, range);
  s.spectrum.resize(s.grid.size());
  s.eta.resize(s.grid.size());
  spectrum.evaluate(s.grid, s.spectrum);
  eta.evaluate(s.grid, s.eta);
  for (double e : s.eta)
    if (!(e > 0.0)) throw DomainError("detection efficiency must be > 0 over the range");
  if (!(kernels::trapezoid(s.grid, s.spectrum) > 0.0))
    throw DomainError("spectrum has zero integral over the range");
  return s;
}

template <class F>
double integrate(F f, double lo, double hi, const char* what) {
  double error = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-12, &error);
  if (!std::isfinite(value) || error > 1e-9 * std::abs(value))
    throw Error(std::string("quadrature did not converge: ") + what);
  return value;
}

}  // namespace

double brilliance(double diff_intensity_per_sr, double active_diameter_um) {
  if (!std::isfinite(active_diameter_um) || !(active_diameter_um > 0.0))
    throw DomainError("brilliance: active diameter must be > 0");
  const double radius = 0.5 * active_diameter_um;
  return diff_intensity_per_sr / (kPi * radius * radius);
}

double single_mode_coupling(double b, double wavelength_um) {
  if (!(b >= 0.0)) throw DomainError("single_mode_coupling: brilliance must be >= 0");
  if (!(wavelength_um > 0.0)) throw DomainError("single_mode_coupling: wavelength must be > 0");
  return b * wavelength_um * wavelength_um / 4.0;
}

ModeEtendue gaussian_mode_etendue(double w0_um, double theta_d_rad) {
  if (!(w0_um > 0.0) || !std::isfinite(w0_um)) throw DomainError("mode etendue: w0 must be > 0");
  if (!(theta_d_rad > 0.0 && theta_d_rad < 0.2))
    throw DomainError("mode etendue: theta_D must lie in (0, 0.2) rad");
  ModeEtendue e;
  e.radial_um2 = integrate(
      [w0_um](double r) { return std::exp(-2.0 * r * r / (w0_um * w0_um)) * r; }, 0.0,
      std::numeric_limits<double>::infinity(), "radial factor");
  // Small-angle solid-angle element 2 pi theta dtheta over the hemisphere.
  e.angular_sr = integrate(
      [theta_d_rad](double t) {
        return std::exp(-2.0 * t * t / (theta_d_rad * theta_d_rad)) * 2.0 * kPi * t;
      },
      0.0, 0.5 * kPi, "angular factor");
  e.quadrature = e.radial_um2 * e.angular_sr;
  e.closed_form = w0_um * w0_um * theta_d_rad * theta_d_rad * kPi * kPi / 4.0;
  return e;
}

double beta_correction(const SpectralCurve& spectrum, const SpectralCurve& eta, WavelengthRange range) {
  const Sampled s = sample_pair(spectrum, eta, range);
  std::vector<double> ratio(s.grid.size());
  for (std::size_t i = 0; i < ratio.size(); ++i) ratio[i] = s.spectrum[i] / s.eta[i];
  return kernels::trapezoid(s.grid, ratio) / kernels::trapezoid(s.grid, s.spectrum);
}

double corrected_leakage(double coupled_photons, double beta) {
  if (!(coupled_photons >= 0.0) || !(beta >= 0.0))
    throw DomainError("corrected_leakage: inputs must be >= 0");
  return beta * coupled_photons;
}

double filtered_leakage(const SpectralCurve& spectrum, const SpectralCurve& eta,
                        const SpectralCurve& filter, double corrected_leakage_photons,
                        WavelengthRange range) {
  if (filter.kind() == CurveKind::emission)
    throw DomainError("filtered_leakage: filter must be a transmission curve");
  const Sampled s = sample_pair(spectrum, eta, range, &filter);
  std::vector<double> full(s.grid.size()), passed(s.grid.size());
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    const double lam = s.grid[i];
    full[i] = s.spectrum[i] / s.eta[i] * lam * lam;
    passed[i] = full[i] * filter(lam);
  }
  return corrected_leakage_photons * kernels::trapezoid(s.grid, passed) / kernels::trapezoid(s.grid, full);
}

double mean_wavelength(const SpectralCurve& spectrum, WavelengthRange range) {
  check_range(range);
  const SpectralCurve* curves[] = {&spectrum};
  const std::vector<double> grid = union_grid(curves, range);
  std::vector<double> y(grid.size()), ly(grid.size());
  spectrum.evaluate(grid, y);
  for (std::size_t i = 0; i < grid.size(); ++i) ly[i] = grid[i] * y[i];
  const double norm = kernels::trapezoid(grid, y);
  if (!(norm > 0.0)) throw DomainError("mean_wavelength: spectrum has zero integral");
  return kernels::trapezoid(grid, ly) / norm;
}

LeakageBudget audit_leakage(const LeakageInputs& in) {
  if (!in.spectrum || !in.eta) throw DomainError("leakage audit needs a spectrum and an efficiency curve");
  LeakageBudget b;
  b.range = in.range;
  b.brilliance = in.published_brilliance;
  b.brilliance_first_principles = brilliance(in.diff_intensity_per_sr, in.active_diameter_um);
  b.wavelength_um = mean_wavelength(*in.spectrum, in.range) * 1e-3;
  const double lam2 = b.wavelength_um * b.wavelength_um;
  b.prefactor_closed_form_um2 = lam2 / 4.0;
  b.prefactor_literal_um2 = lam2 / (8.0 * kPi);
  b.coupled_photons = single_mode_coupling(b.brilliance, b.wavelength_um);
  b.coupled_photons_first_principles = single_mode_coupling(b.brilliance_first_principles, b.wavelength_um);
  b.coupled_photons_literal = b.brilliance * b.prefactor_literal_um2;
  b.beta = beta_correction(*in.spectrum, *in.eta, in.range);
  b.corrected_photons = corrected_leakage(b.coupled_photons, b.beta);
  b.filter_description = in.filter_description;
  if (in.filter)
    b.filtered_photons = filtered_leakage(*in.spectrum, *in.eta, *in.filter, b.corrected_photons, in.range);
  b.mode_waist_um = in.mode_waist_um;
  b.etendue = gaussian_mode_etendue(in.mode_waist_um, b.wavelength_um / (kPi * in.mode_waist_um));
  return b;
}

void write_audit_report(std::ostream& out, const LeakageBudget& b, const csv::Metadata& provenance) {
  for (const auto& [key, value] : provenance) out << "# " << key << " = " << value << '\n';
  out << "Back-flash leakage audit\n";
  out << fmt::format("wavelength range                        : {:.1f} - {:.1f} nm\n", b.range.min_nm,
                     b.range.max_nm);
  out << fmt::format("I-weighted mean wavelength              : {:.4f} um\n", b.wavelength_um);
  out << "\nBrilliance [photons/(sr um^2)]\n";
  out << fmt::format("  first principles (dn/dOmega / A_D)    : {:.4e}\n", b.brilliance_first_principles);
  out << fmt::format("  published value (used downstream)     : {:.4e}\n", b.brilliance);
  out << fmt::format("  ratio published / first principles    : {:.3f}\n",
                     b.brilliance / b.brilliance_first_principles);
  out << "\nSingle-mode coupling prefactor [um^2]\n";
  out << fmt::format("  closed form lambda^2/4 (used)         : {:.4e}\n", b.prefactor_closed_form_um2);
  out << fmt::format("  literal integral lambda^2/(8 pi)      : {:.4e}\n", b.prefactor_literal_um2);
  out << fmt::format("  ratio closed / literal                : {:.4f}\n",
                     b.prefactor_closed_form_um2 / b.prefactor_literal_um2);
  out << fmt::format("  quadrature check (w0 = {:.2f} um)       : radial {:.6e} um^2, angular {:.6e} sr\n",
                     b.mode_waist_um, b.etendue.radial_um2, b.etendue.angular_sr);
  out << fmt::format("                                          product {:.6e}, closed form {:.6e}\n",
                     b.etendue.quadrature, b.etendue.closed_form);
  out << "\nPhotons per breakdown into one spatial mode\n";
  out << fmt::format("  N_r (published B, lambda^2/4)         : {:.4e}\n", b.coupled_photons);
  out << fmt::format("  N_r (first-principles B, lambda^2/4)  : {:.4e}\n", b.coupled_photons_first_principles);
  out << fmt::format("  N_r (published B, lambda^2/(8 pi))    : {:.4e}\n", b.coupled_photons_literal);
  out << fmt::format("  beta = int(I/eta) / int(I)            : {:.4f}\n", b.beta);
  out << fmt::format("  N_r_corrected = beta * N_r            : {:.4e}\n", b.corrected_photons);
  out << fmt::format("  filter                                : {}\n", b.filter_description);
  if (b.filtered_photons)
    out << fmt::format("  N_r_corrected behind filter           : {:.4e}\n", *b.filtered_photons);
}

void write_audit_summary_csv(std::ostream& out, const LeakageBudget& b, const csv::Metadata& provenance) {
  for (const auto& [key, value] : provenance) out << "# " << key << " = " << value << '\n';
  out << "B,B_first_principles,wavelength_um,N_r,N_r_first_principles,N_r_literal_integral,beta,"
         "N_r_corrected,N_r_filtered,filter,range_min_nm,range_max_nm\n";
  out << fmt::format("{:.6e},{:.6e},{:.6f},{:.6e},{:.6e},{:.6e},{:.6f},{:.6e},{},{},{:.1f},{:.1f}\n", b.brilliance,
                     b.brilliance_first_principles, b.wavelength_um, b.coupled_photons,
                     b.coupled_photons_first_principles, b.coupled_photons_literal, b.beta,
                     b.corrected_photons,
                     b.filtered_photons ? fmt::format("{:.6e}", *b.filtered_photons) : std::string(""),
                     b.filter_description, b.range.min_nm, b.range.max_nm);
}

}  // namespace backflash
