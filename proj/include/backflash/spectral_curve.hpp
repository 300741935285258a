#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace backflash {

// How a curve behaves outside its sampled wavelength range.
enum class CurveKind {
  emission,       // zero outside the samples
  efficiency,     // querying outside the samples is an error
  transmission,   // same as efficiency; values must lie in [0, 1]
};

struct WavelengthRange {
  double min_nm = 0.0;
  double max_nm = 0.0;

  double width() const { return max_nm - min_nm; }
  bool contains(double nm) const { return nm >= min_nm && nm <= max_nm; }
};

// Tabulated nonnegative function of wavelength with piecewise-linear
// interpolation. Wavelengths strictly increasing, at least two samples.
class SpectralCurve {
 public:
  SpectralCurve(std::vector<double> wavelengths_nm, std::vector<double> values,
                CurveKind kind = CurveKind::emission);

  static SpectralCurve constant(double value, WavelengthRange range, CurveKind kind);

  CurveKind kind() const { return kind_; }
  std::span<const double> wavelengths() const { return wavelengths_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return wavelengths_.size(); }
  WavelengthRange support() const { return {wavelengths_.front(), wavelengths_.back()}; }

  double operator()(double wavelength_nm) const;
  void evaluate(std::span<const double> wavelengths_nm, std::span<double> out) const;

  // Exact integral of the interpolant over [range] (clipped to the support
  // for emission curves).
  double integral(WavelengthRange range) const;
  double integral() const { return integral(support()); }

  SpectralCurve scaled(double factor) const;
  SpectralCurve with_kind(CurveKind kind) const;

 private:
  std::vector<double> wavelengths_;
  std::vector<double> values_;
  CurveKind kind_;
};

// Sorted union of the sample wavelengths of all curves that fall strictly
// inside range, plus the range endpoints.
std::vector<double> union_grid(std::span<const SpectralCurve* const> curves, WavelengthRange range);

// Two-column CSV `wavelength_nm,value`. A header line is required; lines
// starting with '#' are comments.
SpectralCurve read_spectral_curve(std::istream& in, CurveKind kind,
                                  const std::string& source = "<stream>");
SpectralCurve load_spectral_curve(const std::filesystem::path& path, CurveKind kind);
void write_spectral_curve(std::ostream& out, const SpectralCurve& curve);

}  // namespace backflash
