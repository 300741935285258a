#include "backflash/spectral_curve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "backflash/csv.hpp"
#include "backflash/error.hpp"
#include "backflash/kernels.hpp"

namespace backflash {

namespace {

const char* kind_name(CurveKind kind) {
  switch (kind) {
    case CurveKind::emission:
      return "emission";
    case CurveKind::efficiency:
      return "efficiency";
    case CurveKind::transmission:
      return "transmission";
  }
  return "curve";
}

}  // namespace

SpectralCurve::SpectralCurve(std::vector<double> wavelengths_nm, std::vector<double> values,
                             CurveKind kind)
    : wavelengths_(std::move(wavelengths_nm)), values_(std::move(values)), kind_(kind) {
  if (wavelengths_.size() != values_.size())
    throw DomainError("spectral curve: wavelength and value counts differ");
  if (wavelengths_.size() < 2) throw DomainError("spectral curve: at least 2 samples required");
  for (std::size_t i = 0; i < wavelengths_.size(); ++i) {
    if (!std::isfinite(wavelengths_[i]) || !std::isfinite(values_[i]))
      throw DomainError("spectral curve: non-finite sample");
    if (i > 0 && !(wavelengths_[i] > wavelengths_[i - 1]))
      throw DomainError("spectral curve: wavelengths must be strictly increasing");
    if (values_[i] < 0.0) throw DomainError("spectral curve: negative value");
    if (kind_ != CurveKind::emission && values_[i] > 1.0)
      throw DomainError(std::string(kind_name(kind_)) + " curve: value above 1");
  }
}

SpectralCurve SpectralCurve::constant(double value, WavelengthRange range, CurveKind kind) {
  return SpectralCurve({range.min_nm, range.max_nm}, {value, value}, kind);
}

double SpectralCurve::operator()(double nm) const {
  if (nm < wavelengths_.front() || nm > wavelengths_.back()) {
    if (kind_ == CurveKind::emission) return 0.0;
    throw DomainError(std::string(kind_name(kind_)) + " curve queried at " + std::to_string(nm) +
                      " nm, outside [" + std::to_string(wavelengths_.front()) + ", " +
                      std::to_string(wavelengths_.back()) + "] nm");
  }
  const auto it = std::upper_bound(wavelengths_.begin(), wavelengths_.end(), nm);
  if (it == wavelengths_.end()) return values_.back();
  const std::size_t hi = static_cast<std::size_t>(it - wavelengths_.begin());
  const std::size_t lo = hi - 1;
  const double f = (nm - wavelengths_[lo]) / (wavelengths_[hi] - wavelengths_[lo]);
  return values_[lo] + f * (values_[hi] - values_[lo]);
}

void SpectralCurve::evaluate(std::span<const double> nm, std::span<double> out) const {
  for (std::size_t i = 0; i < nm.size(); ++i) out[i] = (*this)(nm[i]);
}

double SpectralCurve::integral(WavelengthRange range) const {
  if (kind_ != CurveKind::emission) {
    (void)(*this)(range.min_nm);  // coverage check
    (void)(*this)(range.max_nm);
  }
  const double lo = std::max(range.min_nm, wavelengths_.front());
  const double hi = std::min(range.max_nm, wavelengths_.back());
  if (!(hi > lo)) return 0.0;
  const SpectralCurve* self = this;
  const std::vector<double> grid = union_grid(std::span(&self, 1), {lo, hi});
  std::vector<double> y(grid.size());
  evaluate(grid, y);
  return kernels::trapezoid(grid, y);
}

SpectralCurve SpectralCurve::scaled(double factor) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= factor;
  return SpectralCurve(wavelengths_, std::move(v), kind_);
}

SpectralCurve SpectralCurve::with_kind(CurveKind kind) const {
  return SpectralCurve(wavelengths_, values_, kind);
}

std::vector<double> union_grid(std::span<const SpectralCurve* const> curves, WavelengthRange range) {
  std::vector<double> grid{range.min_nm, range.max_nm};
  for (const SpectralCurve* c : curves)
    for (double w : c->wavelengths())
      if (w > range.min_nm && w < range.max_nm) grid.push_back(w);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

SpectralCurve read_spectral_curve(std::istream& in, CurveKind kind, const std::string& source) {
  csv::Reader reader(in, source, {"wavelength_nm", "value"});
  std::vector<double> wl, val;
  while (auto row = reader.next()) {
    const double w = reader.to_double((*row)[0], "wavelength_nm");
    const double v = reader.to_double((*row)[1], "value");
    if (!wl.empty() && !(w > wl.back())) reader.fail("wavelengths must be strictly increasing");
    if (v < 0.0) reader.fail("negative value");
    if (kind != CurveKind::emission && v > 1.0) reader.fail("value above 1");
    wl.push_back(w);
    val.push_back(v);
  }
  if (wl.size() < 2) reader.fail("at least 2 samples required");
  return SpectralCurve(std::move(wl), std::move(val), kind);
}

SpectralCurve load_spectral_curve(const std::filesystem::path& path, CurveKind kind) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return read_spectral_curve(in, kind, path.string());
}

void write_spectral_curve(std::ostream& out, const SpectralCurve& curve) {
  out << "wavelength_nm,value\n";
  for (std::size_t i = 0; i < curve.size(); ++i)
    out << csv::format_double(curve.wavelengths()[i]) << ',' << csv::format_double(curve.values()[i])
        << '\n';
}

}  // namespace backflash
