#include <cmath>

#include "backflash/kernels.hpp"

namespace backflash::kernels::scalar {

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += w[i] * a[i] * b[i];
  return sum;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) sum += (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
  return 0.5 * sum;
}

void bin_indices(std::span<const double> v, double lo, double width, std::int64_t nbins,
                 std::span<std::int64_t> out) {
  const double upper = static_cast<double>(nbins);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double q = std::floor((v[i] - lo) / width);
    out[i] = (q >= 0.0 && q < upper) ? static_cast<std::int64_t>(q) : -1;
  }
}

}  // namespace backflash::kernels::scalar
