// AArch64 variants. NEON is baseline on AArch64 so no extra flags are needed.

#include <arm_neon.h>

#include <cmath>
#include <limits>

#include "backflash/kernels.hpp"

namespace backflash::kernels::neon {

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(&a[i]), vld1q_f64(&b[i]));
  double sum = vaddvq_f64(acc);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w) {
  const std::size_t n = a.size();
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    acc = vfmaq_f64(acc, vmulq_f64(vld1q_f64(&w[i]), vld1q_f64(&a[i])), vld1q_f64(&b[i]));
  double sum = vaddvq_f64(acc);
  for (; i < n; ++i) sum += w[i] * a[i] * b[i];
  return sum;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 3 <= n; i += 2) {
    const float64x2_t dx = vsubq_f64(vld1q_f64(&x[i + 1]), vld1q_f64(&x[i]));
    const float64x2_t sy = vaddq_f64(vld1q_f64(&y[i + 1]), vld1q_f64(&y[i]));
    acc = vfmaq_f64(acc, dx, sy);
  }
  double sum = vaddvq_f64(acc);
  for (; i + 1 < n; ++i) sum += (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
  return 0.5 * sum;
}

void bin_indices(std::span<const double> v, double lo, double width, std::int64_t nbins,
                 std::span<std::int64_t> out) {
  const std::size_t n = v.size();
  const float64x2_t vlo = vdupq_n_f64(lo);
  const float64x2_t vw = vdupq_n_f64(width);
  const float64x2_t vup = vdupq_n_f64(static_cast<double>(nbins));
  const float64x2_t vzero = vdupq_n_f64(0.0);
  const int64x2_t vneg = vdupq_n_s64(-1);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t q = vrndmq_f64(vdivq_f64(vsubq_f64(vld1q_f64(&v[i]), vlo), vw));
    const uint64x2_t ok = vandq_u64(vcgeq_f64(q, vzero), vcltq_f64(q, vup));
    const int64x2_t idx = vbslq_s64(ok, vcvtq_s64_f64(vbslq_f64(ok, q, vzero)), vneg);
    vst1q_s64(&out[i], idx);
  }
  if (i < n) scalar::bin_indices(v.subspan(i), lo, width, nbins, out.subspan(i));
}

}  // namespace backflash::kernels::neon
