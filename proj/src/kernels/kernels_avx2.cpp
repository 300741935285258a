// Compiled with -mavx2 -mfma; only reached after the CPUID check in dispatch.cpp.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "backflash/kernels.hpp"

namespace backflash::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(&a[i]), _mm256_loadu_pd(&b[i]), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(&a[i + 4]), _mm256_loadu_pd(&b[i + 4]), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(&a[i]), _mm256_loadu_pd(&b[i]), acc0);
  double sum = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w) {
  const std::size_t n = a.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d wa = _mm256_mul_pd(_mm256_loadu_pd(&w[i]), _mm256_loadu_pd(&a[i]));
    acc = _mm256_fmadd_pd(wa, _mm256_loadu_pd(&b[i]), acc);
  }
  double sum = hsum(acc);
  for (; i < n; ++i) sum += w[i] * a[i] * b[i];
  return sum;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 5 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(&x[i + 1]), _mm256_loadu_pd(&x[i]));
    const __m256d sy = _mm256_add_pd(_mm256_loadu_pd(&y[i + 1]), _mm256_loadu_pd(&y[i]));
    acc = _mm256_fmadd_pd(dx, sy, acc);
  }
  double sum = hsum(acc);
  for (; i + 1 < n; ++i) sum += (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
  return 0.5 * sum;
}

void bin_indices(std::span<const double> v, double lo, double width, std::int64_t nbins,
                 std::span<std::int64_t> out) {
  // The int32 conversion below needs every valid index to fit.
  if (nbins > std::numeric_limits<std::int32_t>::max()) {
    scalar::bin_indices(v, lo, width, nbins, out);
    return;
  }
  const std::size_t n = v.size();
  const __m256d vlo = _mm256_set1_pd(lo);
  const __m256d vw = _mm256_set1_pd(width);
  const __m256d vzero = _mm256_setzero_pd();
  const __m256d vup = _mm256_set1_pd(static_cast<double>(nbins));
  const __m256d vneg = _mm256_set1_pd(-1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d q = _mm256_floor_pd(_mm256_div_pd(_mm256_sub_pd(_mm256_loadu_pd(&v[i]), vlo), vw));
    const __m256d ok = _mm256_and_pd(_mm256_cmp_pd(q, vzero, _CMP_GE_OQ),
                                     _mm256_cmp_pd(q, vup, _CMP_LT_OQ));
    const __m256d sel = _mm256_blendv_pd(vneg, q, ok);
    const __m256i idx = _mm256_cvtepi32_epi64(_mm256_cvttpd_epi32(sel));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(&out[i]), idx);
  }
  if (i < n) scalar::bin_indices(v.subspan(i), lo, width, nbins, out.subspan(i));
}

}  // namespace backflash::kernels::avx2
