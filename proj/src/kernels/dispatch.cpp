#include <atomic>

#include "backflash/error.hpp"
#include "backflash/kernels.hpp"

namespace backflash::kernels {

namespace {

std::atomic<int> forced{-1};

Backend resolve() {
  const int f = forced.load(std::memory_order_relaxed);
  if (f >= 0) return static_cast<Backend>(f);
  static const Backend detected = detect_backend();
  return detected;
}

}  // namespace

Backend detect_backend() {
#if defined(BACKFLASH_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Backend::avx2;
#elif defined(BACKFLASH_HAVE_NEON)
  return Backend::neon;
#endif
  return Backend::scalar;
}

bool backend_available(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
    case Backend::neon:
      return detect_backend() == b;
  }
  return false;
}

void force_backend(Backend b) {
  if (!backend_available(b))
    throw DomainError("kernel backend '" + std::string(backend_name(b)) + "' not available");
  forced.store(static_cast<int>(b), std::memory_order_relaxed);
}

void reset_backend() { forced.store(-1, std::memory_order_relaxed); }

Backend active_backend() { return resolve(); }

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

#if defined(BACKFLASH_HAVE_AVX2)
#define BACKFLASH_SIMD_CASES(call) \
  case Backend::avx2:              \
    return avx2::call;
#elif defined(BACKFLASH_HAVE_NEON)
#define BACKFLASH_SIMD_CASES(call) \
  case Backend::neon:              \
    return neon::call;
#else
#define BACKFLASH_SIMD_CASES(call)
#endif

double dot(std::span<const double> a, std::span<const double> b) {
  switch (resolve()) {
    BACKFLASH_SIMD_CASES(dot(a, b))
    default:
      return scalar::dot(a, b);
  }
}

double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w) {
  switch (resolve()) {
    BACKFLASH_SIMD_CASES(weighted_dot(a, b, w))
    default:
      return scalar::weighted_dot(a, b, w);
  }
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  switch (resolve()) {
    BACKFLASH_SIMD_CASES(trapezoid(x, y))
    default:
      return scalar::trapezoid(x, y);
  }
}

void bin_indices(std::span<const double> v, double lo, double width, std::int64_t nbins,
                 std::span<std::int64_t> out) {
  switch (resolve()) {
    BACKFLASH_SIMD_CASES(bin_indices(v, lo, width, nbins, out))
    default:
      return scalar::bin_indices(v, lo, width, nbins, out);
  }
}

#undef BACKFLASH_SIMD_CASES

}  // namespace backflash::kernels
