#pragma once

// Data-parallel inner loops used by the quadrature, fitting and histogramming
// code. Each kernel has a scalar reference implementation and, where the
// target supports it, a SIMD variant (AVX2+FMA on x86-64, NEON on AArch64).
// The variant is chosen once at runtime from CPUID; tests can force one.

#include <cstdint>
#include <span>
#include <string_view>

namespace backflash::kernels {

enum class Backend { scalar, avx2, neon };

// Backend actually used by the dispatching entry points below.
Backend active_backend();
// Best backend the running CPU supports.
Backend detect_backend();
bool backend_available(Backend b);
// Throws DomainError when b is not available on this CPU.
void force_backend(Backend b);
void reset_backend();
std::string_view backend_name(Backend b);

// sum_i a[i] * b[i]
double dot(std::span<const double> a, std::span<const double> b);
// sum_i w[i] * a[i] * b[i]
double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w);
// Trapezoid rule over a (not necessarily uniform) grid.
double trapezoid(std::span<const double> x, std::span<const double> y);
// out[i] = floor((v[i] - lo) / width) if it lies in [0, nbins), else -1.
void bin_indices(std::span<const double> v, double lo, double width, std::int64_t nbins,
                 std::span<std::int64_t> out);

namespace scalar {
double dot(std::span<const double> a, std::span<const double> b);
double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w);
double trapezoid(std::span<const double> x, std::span<const double> y);
void bin_indices(std::span<const double> v, double lo, double width, std::int64_t nbins,
                 std::span<std::int64_t> out);
}  // namespace scalar

namespace avx2 {
double dot(std::span<const double> a, std::span<const double> b);
double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w);
double trapezoid(std::span<const double> x, std::span<const double> y);
void bin_indices(std::span<const double> v, double lo, double width, std::int64_t nbins,
                 std::span<std::int64_t> out);
}  // namespace avx2

namespace neon {
double dot(std::span<const double> a, std::span<const double> b);
double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w);
double trapezoid(std::span<const double> x, std::span<const double> y);
void bin_indices(std::span<const double> v, double lo, double width, std::int64_t nbins,
                 std::span<std::int64_t> out);
}  // namespace neon

}  // namespace backflash::kernels
