#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops. Each kernel has a scalar reference in `scalar::` and, on x86-64
// builds, an AVX2/FMA variant in `avx2::`. The unqualified entry points dispatch at runtime.
// Variants agree to rounding (different summation order), not bitwise.

namespace ktopo::simd {

enum class Isa { Scalar, Avx2 };

bool avx2_compiled();
bool avx2_supported();   ///< compiled in and the CPU reports avx2+fma
Isa active_isa();
/// Overrides the runtime choice (tests, reproducibility). Requesting Avx2 when unsupported
/// throws std::runtime_error. The KTOPO_SIMD=scalar environment variable has the same effect
/// at startup.
void set_isa(Isa isa);
std::string_view isa_name(Isa isa);

/// Structure-of-arrays view over IMLS source points; inv_h2 = 1 / h_k^2.
struct ImlsBlock {
  const double* px;
  const double* py;
  const double* pz;
  const double* nx;
  const double* ny;
  const double* nz;
  const double* inv_h2;
  std::size_t count;
};

/// Partial sums of the IMLS quotient and its gradient, with s_k = max(0, 1 - |x-v_k|^2/h_k^2),
/// w_k = s_k^4, grad w_k = -8 s_k^3 (x - v_k) / h_k^2.
struct ImlsSums {
  double w = 0.0;          ///< sum w_k
  double w_dist = 0.0;     ///< sum w_k n_k.(x-v_k)
  double w_n[3] = {};      ///< sum w_k n_k
  double dw[3] = {};       ///< sum grad w_k
  double dist_dw[3] = {};  ///< sum n_k.(x-v_k) grad w_k
  int support = 0;         ///< number of sources with w_k > 0
};

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void imls_accumulate(const ImlsBlock& block, const double* x, ImlsSums& sums);

namespace scalar {
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void imls_accumulate(const ImlsBlock& block, const double* x, ImlsSums& sums);
}  // namespace scalar

namespace avx2 {
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void imls_accumulate(const ImlsBlock& block, const double* x, ImlsSums& sums);
}  // namespace avx2

}  // namespace ktopo::simd
