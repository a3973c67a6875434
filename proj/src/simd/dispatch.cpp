#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "ktopo/simd/kernels.hpp"

namespace ktopo::simd {

#ifndef KTOPO_HAVE_AVX2
namespace avx2 {
// Not compiled for this target; avx2_supported() is false so these are never selected.
double dot(std::span<const double> a, std::span<const double> b) { return scalar::dot(a, b); }
void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  scalar::axpy(alpha, x, y);
}
void imls_accumulate(const ImlsBlock& block, const double* x, ImlsSums& sums) {
  scalar::imls_accumulate(block, x, sums);
}
}  // namespace avx2
#endif

bool avx2_compiled() {
#ifdef KTOPO_HAVE_AVX2
  return true;
#else
  return false;
#endif
}

bool avx2_supported() {
#if defined(KTOPO_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("KTOPO_SIMD"); env && std::string(env) == "scalar") {
    return Isa::Scalar;
  }
  return avx2_supported() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& isa_slot() {
  static std::atomic<Isa> slot{initial_isa()};
  return slot;
}

}  // namespace

Isa active_isa() { return isa_slot().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (isa == Isa::Avx2 && !avx2_supported()) {
    throw std::runtime_error("AVX2/FMA kernels are not available on this build or CPU");
  }
  isa_slot().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

double dot(std::span<const double> a, std::span<const double> b) {
  return active_isa() == Isa::Avx2 ? avx2::dot(a, b) : scalar::dot(a, b);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (active_isa() == Isa::Avx2) {
    avx2::axpy(alpha, x, y);
  } else {
    scalar::axpy(alpha, x, y);
  }
}

void imls_accumulate(const ImlsBlock& block, const double* x, ImlsSums& sums) {
  if (active_isa() == Isa::Avx2) {
    avx2::imls_accumulate(block, x, sums);
  } else {
    scalar::imls_accumulate(block, x, sums);
  }
}

}  // namespace ktopo::simd
