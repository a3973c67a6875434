#include <cassert>

#include "ktopo/simd/kernels.hpp"

namespace ktopo::simd::scalar {

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void imls_accumulate(const ImlsBlock& block, const double* x, ImlsSums& sums) {
  for (std::size_t k = 0; k < block.count; ++k) {
    const double dx = x[0] - block.px[k];
    const double dy = x[1] - block.py[k];
    const double dz = x[2] - block.pz[k];
    const double q = (dx * dx + dy * dy + dz * dz) * block.inv_h2[k];
    if (q >= 1.0) continue;
    const double s = 1.0 - q;
    const double s3 = s * s * s;
    const double w = s3 * s;
    const double dist = block.nx[k] * dx + block.ny[k] * dy + block.nz[k] * dz;
    const double g = -8.0 * s3 * block.inv_h2[k];
    sums.w += w;
    sums.w_dist += w * dist;
    sums.w_n[0] += w * block.nx[k];
    sums.w_n[1] += w * block.ny[k];
    sums.w_n[2] += w * block.nz[k];
    sums.dw[0] += g * dx;
    sums.dw[1] += g * dy;
    sums.dw[2] += g * dz;
    sums.dist_dw[0] += dist * g * dx;
    sums.dist_dw[1] += dist * g * dy;
    sums.dist_dw[2] += dist * g * dz;
    ++sums.support;
  }
}

}  // namespace ktopo::simd::scalar
