#include <immintrin.h>

#include <cassert>

#include "ktopo/simd/kernels.hpp"

namespace ktopo::simd::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  const std::size_t n = a.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i + 4), _mm256_loadu_pd(b.data() + i + 4),
                           acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  const std::size_t n = x.size();
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(x.data() + i), _mm256_loadu_pd(y.data() + i));
    _mm256_storeu_pd(y.data() + i, r);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void imls_accumulate(const ImlsBlock& block, const double* x, ImlsSums& sums) {
  const __m256d qx = _mm256_set1_pd(x[0]);
  const __m256d qy = _mm256_set1_pd(x[1]);
  const __m256d qz = _mm256_set1_pd(x[2]);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d minus8 = _mm256_set1_pd(-8.0);
  __m256d sw = zero, swd = zero;
  __m256d swn0 = zero, swn1 = zero, swn2 = zero;
  __m256d sdw0 = zero, sdw1 = zero, sdw2 = zero;
  __m256d sdd0 = zero, sdd1 = zero, sdd2 = zero;
  __m256d count = zero;

  std::size_t k = 0;
  for (; k + 4 <= block.count; k += 4) {
    const __m256d dx = _mm256_sub_pd(qx, _mm256_loadu_pd(block.px + k));
    const __m256d dy = _mm256_sub_pd(qy, _mm256_loadu_pd(block.py + k));
    const __m256d dz = _mm256_sub_pd(qz, _mm256_loadu_pd(block.pz + k));
    const __m256d ih2 = _mm256_loadu_pd(block.inv_h2 + k);
    __m256d r2 = _mm256_mul_pd(dx, dx);
    r2 = _mm256_fmadd_pd(dy, dy, r2);
    r2 = _mm256_fmadd_pd(dz, dz, r2);
    const __m256d q = _mm256_mul_pd(r2, ih2);
    const __m256d inside = _mm256_cmp_pd(q, one, _CMP_LT_OQ);
    // Outside the support s is clamped to zero, so every term vanishes.
    const __m256d s = _mm256_max_pd(_mm256_sub_pd(one, q), zero);
    const __m256d s3 = _mm256_mul_pd(_mm256_mul_pd(s, s), s);
    const __m256d w = _mm256_mul_pd(s3, s);
    const __m256d nx = _mm256_loadu_pd(block.nx + k);
    const __m256d ny = _mm256_loadu_pd(block.ny + k);
    const __m256d nz = _mm256_loadu_pd(block.nz + k);
    __m256d dist = _mm256_mul_pd(nx, dx);
    dist = _mm256_fmadd_pd(ny, dy, dist);
    dist = _mm256_fmadd_pd(nz, dz, dist);
    const __m256d g = _mm256_mul_pd(_mm256_mul_pd(minus8, s3), ih2);
    const __m256d gd = _mm256_mul_pd(dist, g);
    sw = _mm256_add_pd(sw, w);
    swd = _mm256_fmadd_pd(w, dist, swd);
    swn0 = _mm256_fmadd_pd(w, nx, swn0);
    swn1 = _mm256_fmadd_pd(w, ny, swn1);
    swn2 = _mm256_fmadd_pd(w, nz, swn2);
    sdw0 = _mm256_fmadd_pd(g, dx, sdw0);
    sdw1 = _mm256_fmadd_pd(g, dy, sdw1);
    sdw2 = _mm256_fmadd_pd(g, dz, sdw2);
    sdd0 = _mm256_fmadd_pd(gd, dx, sdd0);
    sdd1 = _mm256_fmadd_pd(gd, dy, sdd1);
    sdd2 = _mm256_fmadd_pd(gd, dz, sdd2);
    count = _mm256_add_pd(count, _mm256_and_pd(inside, one));
  }
  sums.w += hsum(sw);
  sums.w_dist += hsum(swd);
  sums.w_n[0] += hsum(swn0);
  sums.w_n[1] += hsum(swn1);
  sums.w_n[2] += hsum(swn2);
  sums.dw[0] += hsum(sdw0);
  sums.dw[1] += hsum(sdw1);
  sums.dw[2] += hsum(sdw2);
  sums.dist_dw[0] += hsum(sdd0);
  sums.dist_dw[1] += hsum(sdd1);
  sums.dist_dw[2] += hsum(sdd2);
  sums.support += static_cast<int>(hsum(count));

  if (k < block.count) {
    ImlsBlock tail = block;
    tail.px += k;
    tail.py += k;
    tail.pz += k;
    tail.nx += k;
    tail.ny += k;
    tail.nz += k;
    tail.inv_h2 += k;
    tail.count = block.count - k;
    scalar::imls_accumulate(tail, x, sums);
  }
}

}  // namespace ktopo::simd::avx2
