#include <immintrin.h>

#include <cmath>

#include "dppo/simd/kernels.hpp"

namespace dppo::simd {
namespace {

// Horizontal sum with a fixed association order: (l0 + l2) + (l1 + l3).
inline double reduce(__m256d acc) {
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s));
}

// Tail elements past the last full 4-wide block.
inline double finish(__m256d acc, const double* a, const double* b, std::size_t kb,
                     std::size_t k) {
  double sum = reduce(acc);
  for (std::size_t t = kb; t < k; ++t) sum = std::fma(a[t], b[t], sum);
  return sum;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  const std::size_t nb = n & ~std::size_t{3};
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < nb; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  return finish(acc, a, b, nb, n);
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const std::size_t nb = n & ~std::size_t{3};
  const __m256d va = _mm256_set1_pd(alpha);
  for (std::size_t i = 0; i < nb; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (std::size_t i = nb; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

// Two rows of A against four rows of B: eight independent accumulators.
inline void block_2x4(const double* a0, const double* a1, const double* b, std::size_t k,
                      std::size_t kb, double* c0, double* c1) {
  const double* b0 = b;
  const double* b1 = b + k;
  const double* b2 = b + 2 * k;
  const double* b3 = b + 3 * k;
  __m256d s00 = _mm256_setzero_pd(), s01 = _mm256_setzero_pd();
  __m256d s02 = _mm256_setzero_pd(), s03 = _mm256_setzero_pd();
  __m256d s10 = _mm256_setzero_pd(), s11 = _mm256_setzero_pd();
  __m256d s12 = _mm256_setzero_pd(), s13 = _mm256_setzero_pd();
  for (std::size_t t = 0; t < kb; t += 4) {
    const __m256d x0 = _mm256_loadu_pd(a0 + t);
    const __m256d x1 = _mm256_loadu_pd(a1 + t);
    __m256d y = _mm256_loadu_pd(b0 + t);
    s00 = _mm256_fmadd_pd(x0, y, s00);
    s10 = _mm256_fmadd_pd(x1, y, s10);
    y = _mm256_loadu_pd(b1 + t);
    s01 = _mm256_fmadd_pd(x0, y, s01);
    s11 = _mm256_fmadd_pd(x1, y, s11);
    y = _mm256_loadu_pd(b2 + t);
    s02 = _mm256_fmadd_pd(x0, y, s02);
    s12 = _mm256_fmadd_pd(x1, y, s12);
    y = _mm256_loadu_pd(b3 + t);
    s03 = _mm256_fmadd_pd(x0, y, s03);
    s13 = _mm256_fmadd_pd(x1, y, s13);
  }
  c0[0] = finish(s00, a0, b0, kb, k);
  c0[1] = finish(s01, a0, b1, kb, k);
  c0[2] = finish(s02, a0, b2, kb, k);
  c0[3] = finish(s03, a0, b3, kb, k);
  c1[0] = finish(s10, a1, b0, kb, k);
  c1[1] = finish(s11, a1, b1, kb, k);
  c1[2] = finish(s12, a1, b2, kb, k);
  c1[3] = finish(s13, a1, b3, kb, k);
}

inline void block_1x4(const double* a0, const double* b, std::size_t k, std::size_t kb,
                      double* c0) {
  const double* b0 = b;
  const double* b1 = b + k;
  const double* b2 = b + 2 * k;
  const double* b3 = b + 3 * k;
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
  for (std::size_t t = 0; t < kb; t += 4) {
    const __m256d x0 = _mm256_loadu_pd(a0 + t);
    s0 = _mm256_fmadd_pd(x0, _mm256_loadu_pd(b0 + t), s0);
    s1 = _mm256_fmadd_pd(x0, _mm256_loadu_pd(b1 + t), s1);
    s2 = _mm256_fmadd_pd(x0, _mm256_loadu_pd(b2 + t), s2);
    s3 = _mm256_fmadd_pd(x0, _mm256_loadu_pd(b3 + t), s3);
  }
  c0[0] = finish(s0, a0, b0, kb, k);
  c0[1] = finish(s1, a0, b1, kb, k);
  c0[2] = finish(s2, a0, b2, kb, k);
  c0[3] = finish(s3, a0, b3, kb, k);
}

void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c) {
  const std::size_t kb = k & ~std::size_t{3};
  const std::size_t nb = n & ~std::size_t{3};
  std::size_t i = 0;
  for (; i + 1 < m; i += 2) {
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    double* c0 = c + i * n;
    double* c1 = c0 + n;
    std::size_t j = 0;
    for (; j < nb; j += 4) block_2x4(a0, a1, b + j * k, k, kb, c0 + j, c1 + j);
    for (; j < n; ++j) {
      c0[j] = dot_avx2(a0, b + j * k, k);
      c1[j] = dot_avx2(a1, b + j * k, k);
    }
  }
  if (i < m) {
    const double* a0 = a + i * k;
    double* c0 = c + i * n;
    std::size_t j = 0;
    for (; j < nb; j += 4) block_1x4(a0, b + j * k, k, kb, c0 + j);
    for (; j < n; ++j) c0[j] = dot_avx2(a0, b + j * k, k);
  }
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{Isa::kAvx2, &dot_avx2, &axpy_avx2, &gemm_nt_avx2};
  return &table;
}

}  // namespace dppo::simd
