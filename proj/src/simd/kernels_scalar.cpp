#include "dppo/simd/kernels.hpp"

namespace dppo::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] = dot_scalar(arow, b + j * k, k);
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::kScalar, &dot_scalar, &axpy_scalar, &gemm_nt_scalar};
  return table;
}

}  // namespace dppo::simd
