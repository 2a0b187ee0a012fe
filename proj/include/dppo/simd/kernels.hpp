#pragma once

// Dense linear-algebra kernels used by the autodiff layer.
//
// Every kernel has a portable scalar reference implementation. When the
// library is built with AVX2 support and the CPU reports AVX2+FMA, an
// intrinsics variant is selected at first use. The choice can be forced with
// the DPPO_SIMD environment variable ("scalar", "avx2", "auto") or select().
//
// All matrices are row-major and densely packed.

#include <cstddef>
#include <string_view>

namespace dppo::simd {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // C[m x n] = A[m x k] * B[n x k]^T
  //
  // Each output element is computed by the same instruction sequence
  // regardless of its position, so row i of C depends only on row i of A.
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
};

const KernelTable& scalar_kernels();
// nullptr when the build has no AVX2 variant.
const KernelTable* avx2_kernels();

bool cpu_supports_avx2();

// Currently active table.
const KernelTable& kernels();
Isa active_isa();
// Throws std::runtime_error if the requested ISA is unavailable.
void select(Isa isa);
std::string_view isa_name(Isa isa);

// Convenience wrappers on the active table.

// C[m x n] = A[m x k] * B[n x k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c);
// C[m x n] = A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c);
// C[m x n] = A[k x m]^T * B[k x n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c);

void transpose(std::size_t rows, std::size_t cols, const double* src, double* dst);

}  // namespace dppo::simd
