#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "dppo/simd/kernels.hpp"

namespace dppo::simd {

#ifndef DPPO_WITH_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

bool cpu_supports_avx2() {
#if defined(DPPO_WITH_AVX2) && (defined(__x86_64__) || defined(__i386__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable* initial_table() {
  const char* env = std::getenv("DPPO_SIMD");
  const std::string choice = env ? env : "auto";
  if (choice == "scalar") return &scalar_kernels();
  if (choice == "avx2") {
    if (!cpu_supports_avx2() || avx2_kernels() == nullptr) {
      throw std::runtime_error("DPPO_SIMD=avx2 requested but AVX2 is unavailable");
    }
    return avx2_kernels();
  }
  if (cpu_supports_avx2() && avx2_kernels() != nullptr) return avx2_kernels();
  return &scalar_kernels();
}

const KernelTable*& active() {
  static const KernelTable* table = initial_table();
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active(); }

Isa active_isa() { return active()->isa; }

void select(Isa isa) {
  if (isa == Isa::kScalar) {
    active() = &scalar_kernels();
    return;
  }
  if (!cpu_supports_avx2() || avx2_kernels() == nullptr) {
    throw std::runtime_error("AVX2 kernels are not available on this build/CPU");
  }
  active() = avx2_kernels();
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

void transpose(std::size_t rows, std::size_t cols, const double* src, double* dst) {
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  kernels().gemm_nt(m, n, k, a, b, c);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  std::vector<double> bt(n * k);
  transpose(k, n, b, bt.data());
  kernels().gemm_nt(m, n, k, a, bt.data(), c);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  std::vector<double> at(m * k);
  std::vector<double> bt(n * k);
  transpose(k, m, a, at.data());
  transpose(k, n, b, bt.data());
  kernels().gemm_nt(m, n, k, at.data(), bt.data(), c);
}

}  // namespace dppo::simd
