#include <cmath>
#include <array>
#include <random>
#include <vector>

#include "doctest.h"
#include "dppo/simd/kernels.hpp"

namespace simd = dppo::simd;

namespace {

std::vector<double> random_vec(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

// Naive triple loop used as the oracle for every kernel variant.
std::vector<double> naive_nt(std::size_t m, std::size_t n, std::size_t k, const std::vector<double>& a,
                             const std::vector<double>& b) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long double acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += static_cast<long double>(a[i * k + p]) * b[j * k + p];
      c[i * n + j] = static_cast<double>(acc);
    }
  return c;
}

void check_close(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(std::abs(got[i] - want[i]) <= tol * (1.0 + std::abs(want[i])));
  }
}

struct IsaGuard {
  simd::Isa saved = simd::active_isa();
  ~IsaGuard() { simd::select(saved); }
};

}  // namespace

TEST_CASE("scalar gemm_nt matches naive product") {
  using Dims = std::array<std::size_t, 3>;
  for (auto [m, n, k] : std::vector<Dims>{{1, 1, 1}, {3, 5, 7}, {17, 9, 33}, {64, 64, 16}}) {
    auto a = random_vec(m * k, 1);
    auto b = random_vec(n * k, 2);
    std::vector<double> c(m * n);
    simd::scalar_kernels().gemm_nt(m, n, k, a.data(), b.data(), c.data());
    check_close(c, naive_nt(m, n, k, a, b), 1e-13);
  }
}

TEST_CASE("avx2 kernels agree with scalar reference") {
  const simd::KernelTable* avx = simd::avx2_kernels();
  if (avx == nullptr || !simd::cpu_supports_avx2()) {
    MESSAGE("AVX2 variant unavailable; skipping");
    return;
  }
  const auto& sc = simd::scalar_kernels();
  for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 15u, 16u, 33u, 257u}) {
    auto a = random_vec(n, 3);
    auto b = random_vec(n, 4);
    const double ds = sc.dot(a.data(), b.data(), n);
    const double dv = avx->dot(a.data(), b.data(), n);
    CHECK(std::abs(ds - dv) <= 1e-12 * (1.0 + std::abs(ds)));
    auto ys = b;
    auto yv = b;
    sc.axpy(0.37, a.data(), ys.data(), n);
    avx->axpy(0.37, a.data(), yv.data(), n);
    check_close(yv, ys, 1e-14);
  }
  using Dims = std::array<std::size_t, 3>;
  for (auto [m, n, k] : std::vector<Dims>{{1, 1, 1}, {2, 4, 8}, {3, 5, 7}, {17, 9, 33}, {50, 64, 24}, {7, 129, 130}}) {
    auto a = random_vec(m * k, 5);
    auto b = random_vec(n * k, 6);
    std::vector<double> cs(m * n), cv(m * n);
    sc.gemm_nt(m, n, k, a.data(), b.data(), cs.data());
    avx->gemm_nt(m, n, k, a.data(), b.data(), cv.data());
    check_close(cv, cs, 1e-12);
  }
}

TEST_CASE("gemm_nt rows are independent of batch size") {
  const std::size_t n = 13, k = 29;
  auto a = random_vec(40 * k, 7);
  auto b = random_vec(n * k, 8);
  std::vector<double> full(40 * n);
  simd::gemm_nt(40, n, k, a.data(), b.data(), full.data());
  for (std::size_t i : {0u, 1u, 5u, 39u}) {
    std::vector<double> one(n);
    simd::gemm_nt(1, n, k, a.data() + i * k, b.data(), one.data());
    for (std::size_t j = 0; j < n; ++j) CHECK(one[j] == full[i * n + j]);
  }
}

TEST_CASE("gemm_nn and gemm_tn match naive products") {
  const std::size_t m = 6, n = 11, k = 9;
  auto a = random_vec(m * k, 9);
  auto b = random_vec(k * n, 10);
  std::vector<double> bt(n * k);
  simd::transpose(k, n, b.data(), bt.data());
  std::vector<double> c(m * n);
  simd::gemm_nn(m, n, k, a.data(), b.data(), c.data());
  check_close(c, naive_nt(m, n, k, a, bt), 1e-13);

  std::vector<double> at(k * m);
  simd::transpose(m, k, a.data(), at.data());
  simd::gemm_tn(m, n, k, at.data(), b.data(), c.data());
  check_close(c, naive_nt(m, n, k, a, bt), 1e-13);
}

TEST_CASE("select switches the active table") {
  IsaGuard guard;
  simd::select(simd::Isa::kScalar);
  CHECK(simd::active_isa() == simd::Isa::kScalar);
  CHECK(simd::isa_name(simd::Isa::kScalar) == "scalar");
  if (simd::avx2_kernels() == nullptr || !simd::cpu_supports_avx2()) {
    CHECK_THROWS(simd::select(simd::Isa::kAvx2));
  } else {
    simd::select(simd::Isa::kAvx2);
    CHECK(simd::active_isa() == simd::Isa::kAvx2);
  }
}
