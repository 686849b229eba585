#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "iohfuse/kernels/kernels.hpp"

using namespace iohfuse::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i] - b[i]) <= tol * (1.0 + std::abs(a[i])));
  }
}

std::vector<Isa> simd_isas() {
  std::vector<Isa> out;
  for (Isa i : {Isa::avx2, Isa::neon}) {
    if (isa_available(i)) out.push_back(i);
  }
  return out;
}

}  // namespace

TEST_CASE("scalar gemm matches the triple loop definition") {
  std::mt19937_64 rng(1);
  const std::size_t m = 5, n = 7, k = 3;
  auto a = random_vec(m * k, rng);
  auto b = random_vec(k * n, rng);
  std::vector<double> c(m * n, 0.5);
  auto ref = c;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) ref[i * n + j] += a[i * k + p] * b[p * n + j];
  scalar::gemm_nn(m, n, k, a.data(), b.data(), c.data());
  check_close(c, ref, 1e-14);
}

TEST_CASE("simd kernels agree with the scalar reference") {
  const auto isas = simd_isas();
  if (isas.empty()) {
    MESSAGE("no SIMD variant available on this CPU; scalar only");
    return;
  }
  std::mt19937_64 rng(7);
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 2}, {4, 8, 16}, {9, 17, 33}, {32, 32, 32}, {13, 6, 90}};
  for (Isa isa : isas) {
    const KernelTable& t = table_for(isa);
    CAPTURE(isa_name(isa));
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 31u, 100u}) {
      auto x = random_vec(n, rng);
      auto y = random_vec(n, rng);
      CHECK(t.dot(x.data(), y.data(), n) == doctest::Approx(scalar::dot(x.data(), y.data(), n)).epsilon(1e-12));
      CHECK(t.sum_sq_diff(x.data(), y.data(), n) ==
            doctest::Approx(scalar::sum_sq_diff(x.data(), y.data(), n)).epsilon(1e-12));
      auto y1 = y, y2 = y;
      t.axpy(0.3, x.data(), y1.data(), n);
      scalar::axpy(0.3, x.data(), y2.data(), n);
      check_close(y1, y2, 1e-14);
    }
    for (const auto& s : shapes) {
      const std::size_t m = s[0], n = s[1], k = s[2];
      CAPTURE(m);
      CAPTURE(n);
      CAPTURE(k);
      auto a = random_vec(m * k, rng);
      auto b = random_vec(k * n, rng);
      auto bt = random_vec(n * k, rng);
      auto at = random_vec(k * m, rng);
      auto c0 = random_vec(m * n, rng);

      auto c1 = c0, c2 = c0;
      t.gemm_nn(m, n, k, a.data(), b.data(), c1.data());
      scalar::gemm_nn(m, n, k, a.data(), b.data(), c2.data());
      check_close(c1, c2, 1e-12);

      c1 = c0;
      c2 = c0;
      t.gemm_nt(m, n, k, a.data(), bt.data(), c1.data());
      scalar::gemm_nt(m, n, k, a.data(), bt.data(), c2.data());
      check_close(c1, c2, 1e-12);

      c1 = c0;
      c2 = c0;
      t.gemm_tn(m, n, k, at.data(), b.data(), c1.data());
      scalar::gemm_tn(m, n, k, at.data(), b.data(), c2.data());
      check_close(c1, c2, 1e-12);
    }
  }
}

TEST_CASE("active isa can be overridden and restored") {
  const Isa before = active_isa();
  set_active_isa(Isa::scalar);
  CHECK(active_isa() == Isa::scalar);
  set_active_isa(before);
  CHECK(active_isa() == before);
  CHECK_THROWS(set_active_isa(isa_available(Isa::neon) ? Isa::avx2 : Isa::neon));
}
