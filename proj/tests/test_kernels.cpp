#include <doctest.h>

#include <cstring>
#include <string>
#include <algorithm>
#include <random>
#include <vector>

#include "hwq/cutoff.hpp"
#include "hwq/kernels.hpp"

using namespace hwq;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("cutoff batch: scalar reference agrees with the pointwise cutoff") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-3, 2);
  std::vector<double> t(1001), v(t.size()), d1(t.size()), d2(t.size());
  for (auto& x : t) x = U(rng);
  t[0] = -1.0;
  t[1] = 0.0;
  kernels::scalar::cutoff_batch(t.data(), t.size(), 0.7, v.data(), d1.data(), d2.data());
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto c = cutoff_eval(0.7 * t[k]);
    CHECK(v[k] == c.v);
    CHECK(d1[k] == c.d1);
    CHECK(d2[k] == c.d2);
  }
}

TEST_CASE("cutoff batch: avx2 is bitwise equal to scalar") {
  if (!kernels::avx2_available()) return;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(-3, 2);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 17u, 1000u}) {
    std::vector<double> t(n);
    for (auto& x : t) x = U(rng);
    std::vector<double> v1(n), a1(n), b1(n), v2(n), a2(n), b2(n);
    kernels::scalar::cutoff_batch(t.data(), n, 1.3, v1.data(), a1.data(), b1.data());
    kernels::avx2::cutoff_batch(t.data(), n, 1.3, v2.data(), a2.data(), b2.data());
    CHECK(same_bits(v1, v2));
    CHECK(same_bits(a1, a2));
    CHECK(same_bits(b1, b2));
    // null outputs are skipped
    std::vector<double> v3(n);
    kernels::avx2::cutoff_batch(t.data(), n, 1.3, v3.data(), nullptr, nullptr);
    CHECK(same_bits(v1, v3));
  }
}

TEST_CASE("euler step: avx2 is bitwise equal to scalar") {
  if (!kernels::avx2_available()) return;
  std::mt19937_64 rng(13);
  std::normal_distribution<double> N;
  for (std::size_t lanes : {1u, 4u, 7u, 64u}) {
    const std::size_t m = 3;
    std::vector<double> x(m * lanes), noise(m * lanes), scratch(lanes);
    for (auto& v : x) v = 2.0 * N(rng);
    for (auto& v : noise) v = N(rng);
    std::vector<double> u(m * lanes);
    for (std::size_t r = 0; r < lanes; ++r) {
      u[r] = 0.2;
      u[lanes + r] = 0.5;
      u[2 * lanes + r] = 0.3;
    }
    const std::vector<double> mu{1, 2, 0.5}, gamma{0.5, 0, 3}, off{0.3, 0.6, 0.15},
        ns{0.1, 0.05, 0.2};
    auto x1 = x, x2 = x;
    kernels::EulerBatch b{m, lanes, x1.data(), u.data(), noise.data(), mu.data(), gamma.data(),
                          off.data(), ns.data(), 1e-2, scratch.data()};
    for (int s = 0; s < 50; ++s) kernels::scalar::euler_step(b);
    b.x = x2.data();
    for (int s = 0; s < 50; ++s) kernels::avx2::euler_step(b);
    CHECK(same_bits(x1, x2));
  }
}

TEST_CASE("euler step: scalar matches the drift formula") {
  const std::size_t m = 2, lanes = 3;
  std::vector<double> x{1, -2, 0.5, 1, -1, -3}, scratch(lanes), noise{0.1, 0.2, 0.3, -0.1, -0.2, -0.3};
  const std::vector<double> u{0.25, 0.25, 0.25, 0.75, 0.75, 0.75}, mu{1, 2}, gamma{0.5, 1}, off{0.5, 1}, ns{0.1, 0.2};
  const auto x0 = x;
  const double h = 0.01;
  kernels::EulerBatch b{m, lanes, x.data(), u.data(), noise.data(), mu.data(), gamma.data(),
                        off.data(), ns.data(), h, scratch.data()};
  kernels::scalar::euler_step(b);
  for (std::size_t r = 0; r < lanes; ++r) {
    const double s = std::max(x0[r] + x0[lanes + r], 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double xi = x0[i * lanes + r];
      const double drift = -off[i] - mu[i] * (xi - s * u[i * lanes + r]) - gamma[i] * s * u[i * lanes + r];
      CHECK(x[i * lanes + r] == doctest::Approx(xi + h * drift + ns[i] * noise[i * lanes + r]).epsilon(1e-14));
    }
  }
}

TEST_CASE("backend switching") {
  const auto before = kernels::active_backend();
  kernels::set_backend(kernels::Backend::Scalar);
  CHECK(kernels::active_backend() == kernels::Backend::Scalar);
  CHECK(std::string(kernels::backend_name(kernels::Backend::Avx2)) == "avx2");
  if (kernels::avx2_available()) {
    kernels::set_backend(kernels::Backend::Avx2);
    CHECK(kernels::active_backend() == kernels::Backend::Avx2);
  } else {
    CHECK_THROWS(kernels::set_backend(kernels::Backend::Avx2));
  }
  kernels::set_backend(before);
}
