#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include "hwq/cutoff.hpp"

using namespace hwq;

namespace {

// Independent reference: the cutoff written out piece by piece, derivatives by hand.
double ref_psi(double t) {
  if (t <= -1.0) return -0.5;
  if (t >= 0.0) return t;
  return std::pow(t + 1.0, 3) - 0.5 * std::pow(t + 1.0, 4) - 0.5;
}
double ref_d1(double t) { return (t <= -1.0) ? 0.0 : (t >= 0.0 ? 1.0 : 3.0 * std::pow(t + 1.0, 2) - 2.0 * std::pow(t + 1.0, 3)); }
double ref_d2(double t) { return (t <= -1.0 || t >= 0.0) ? 0.0 : 6.0 * (t + 1.0) - 6.0 * std::pow(t + 1.0, 2); }

}  // namespace

TEST_CASE("cutoff values at the joints and beyond") {
  CHECK(psi(-2.0) == -0.5);
  CHECK(psi(-1.0) == -0.5);
  CHECK(psi(0.0) == 0.0);
  CHECK(psi(1.0) == 1.0);
  CHECK(psi(2.0) == 2.0);
  CHECK(psi_d1(-0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(psi(-0.5) == doctest::Approx(ref_psi(-0.5)).epsilon(1e-15));
}

TEST_CASE("cutoff matches the piecewise reference on a grid") {
  for (int k = -3000; k <= 2000; ++k) {
    const double t = k * 1e-3;
    CHECK(psi(t) == doctest::Approx(ref_psi(t)).epsilon(1e-13));
    CHECK(psi_d1(t) == doctest::Approx(ref_d1(t)).epsilon(1e-13));
    CHECK(psi_d2(t) == doctest::Approx(ref_d2(t)).epsilon(1e-13));
  }
}

TEST_CASE("cutoff is C2, convex, with bounded derivatives") {
  const double h = 1e-9;
  for (double j : {-1.0, 0.0}) {
    CHECK(std::fabs(psi(j + h) - psi(j - h)) < 1e-8);
    CHECK(std::fabs(psi_d1(j + h) - psi_d1(j - h)) < 1e-8);
    CHECK(std::fabs(psi_d2(j + h) - psi_d2(j - h)) < 1e-7);
  }
  double sup = 0.0;
  for (int k = 0; k <= 100000; ++k) {
    const double t = -1.5 + 2.0 * k / 100000.0;
    CHECK(psi_d2(t) >= 0.0);
    CHECK(psi_d1(t) >= 0.0);
    CHECK(psi_d1(t) <= 1.0);
    sup = std::max(sup, psi_d2(t));
  }
  CHECK(std::fabs(sup - 1.5) < 1e-9);
  CHECK(psi_d2(-0.5) == 1.5);
}

TEST_CASE("derivatives agree with central differences") {
  const double h = 1e-6;
  for (double t : {-0.9, -0.7, -0.5, -0.3, -0.1, 0.5, -1.5}) {
    CHECK(psi_d1(t) == doctest::Approx((psi(t + h) - psi(t - h)) / (2 * h)).epsilon(1e-6));
    CHECK(psi_d2(t) == doctest::Approx((psi_d1(t + h) - psi_d1(t - h)) / (2 * h)).epsilon(1e-6));
  }
}
