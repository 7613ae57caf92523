#include "hwq/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "hwq/rng.hpp"

namespace hwq {

Region Region::cube(double r) {
  Region g;
  g.kind = Kind::Cube;
  g.r = r;
  g.validate();
  return g;
}

Region Region::cone(int sign, double delta, double R) {
  Region g;
  g.kind = Kind::Cone;
  g.cone_sign = sign;
  g.delta = delta;
  g.R = R;
  g.validate();
  return g;
}

Region Region::cone_minus_cube(int sign, double delta, double r, double R) {
  Region g = cone(sign, delta, R);
  g.kind = Kind::ConeMinusCube;
  g.r = r;
  g.validate();
  return g;
}

Region Region::full(double R) {
  Region g;
  g.kind = Kind::Full;
  g.R = R;
  g.validate();
  return g;
}

void Region::validate() const {
  if (kind == Kind::Cube || kind == Kind::ConeMinusCube) {
    if (!(r > 0.0)) throw PreconditionError("region: cube radius must be positive");
  }
  if (kind != Kind::Cube && !(R > 0.0)) throw PreconditionError("region: outer radius must be positive");
  if (kind == Kind::ConeMinusCube && !(R > r)) throw PreconditionError("region: outer radius must exceed the cube");
  if (!(delta >= 0.0 && delta <= 1.0)) throw PreconditionError("region: delta must lie in [0,1]");
  if (cone_sign != 1 && cone_sign != -1) throw PreconditionError("region: cone sign must be +1 or -1");
}

bool Region::contains(std::span<const double> x) const {
  const double n1 = l1_norm(x);
  if (n1 > outer() || n1 < inner()) return false;
  if (has_cone()) return in_cone(x, delta, cone_sign);
  return true;
}

Region Region::with_outer(double o) const {
  Region g = *this;
  if (kind == Kind::Cube)
    g.r = o;
  else
    g.R = o;
  g.validate();
  return g;
}

const char* region_kind_name(Region::Kind k) {
  switch (k) {
    case Region::Kind::Cube: return "cube";
    case Region::Kind::Cone: return "cone";
    case Region::Kind::ConeMinusCube: return "cone_minus_cube";
    case Region::Kind::Full: return "full";
  }
  return "?";
}

Vec dirichlet_point(std::size_t m, std::uint64_t seed) {
  SampleDraws d(seed);
  Vec u(m);
  double s = 0.0;
  for (double& v : u) s += (v = d.exponential());
  for (double& v : u) v /= s;
  return u;
}

StateSampler::StateSampler(std::size_t m, Region region, SamplerConfig cfg)
    : m_(m), region_(region), cfg_(std::move(cfg)) {
  region_.validate();
  if (m_ == 0) throw PreconditionError("sampler: dimension must be positive");
}

namespace {

Vec l1_direction(std::size_t m, SampleDraws& d) {
  Vec x(m);
  double s = 0.0;
  for (double& v : x) {
    v = d.exponential();
    if (d.bits() & 1u) v = -v;
    s += std::fabs(v);
  }
  for (double& v : x) v /= s;
  return x;
}

void rescale(Vec& x, double radius) {
  const double n1 = l1_norm(x);
  if (n1 > 0.0)
    for (double& v : x) v *= radius / n1;
}

}  // namespace

Vec StateSampler::candidate(std::uint64_t stream) const {
  SampleDraws d(derive_seed(cfg_.seed, stream));
  const double lo = region_.inner(), hi = region_.outer();
  double rho = lo + (hi - lo) * d.uniform();
  Vec x = l1_direction(m_, d);
  if (d.uniform() > cfg_.enrichment) {
    rescale(x, rho);
    return x;
  }
  switch (d.index(5)) {
    case 0: {  // hyperplane ⟨e,x⟩ = 0
      const double mean = sum(x) / static_cast<double>(m_);
      for (double& v : x) v -= mean;
      break;
    }
    case 1: {  // coordinate axis
      const std::size_t i = d.index(m_);
      std::fill(x.begin(), x.end(), 0.0);
      x[i] = (d.bits() & 1u) ? 1.0 : -1.0;
      break;
    }
    case 2: {  // curvature joint in one coordinate
      if (cfg_.joints.empty()) break;
      rescale(x, rho);
      const double j = cfg_.joints[d.index(cfg_.joints.size())];
      x[d.index(m_)] = j + 1e-3 * std::max(1.0, std::fabs(j)) * (2.0 * d.uniform() - 1.0);
      return x;
    }
    case 3: {  // cone boundary ⟨e,x⟩ = ±δ‖x‖₁
      const double delta = region_.has_cone() ? region_.delta : 0.25 * static_cast<double>(d.index(4));
      const int sign = region_.has_cone() ? region_.cone_sign : ((d.bits() & 1u) ? 1 : -1);
      double P = 0.0, N = 0.0;
      for (double v : x) (v > 0.0 ? P : N) += std::fabs(v);
      if (sign < 0) {
        for (double& v : x) v = -v;
        std::swap(P, N);
      }
      if (P == 0.0) {
        x[0] = std::fabs(x[0]);
        P = x[0];
        N -= x[0];
      }
      if (N > 0.0) {
        const double target = P * (1.0 - delta) / (1.0 + delta);
        for (double& v : x)
          if (v < 0.0) v *= target / N;
      }
      if (sign < 0)
        for (double& v : x) v = -v;
      break;
    }
    default:  // near the origin
      rho = lo + std::min(hi - lo, 2.0) * d.uniform();
      break;
  }
  rescale(x, rho);
  return x;
}

Vec StateSampler::state(std::size_t j) const {
  if (j == 0) {
    Vec zero(m_, 0.0);
    if (region_.contains(zero)) return zero;
  }
  Vec x;
  for (std::uint64_t t = 0; t < 64; ++t) {
    x = candidate(static_cast<std::uint64_t>(j) * 64 + t);
    if (region_.contains(x)) return x;
    if (region_.has_cone()) {
      for (double& v : x) v = -v;
      if (region_.contains(x)) return x;
    }
  }
  // Orthant fallback: the signed orthant lies in every cone of that sign.
  for (double& v : x) v = region_.cone_sign * std::fabs(v);
  return x;
}

ControlVector StateSampler::control(std::size_t j) const {
  const std::size_t k = j % (m_ + 2);
  if (k < m_) return ControlVector::vertex(m_, k);
  if (k == m_) return ControlVector::barycenter(m_);
  return ControlVector(dirichlet_point(m_, derive_seed(cfg_.seed ^ 0x5bd1e995ULL, j)));
}

PolishResult polish_max(const std::function<double(const Vec&)>& objective, Vec x0, const Region& region,
                        double step0, double min_step, std::size_t max_evals) {
  PolishResult best{std::move(x0), 0.0, 1};
  best.value = objective(best.x);
  double step = step0;
  const std::size_t m = best.x.size();
  while (step >= min_step && best.evaluations < max_evals) {
    bool moved = false;
    for (std::size_t i = 0; i < m && best.evaluations < max_evals; ++i) {
      for (double dir : {1.0, -1.0}) {
        Vec y = best.x;
        y[i] += dir * step;
        if (!region.contains(y)) continue;
        const double v = objective(y);
        ++best.evaluations;
        if (v > best.value) {
          best.x = std::move(y);
          best.value = v;
          moved = true;
          break;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return best;
}

}  // namespace hwq
