#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hwq/model.hpp"

namespace hwq {

struct Region {
  enum class Kind { Cube, Cone, ConeMinusCube, Full };
  Kind kind = Kind::Full;
  double r = 0.0;      // cube radius (the region for Cube, the excluded core for ConeMinusCube)
  double R = 0.0;      // outer ℓ1 radius for the other kinds
  double delta = 0.0;
  int cone_sign = +1;

  static Region cube(double r);
  static Region cone(int sign, double delta, double R);
  static Region cone_minus_cube(int sign, double delta, double r, double R);
  static Region full(double R);

  void validate() const;
  double inner() const { return kind == Kind::ConeMinusCube ? r : 0.0; }
  double outer() const { return kind == Kind::Cube ? r : R; }
  bool has_cone() const { return kind == Kind::Cone || kind == Kind::ConeMinusCube; }
  bool contains(std::span<const double> x) const;
  Region with_outer(double outer) const;
};

const char* region_kind_name(Region::Kind k);

struct SamplerConfig {
  std::uint64_t seed = 1;
  std::size_t count = 100000;
  double enrichment = 0.3;    // fraction of draws spent on boundary hyperplane, axes, joints, cone boundary
  std::vector<double> joints; // coordinate values to concentrate draws around
};

// Sample j is a pure function of (seed, j); any index range can be drawn independently.
class StateSampler {
public:
  StateSampler(std::size_t m, Region region, SamplerConfig cfg);

  Vec state(std::size_t j) const;
  ControlVector control(std::size_t j) const;
  std::size_t count() const { return cfg_.count; }
  const Region& region() const { return region_; }
  const SamplerConfig& config() const { return cfg_; }

private:
  Vec candidate(std::uint64_t stream) const;
  std::size_t m_;
  Region region_;
  SamplerConfig cfg_;
};

// Uniform point of the simplex (Dirichlet(1,…,1)) drawn from `bits`.
Vec dirichlet_point(std::size_t m, std::uint64_t seed);

struct PolishResult {
  Vec x;
  double value;
  std::size_t evaluations;
};

// Compass search for a local maximum of `objective` inside `region`, starting at x0.
PolishResult polish_max(const std::function<double(const Vec&)>& objective, Vec x0, const Region& region,
                        double step0, double min_step = 1e-7, std::size_t max_evals = 4000);

}  // namespace hwq
