#pragma once

#include <map>
#include <string>

#include "hwq/queue.hpp"
#include "hwq/verifier.hpp"

namespace hwq {

// 𝒜f evaluated relative to f(x̂): the generator equals ratio·exp(log_scale).
struct PrelimitGeneratorValue {
  double ratio = 0.0;
  double log_scale = 0.0;
  double linear() const;
};

// Exact Poisson generator applied to V̂ⁿ(x) = f(x̂ⁿ(x)).
PrelimitGeneratorValue prelimit_generator(const LyapunovFunction& f, std::span<const std::int64_t> x,
                                          std::span<const std::int64_t> z, const PrelimitParams& p);

// 𝒱ⁿ(x̂,s) = V(x̂) + Σ(1 − ζⁿ_i(s_i))(V(x̂ + n^{-1/2}e_i) − V(x̂)).
class RenewalLyapunov {
public:
  RenewalLyapunov(PrelimitParams p, ArrivalSpec arr, LyapunovFunction base);

  struct Value {
    double log_base = 0.0;  // log V(x̂)
    double ratio = 1.0;     // 𝒱ⁿ/V
  };
  Value evaluate(std::span<const double> xhat, std::span<const double> s) const;
  double value(std::span<const double> xhat, std::span<const double> s) const;
  const LyapunovFunction& base() const { return base_; }
  const PrelimitParams& params() const { return p_; }
  const ArrivalSpec& arrivals() const { return arr_; }

private:
  PrelimitParams p_;
  ArrivalSpec arr_;
  LyapunovFunction base_;
};

// Throws PreconditionError when ε exceeds the sandwich bound ε̃₀(θ).
RenewalLyapunov renewal_lyapunov(const PrelimitParams& p, const ArrivalSpec& arr, const LyapunovSpec& spec);

// Renewal generator applied to the lifted function at lattice state x with ages s.
PrelimitGeneratorValue prelimit_generator(const RenewalLyapunov& f, std::span<const std::int64_t> x,
                                          std::span<const double> s, std::span<const std::int64_t> z);

// Largest ε with ½V ≤ 𝒱ⁿ ≤ (3/2)V for all states, ages and n, from |1−ζ| ≤ Z and the
// Lipschitz bound on log V.
double sandwich_epsilon(const PrelimitParams& p, const ArrivalSpec& arr, double theta);

struct PrelimitConstants {
  double C1_hat = 0.0;
  double C0_hat = 0.0;
  double C0_tilde = 0.0;
  double C1_tilde = 0.0;
  double C2_hat = 0.0;
  double C3_hat = 0.0;
  double theta0 = 0.0;
  double eps_tilde0 = 0.0;
  Vec vartheta;  // per-class queueing threshold in scaled units
  std::size_t c1_samples = 0;

  std::map<std::string, double> as_map() const;
};

struct PrelimitSampling {
  std::uint64_t seed = 1;
  std::size_t states = 10000;
  double radius = 40.0;      // ℓ1 radius of sampled x̂
  double age_scale = 5.0;    // ages drawn with mean age_scale/λⁿ_i
  std::size_t z_limit = 10000;
  std::size_t z_extra = 1000;
  unsigned threads = 1;
  double shell_fraction = 0.2;
  int max_expansions = 3;
};

// Lattice states x with x̂ⁿ(x) spread over the ℓ1 ball of the given radius; sample j is a pure function of (seed, j).
std::vector<IVec> sample_lattice_states(const PrelimitParams& p, double radius, std::size_t count,
                                        std::uint64_t seed);

// Sample sup of n·|second difference of V̂ⁿ| / (ε(ε+θ)V̂ⁿ), covering both bounds that share Ĉ₁.
double estimate_c1_hat(const PrelimitParams& p, const LyapunovSpec& spec, const std::vector<IVec>& states);

PrelimitConstants estimate_prelimit_constants(const PrelimitParams& p, const ArrivalSpec& arr,
                                              const LyapunovSpec& spec, const PrelimitSampling& sampling);

// θ₀(n) as the minimum of its three terms.
double theta0_formula(const PrelimitParams& p, double C1_hat, double C0_tilde, double C1_tilde, double C2_hat,
                      double C3_hat);

// θⁿ = 1 ∧ ((1 − βⁿ_min) ∨ ½)/βⁿ_max.
double theta_abandon(const PrelimitParams& p);

enum class PrelimitMode { C31, T34, T31 };
const char* prelimit_mode_name(PrelimitMode mode);

// ExpLinear (C31, T31) or AbandonExp (T34) parameters satisfying the mode's preconditions.
// C31/T31 iterate θ ↦ θ₀(n) to a fixed point and take ε = ½(θ₀ ∧ ε̃₀(θ₀)).
LyapunovSpec select_prelimit_parameters(PrelimitMode mode, const PrelimitParams& p, const ArrivalSpec& arr,
                                        const PrelimitSampling& sampling, double eta = 1.0);

// Sweeps sampled states (and ages) and the allocations in 𝒵ⁿ(x), or only pol(x) when a policy is given.
VerificationReport verify_prelimit_foster(PrelimitMode mode, const PrelimitParams& p, const ArrivalSpec& arr,
                                          const LyapunovSpec& spec, const PrelimitSampling& sampling,
                                          const SchedulingPolicy* pol = nullptr);

// Gap between the prelimit generator and the diffusion generator at (nearly) the same point.
// x̂ is snapped to the lattice of server count n, an allocation approximating the control u is
// rounded to 𝒵ⁿ(x), and the comparison diffusion carries the prelimit rates (ϱⁿ, μⁿ, γⁿ, σ_i² = 2λⁿ_i/n).
struct ConsistencyPoint {
  std::size_t n = 0;
  Vec xhat;          // snapped state
  IVec x, z;
  Vec u;             // control recovered from the allocation (u itself when ⟨e,x̂⟩ ≤ 0)
  double prelimit = 0.0;   // 𝒜̂ⁿ_z f / f
  double diffusion = 0.0;  // ℒ_u f / f
  double error() const { return std::fabs(prelimit - diffusion); }
};

ConsistencyPoint generator_consistency(const SystemParams& sys, const LyapunovSpec& spec, std::span<const double> xhat,
                                       const ControlVector& u, std::size_t n);

// Integer allocation in 𝒵ⁿ(x) closest to serving the excess ⟨e,x⟩ − n in proportions u.
IVec allocation_for_control(std::span<const std::int64_t> x, std::int64_t n, const ControlVector& u);

}  // namespace hwq
