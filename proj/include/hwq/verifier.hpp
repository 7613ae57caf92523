#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "hwq/lyapunov.hpp"
#include "hwq/sampling.hpp"

namespace hwq {

struct VerificationReport {
  std::string id;
  std::uint64_t seed = 0;
  std::size_t samples = 0;     // (state, control) pairs evaluated
  std::size_t violations = 0;  // margins below -slack
  double worst_margin = kInf;
  Vec worst_x;
  Vec worst_u;
  std::map<std::string, double> constants;
  bool passed = false;
  std::string note;

  static std::string csv_header();
  std::string csv_row() const;
  std::string detail() const;  // JSON text
};

struct VerifyOptions {
  unsigned threads = 1;
  double shell_fraction = 0.2;  // strict decay must hold on the outer shell of this relative width
  std::size_t polish_starts = 6;
  int max_expansions = 3;       // doublings of the outer radius when decay is not yet visible
  std::size_t chunk = 2048;
};

inline double slack_for(double rhs) { return 1e-9 * (1.0 + std::abs(rhs)); }

// ⟨∇V, b_c⟩ against the two-branch bound (𝒦₀⁻ branch, 𝒦₀⁺×Δ branch); V is ExpLinear.
VerificationReport verify_lemma21(const DiffusionSpec& d, const LyapunovSpec& spec, double c, const Region& region,
                                  const SamplerConfig& sampler, const VerifyOptions& opts = {});

// ℒ_uV ≤ κ₀ − ε(ϱ/2m + s·θ‖x⁻‖₁)V with κ₀ estimated; s = 1 is the stated inequality.
VerificationReport verify_foster_T21(const DiffusionSpec& d, const LyapunovSpec& spec, const Region& region,
                                     const SamplerConfig& sampler, const VerifyOptions& opts = {},
                                     double neg_scale = 1.0);

// ℒ_uṼ ≤ κ̃₀ − ε²θ̄((1∧θ)/2μ_max)‖x‖₁²Ṽ with κ̃₀ estimated.
VerificationReport verify_foster_T22(const DiffusionSpec& d, const LyapunovSpec& spec, const Region& region,
                                     const SamplerConfig& sampler, const VerifyOptions& opts = {});

// ℒ_uV̆ ≤ κ̆₀ − κ̆₁‖x‖₁V̆ on 𝒦₀⁺×Δ; samples outside 𝒦₀⁺ are skipped.
VerificationReport verify_R26(const DiffusionSpec& d, double eta, const Region& region, const SamplerConfig& sampler,
                              const VerifyOptions& opts = {});

struct SpecPair {
  LyapunovSpec negpart;  // NegPartExp selects the sum check, NegPartSubGaussian the product η search
  LyapunovSpec base;     // ExpLinear
};

// Sum check: both branches with (κ₀, κ₁, K) estimated.
// Product check: halves η from negpart.eta until a decay constant c₁ > 0 works on all samples.
VerificationReport verify_L22_T23(const DiffusionSpec& d, const SpecPair& pair, const Region& region,
                                  const SamplerConfig& sampler, const VerifyOptions& opts = {}, int eta_steps = 12);

struct Kappa0Estimate {
  double kappa0 = -kInf;
  double radius = 0.0;  // attainment radius
  double outer = 0.0;   // sampling radius finally used
  std::size_t samples = 0;
};

// goal ∈ {T21, T22}; spec is the corresponding ExpLinear or SubGaussian function.
Kappa0Estimate estimate_kappa0(Goal goal, const DiffusionSpec& d, const LyapunovSpec& spec, const Region& region,
                               const SamplerConfig& sampler, const VerifyOptions& opts = {});

// Joints of ψ(−a x) and ψ(b x) in state coordinates, for sampler enrichment.
std::vector<double> curvature_joints(const LyapunovSpec& spec);

}  // namespace hwq
