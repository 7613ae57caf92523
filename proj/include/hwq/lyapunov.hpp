#pragma once

#include <span>
#include <vector>

#include "hwq/cutoff.hpp"
#include "hwq/model.hpp"

namespace hwq {

enum class Family { ExpLinear, SubGaussian, Power, NegPartExp, AbandonExp, NegPartSubGaussian };
const char* family_name(Family f);

struct LyapunovSpec {
  Family family = Family::ExpLinear;
  double epsilon = 0.0;
  double theta = 0.0;
  double eta = 0.0;
  double p = 1.0;
  std::vector<std::size_t> class_subset;  // negative-part families only
  Vec mu;                                 // per-class service rates used as weights 1/μ_i

  std::size_t m() const { return mu.size(); }
  void validate() const;

  // The families are built from ψ(-neg_scale·x_i) and ψ(pos_scale·x_i).
  double neg_scale() const;
  double pos_scale() const;
  bool uses_pos() const;
};

// Log-scale evaluation: grad = ∇f/f, hess = ∇²f/f (row-major m×m).
struct LogDerivatives {
  double log_value = 0.0;
  Vec grad;
  Vec hess;

  std::size_t m() const { return grad.size(); }
  double h(std::size_t i, std::size_t j) const { return hess[i * grad.size() + j]; }
  double value() const;
  Vec gradient() const;
  Vec hessian() const;
};

LogDerivatives evaluate(const LyapunovSpec& spec, std::span<const double> x);
// Same, with ψ values precomputed at -neg_scale·x and pos_scale·x (pos may be empty if unused).
LogDerivatives evaluate_from_cutoffs(const LyapunovSpec& spec, std::span<const double> x,
                                     std::span<const CutoffValue> neg, std::span<const CutoffValue> pos);

// Ψ*_{ε,θ}(x) = εθ Σψ(-x_i)/μ_i + Σψ(εx_i)/μ_i with gradient and diagonal Hessian.
struct PsiStar {
  double value;
  Vec grad;
  Vec hess_diag;
};
PsiStar big_psi_star(std::span<const double> x, double eps, double theta, std::span<const double> mu);

enum class Combine { Single, Sum, Product };

// A single family member or the sum/product of two members, evaluated in log scale.
class LyapunovFunction {
public:
  LyapunovFunction() = default;
  explicit LyapunovFunction(LyapunovSpec spec);
  static LyapunovFunction sum(LyapunovSpec a, LyapunovSpec b);
  static LyapunovFunction product(LyapunovSpec a, LyapunovSpec b);

  LogDerivatives evaluate(std::span<const double> x) const;
  LogDerivatives combine(const std::vector<LogDerivatives>& parts) const;
  const std::vector<LyapunovSpec>& terms() const { return terms_; }
  Combine op() const { return op_; }
  std::size_t m() const { return terms_.empty() ? 0 : terms_.front().m(); }

private:
  std::vector<LyapunovSpec> terms_;
  Combine op_ = Combine::Single;
};

struct GeneratorValue {
  double ratio;      // ℒ_u f / f
  double log_value;  // log f
  double linear() const;
};

// Ratio form of ℒ_u f = ½ Σ a_ii ∂²f/∂x_i² + ⟨b_c(x,u), ∇f⟩.
double generator_ratio(const LogDerivatives& f, std::span<const double> x, const ControlVector& u,
                       const DiffusionSpec& dspec, double c = kInf);
GeneratorValue generator_eval(const LyapunovFunction& f, std::span<const double> x, const ControlVector& u,
                              const DiffusionSpec& dspec, double c = kInf);
double generator_apply(const LyapunovSpec& spec, std::span<const double> x, const ControlVector& u,
                       const DiffusionSpec& dspec, double c = kInf);

class InfeasibleGoal : public PreconditionError {
public:
  using PreconditionError::PreconditionError;
};

enum class Goal { T21, T22, R26, L22, T23 };
const char* goal_name(Goal g);

LyapunovSpec select_parameters(Goal goal, const SystemParams& params);

// Parameter rules behind select_parameters, exposed for the verifiers.
struct ParameterRules {
  static double theta_drift_cap(double beta_max);                       // θ(β_max−1)⁺ ≤ 1
  static double theta_exp(double varrho, std::size_t m);                // ϱ/(3m(2ϱ+m))
  static double epsilon_exp(double varrho, std::size_t m, double load_sum, double c_bar);
  static double theta_subgauss(double beta_min, double beta_max);
  static double theta_bar(double theta, double beta_min);               // θ ∧ β_min(β_min ∧ ½)
  static double epsilon_subgauss(double theta, double beta_min, double c_bar, double mu_min, double mu_max);
  static double c_bar(const DiffusionSpec& d);                          // Σ λ̃_i/μ_i²
  static double load_sum(const DiffusionSpec& d);                       // Σ λ̃_i/μ_i
};

std::vector<std::size_t> slow_abandonment_classes(const SystemParams& params);

}  // namespace hwq
