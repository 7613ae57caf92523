#include "hwq/lyapunov.hpp"

#include <algorithm>
#include <cmath>

namespace hwq {

namespace {

enum class Outer { Exp, HalfSquareExp, Power };

// Inner separable sum S(x) = Σ_i w_i [A ψ(-a x_i) + B ψ(b x_i)] + shift.
struct Separable {
  double A = 0.0, a = 1.0, B = 0.0, b = 1.0, shift = 0.0;
  Outer outer = Outer::Exp;
  double p = 1.0;
};

Separable separable_of(const LyapunovSpec& s) {
  Separable r;
  switch (s.family) {
    case Family::ExpLinear:
    case Family::SubGaussian:
    case Family::Power:
      r.A = s.epsilon * s.theta;
      r.B = 1.0;
      r.b = s.epsilon;
      if (s.family == Family::SubGaussian) r.outer = Outer::HalfSquareExp;
      if (s.family == Family::Power) {
        r.outer = Outer::Power;
        r.p = s.p;
        double w = 0.0;
        for (double mu : s.mu) w += 1.0 / mu;
        r.shift = (1.0 + r.A) * w;
      }
      break;
    case Family::AbandonExp:
      r.A = s.eta * s.theta;
      r.B = s.eta;
      break;
    case Family::NegPartExp:
      r.A = s.eta;
      break;
    case Family::NegPartSubGaussian:
      r.A = s.eta;
      r.a = s.eta;
      r.outer = Outer::HalfSquareExp;
      break;
  }
  return r;
}

bool is_negpart(Family f) { return f == Family::NegPartExp || f == Family::NegPartSubGaussian; }

Vec class_weights(const LyapunovSpec& s) {
  Vec w(s.m(), 0.0);
  if (is_negpart(s.family)) {
    for (std::size_t i : s.class_subset) w[i] = 1.0 / s.mu[i];
  } else {
    for (std::size_t i = 0; i < s.m(); ++i) w[i] = 1.0 / s.mu[i];
  }
  return w;
}

void require(bool ok, const char* what) {
  if (!ok) throw PreconditionError(what);
}

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::ExpLinear: return "exp_linear";
    case Family::SubGaussian: return "sub_gaussian";
    case Family::Power: return "power";
    case Family::NegPartExp: return "negpart_exp";
    case Family::AbandonExp: return "abandon_exp";
    case Family::NegPartSubGaussian: return "negpart_sub_gaussian";
  }
  return "?";
}

void LyapunovSpec::validate() const {
  require(!mu.empty(), "lyapunov: empty weight vector");
  for (double v : mu) require(v > 0.0, "lyapunov: weights need positive mu");
  switch (family) {
    case Family::ExpLinear:
    case Family::SubGaussian:
      require(epsilon > 0.0 && theta > 0.0, "lyapunov: epsilon and theta must be positive");
      break;
    case Family::Power:
      require(epsilon > 0.0 && theta > 0.0, "lyapunov: epsilon and theta must be positive");
      require(p >= 1.0, "lyapunov: power exponent must be at least 1");
      break;
    case Family::AbandonExp:
      require(eta > 0.0 && theta > 0.0, "lyapunov: eta and theta must be positive");
      break;
    case Family::NegPartExp:
    case Family::NegPartSubGaussian:
      require(eta > 0.0, "lyapunov: eta must be positive");
      for (std::size_t i : class_subset) require(i < mu.size(), "lyapunov: class index out of range");
      break;
  }
}

double LyapunovSpec::neg_scale() const { return separable_of(*this).a; }
double LyapunovSpec::pos_scale() const { return separable_of(*this).b; }
bool LyapunovSpec::uses_pos() const { return separable_of(*this).B != 0.0; }

double LogDerivatives::value() const { return std::exp(log_value); }

Vec LogDerivatives::gradient() const {
  const double f = value();
  Vec g(grad);
  for (double& v : g) v *= f;
  return g;
}

Vec LogDerivatives::hessian() const {
  const double f = value();
  Vec h(hess);
  for (double& v : h) v *= f;
  return h;
}

LogDerivatives evaluate_from_cutoffs(const LyapunovSpec& spec, std::span<const double> x,
                                     std::span<const CutoffValue> neg, std::span<const CutoffValue> pos) {
  const std::size_t m = spec.m();
  if (x.size() != m) throw PreconditionError("lyapunov: dimension mismatch");
  const Separable sep = separable_of(spec);
  const Vec w = class_weights(spec);

  double S = sep.shift;
  Vec dS(m, 0.0), d2S(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (w[i] == 0.0) continue;
    if (sep.A != 0.0) {
      const CutoffValue& c = neg[i];
      S += w[i] * sep.A * c.v;
      dS[i] -= w[i] * sep.A * sep.a * c.d1;
      d2S[i] += w[i] * sep.A * sep.a * sep.a * c.d2;
    }
    if (sep.B != 0.0) {
      const CutoffValue& c = pos[i];
      S += w[i] * sep.B * c.v;
      dS[i] += w[i] * sep.B * sep.b * c.d1;
      d2S[i] += w[i] * sep.B * sep.b * sep.b * c.d2;
    }
  }

  LogDerivatives out;
  out.grad.assign(m, 0.0);
  out.hess.assign(m * m, 0.0);
  double outer_coef = 1.0;  // ratio Hessian = diag_coef·diag(S'') + outer_coef·∇S∇Sᵀ
  double diag_coef = 1.0;
  double grad_coef = 1.0;
  switch (sep.outer) {
    case Outer::Exp:
      out.log_value = S;
      break;
    case Outer::HalfSquareExp:
      out.log_value = 0.5 * S * S;
      grad_coef = S;
      diag_coef = S;
      outer_coef = 1.0 + S * S;
      break;
    case Outer::Power:
      out.log_value = sep.p * std::log(S);
      grad_coef = sep.p / S;
      diag_coef = sep.p / S;
      outer_coef = sep.p * (sep.p - 1.0) / (S * S);
      break;
  }
  for (std::size_t i = 0; i < m; ++i) {
    out.grad[i] = grad_coef * dS[i];
    for (std::size_t j = 0; j < m; ++j) out.hess[i * m + j] = outer_coef * dS[i] * dS[j];
    out.hess[i * m + i] += diag_coef * d2S[i];
  }
  return out;
}

LogDerivatives evaluate(const LyapunovSpec& spec, std::span<const double> x) {
  spec.validate();
  const std::size_t m = spec.m();
  if (x.size() != m) throw PreconditionError("lyapunov: dimension mismatch");
  const double a = spec.neg_scale(), b = spec.pos_scale();
  std::vector<CutoffValue> neg(m), pos(m);
  for (std::size_t i = 0; i < m; ++i) {
    neg[i] = cutoff_eval(-a * x[i]);
    pos[i] = cutoff_eval(b * x[i]);
  }
  return evaluate_from_cutoffs(spec, x, neg, pos);
}

PsiStar big_psi_star(std::span<const double> x, double eps, double theta, std::span<const double> mu) {
  if (!(eps > 0.0 && theta > 0.0)) throw PreconditionError("psi_star: epsilon and theta must be positive");
  if (x.size() != mu.size()) throw PreconditionError("psi_star: dimension mismatch");
  PsiStar r{0.0, Vec(x.size()), Vec(x.size())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const CutoffValue n = cutoff_eval(-x[i]);
    const CutoffValue p = cutoff_eval(eps * x[i]);
    r.value += (eps * theta * n.v + p.v) / mu[i];
    r.grad[i] = (eps * p.d1 - eps * theta * n.d1) / mu[i];
    r.hess_diag[i] = (eps * theta * n.d2 + eps * eps * p.d2) / mu[i];
  }
  return r;
}

LyapunovFunction::LyapunovFunction(LyapunovSpec spec) : terms_{std::move(spec)} { terms_[0].validate(); }

LyapunovFunction LyapunovFunction::sum(LyapunovSpec a, LyapunovSpec b) {
  LyapunovFunction f;
  a.validate();
  b.validate();
  if (a.m() != b.m()) throw PreconditionError("lyapunov: summands differ in dimension");
  f.terms_ = {std::move(a), std::move(b)};
  f.op_ = Combine::Sum;
  return f;
}

LyapunovFunction LyapunovFunction::product(LyapunovSpec a, LyapunovSpec b) {
  LyapunovFunction f = sum(std::move(a), std::move(b));
  f.op_ = Combine::Product;
  return f;
}

LogDerivatives LyapunovFunction::combine(const std::vector<LogDerivatives>& parts) const {
  if (op_ == Combine::Single) return parts.front();
  const LogDerivatives& f = parts[0];
  const LogDerivatives& g = parts[1];
  const std::size_t m = f.m();
  LogDerivatives out;
  out.grad.assign(m, 0.0);
  out.hess.assign(m * m, 0.0);
  if (op_ == Combine::Product) {
    out.log_value = f.log_value + g.log_value;
    for (std::size_t i = 0; i < m; ++i) {
      out.grad[i] = f.grad[i] + g.grad[i];
      for (std::size_t j = 0; j < m; ++j)
        out.hess[i * m + j] = f.h(i, j) + g.h(i, j) + f.grad[i] * g.grad[j] + g.grad[i] * f.grad[j];
    }
    return out;
  }
  const double hi = std::max(f.log_value, g.log_value);
  const double ef = std::exp(f.log_value - hi), eg = std::exp(g.log_value - hi);
  out.log_value = hi + std::log(ef + eg);
  const double wf = ef / (ef + eg), wg = eg / (ef + eg);
  for (std::size_t i = 0; i < m; ++i) {
    out.grad[i] = wf * f.grad[i] + wg * g.grad[i];
    for (std::size_t j = 0; j < m; ++j) out.hess[i * m + j] = wf * f.h(i, j) + wg * g.h(i, j);
  }
  return out;
}

LogDerivatives LyapunovFunction::evaluate(std::span<const double> x) const {
  std::vector<LogDerivatives> parts;
  parts.reserve(terms_.size());
  for (const auto& t : terms_) parts.push_back(hwq::evaluate(t, x));
  return combine(parts);
}

double GeneratorValue::linear() const { return ratio * std::exp(log_value); }

double generator_ratio(const LogDerivatives& f, std::span<const double> x, const ControlVector& u,
                       const DiffusionSpec& dspec, double c) {
  const Vec b = drift_truncated(x, u, dspec, c);
  double r = 0.0;
  for (std::size_t i = 0; i < dspec.m; ++i) r += 0.5 * dspec.a(i) * f.h(i, i) + b[i] * f.grad[i];
  return r;
}

GeneratorValue generator_eval(const LyapunovFunction& f, std::span<const double> x, const ControlVector& u,
                              const DiffusionSpec& dspec, double c) {
  const LogDerivatives d = f.evaluate(x);
  return {generator_ratio(d, x, u, dspec, c), d.log_value};
}

double generator_apply(const LyapunovSpec& spec, std::span<const double> x, const ControlVector& u,
                       const DiffusionSpec& dspec, double c) {
  return generator_eval(LyapunovFunction(spec), x, u, dspec, c).linear();
}

const char* goal_name(Goal g) {
  switch (g) {
    case Goal::T21: return "T2.1";
    case Goal::T22: return "T2.2";
    case Goal::R26: return "R2.6";
    case Goal::L22: return "L2.2";
    case Goal::T23: return "T2.3";
  }
  return "?";
}

double ParameterRules::theta_drift_cap(double beta_max) {
  return beta_max > 1.0 ? 1.0 / (beta_max - 1.0) : kInf;
}

double ParameterRules::theta_exp(double varrho, std::size_t m) {
  const double md = static_cast<double>(m);
  return varrho / (3.0 * md * (2.0 * varrho + md));
}

double ParameterRules::epsilon_exp(double varrho, std::size_t m, double load_sum, double c_bar) {
  return varrho / (6.0 * static_cast<double>(m) * (3.0 * load_sum + 2.0 * c_bar));
}

double ParameterRules::theta_subgauss(double beta_min, double beta_max) {
  return std::max(1.0 - beta_min, 0.5) / beta_max;
}

double ParameterRules::theta_bar(double theta, double beta_min) {
  return std::min(theta, beta_min * std::min(beta_min, 0.5));
}

double ParameterRules::epsilon_subgauss(double theta, double beta_min, double c_bar, double mu_min, double mu_max) {
  const double big = std::max(1.0, theta);
  return theta_bar(theta, beta_min) * std::min(1.0, theta) * mu_min / (2.0 * std::sqrt(c_bar) * big * big * mu_max);
}

double ParameterRules::c_bar(const DiffusionSpec& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.m; ++i) s += d.lambda_tilde(i) / (d.mu[i] * d.mu[i]);
  return s;
}

double ParameterRules::load_sum(const DiffusionSpec& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.m; ++i) s += d.lambda_tilde(i) / d.mu[i];
  return s;
}

std::vector<std::size_t> slow_abandonment_classes(const SystemParams& params) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < params.m; ++i)
    if (params.gamma[i] <= params.mu[i]) idx.push_back(i);
  return idx;
}

LyapunovSpec select_parameters(Goal goal, const SystemParams& params) {
  const DiffusionSpec d = DiffusionSpec::from_system(params);
  const double varrho = d.varrho;
  LyapunovSpec s;
  s.mu = params.mu;
  auto exp_linear = [&] {
    if (!(varrho > 0.0)) throw InfeasibleGoal(std::string(goal_name(goal)) + ": requires positive spare capacity");
    s.theta = std::min(ParameterRules::theta_exp(varrho, params.m), ParameterRules::theta_drift_cap(params.beta_max()));
    s.epsilon = 0.5 * ParameterRules::epsilon_exp(varrho, params.m, ParameterRules::load_sum(d), ParameterRules::c_bar(d));
  };
  auto sub_gauss = [&] {
    const double bmin = params.beta_min();
    if (!(bmin > 0.0)) throw InfeasibleGoal(std::string(goal_name(goal)) + ": requires every abandonment rate positive");
    s.theta = ParameterRules::theta_subgauss(bmin, params.beta_max());
    s.epsilon = 0.5 * ParameterRules::epsilon_subgauss(s.theta, bmin, ParameterRules::c_bar(d), params.mu_min(),
                                                       params.mu_max());
  };
  switch (goal) {
    case Goal::T21:
      exp_linear();
      s.family = Family::ExpLinear;
      break;
    case Goal::T22:
      sub_gauss();
      s.family = Family::SubGaussian;
      break;
    case Goal::R26:
      sub_gauss();
      s.family = Family::AbandonExp;
      s.eta = 1.0;
      break;
    case Goal::L22:
      exp_linear();
      s.family = Family::NegPartExp;
      s.eta = 1.0;
      s.class_subset = slow_abandonment_classes(params);
      break;
    case Goal::T23:
      exp_linear();
      s.family = Family::NegPartSubGaussian;
      s.eta = 1.0;
      s.class_subset = slow_abandonment_classes(params);
      break;
  }
  s.validate();
  return s;
}

}  // namespace hwq
