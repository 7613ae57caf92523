#include "hwq/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hwq {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

}  // namespace

double sum(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0); }

double l1_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::fabs(v);
  return s;
}

double pos_part_sum(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::max(v, 0.0);
  return s;
}

double neg_part_sum(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::max(-v, 0.0);
  return s;
}

void SystemParams::validate(double load_tol) const {
  require(m >= 1, "system: m must be at least 1");
  for (const Vec* v : {&lambda, &mu, &gamma, &hat_lambda, &hat_mu, &scv})
    require(v->size() == m, "system: every per-class vector needs m entries");
  double load = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    require(lambda[i] > 0.0, "system: lambda must be positive");
    require(mu[i] > 0.0, "system: mu must be positive");
    require(gamma[i] >= 0.0, "system: gamma must be nonnegative");
    require(scv[i] > 0.0, "system: scv must be positive");
    load += lambda[i] / mu[i];
  }
  require(std::fabs(load - 1.0) <= load_tol, "system: sum of lambda/mu must equal 1");
}

double SystemParams::beta_max() const {
  double b = 0.0;
  for (std::size_t i = 0; i < m; ++i) b = std::max(b, beta(i));
  return b;
}

double SystemParams::beta_min() const {
  double b = kInf;
  for (std::size_t i = 0; i < m; ++i) b = std::min(b, beta(i));
  return b;
}

double SystemParams::mu_max() const { return *std::max_element(mu.begin(), mu.end()); }
double SystemParams::mu_min() const { return *std::min_element(mu.begin(), mu.end()); }

SystemParams SystemParams::balanced(std::size_t m, double spare, double mu, double gamma, double scv) {
  SystemParams p;
  p.m = m;
  const double rho = 1.0 / static_cast<double>(m);
  p.mu.assign(m, mu);
  p.lambda.assign(m, rho * mu);
  p.gamma.assign(m, gamma);
  p.hat_mu.assign(m, 0.0);
  p.hat_lambda.assign(m, -spare * p.lambda[0]);
  p.scv.assign(m, scv);
  return p;
}

double spare_capacity(const SystemParams& params) {
  double s = 0.0;
  for (std::size_t i = 0; i < params.m; ++i) {
    const double rho = params.lambda[i] / params.mu[i];
    s += (rho * params.hat_mu[i] - params.hat_lambda[i]) / params.mu[i];
  }
  return s;
}

PrelimitParams::PrelimitParams(std::size_t n, Vec lambda_n, Vec mu_n, Vec gamma_n)
    : n_(n), lambda_n_(std::move(lambda_n)), mu_n_(std::move(mu_n)), gamma_n_(std::move(gamma_n)) {
  require(n_ >= 1, "prelimit: n must be at least 1");
  require(!lambda_n_.empty() && mu_n_.size() == lambda_n_.size() && gamma_n_.size() == lambda_n_.size(),
          "prelimit: rate vectors must share a nonzero length");
  double load = 0.0;
  for (std::size_t i = 0; i < lambda_n_.size(); ++i) {
    require(lambda_n_[i] > 0.0 && mu_n_[i] > 0.0 && gamma_n_[i] >= 0.0, "prelimit: invalid rates");
    load += lambda_n_[i] / (static_cast<double>(n_) * mu_n_[i]);
  }
  sqrt_n_ = std::sqrt(static_cast<double>(n_));
  varrho_n_ = sqrt_n_ * (1.0 - load);
}

PrelimitParams PrelimitParams::from_system(const SystemParams& params, std::size_t n) {
  params.validate();
  const double nn = static_cast<double>(n);
  const double rn = std::sqrt(nn);
  Vec l(params.m), mu(params.m);
  for (std::size_t i = 0; i < params.m; ++i) {
    l[i] = nn * params.lambda[i] + rn * params.hat_lambda[i];
    mu[i] = params.mu[i] + params.hat_mu[i] / rn;
  }
  return PrelimitParams(n, std::move(l), std::move(mu), params.gamma);
}

ControlVector::ControlVector(Vec u) : u_(std::move(u)) {
  if (u_.empty()) throw ControlError("control: empty vector");
  double s = 0.0;
  for (double v : u_) {
    if (!(v >= -kSimplexTol)) throw ControlError("control: negative component");
    s += v;
  }
  if (std::fabs(s - 1.0) > kSimplexTol) throw ControlError("control: components do not sum to one");
  double t = 0.0;
  for (double& v : u_) {
    v = std::max(v, 0.0);
    t += v;
  }
  for (double& v : u_) v /= t;
}

ControlVector ControlVector::vertex(std::size_t m, std::size_t i) {
  Vec u(m, 0.0);
  u.at(i) = 1.0;
  return ControlVector(std::move(u));
}

ControlVector ControlVector::barycenter(std::size_t m) {
  return ControlVector(Vec(m, 1.0 / static_cast<double>(m)));
}

void DiffusionSpec::validate() const {
  require(m >= 1, "diffusion: m must be at least 1");
  require(mu.size() == m && gamma.size() == m && sigma.size() == m, "diffusion: vectors need m entries");
  for (std::size_t i = 0; i < m; ++i) {
    require(mu[i] > 0.0, "diffusion: mu must be positive");
    require(gamma[i] >= 0.0, "diffusion: gamma must be nonnegative");
    require(sigma[i] >= 0.0, "diffusion: sigma must be nonnegative");
  }
}

DiffusionSpec DiffusionSpec::from_system(const SystemParams& params) {
  params.validate();
  DiffusionSpec d;
  d.m = params.m;
  d.varrho = spare_capacity(params);
  d.mu = params.mu;
  d.gamma = params.gamma;
  d.sigma.resize(params.m);
  for (std::size_t i = 0; i < params.m; ++i) d.sigma[i] = std::sqrt(params.lambda[i] * (1.0 + params.scv[i]));
  return d;
}

DiffusionSpec DiffusionSpec::make(double varrho, Vec mu, Vec gamma, Vec lambda) {
  DiffusionSpec d;
  d.m = mu.size();
  d.varrho = varrho;
  d.mu = std::move(mu);
  d.gamma = std::move(gamma);
  d.sigma.resize(d.m);
  for (std::size_t i = 0; i < d.m; ++i) d.sigma[i] = std::sqrt(2.0 * lambda.at(i));
  d.validate();
  return d;
}

Vec drift_truncated(std::span<const double> x, const ControlVector& u, const DiffusionSpec& spec, double c) {
  if (!(c >= 1.0)) throw PreconditionError("drift: truncation level must be at least 1");
  if (x.size() != spec.m || u.size() != spec.m) throw PreconditionError("drift: dimension mismatch");
  const double s = std::max(sum(x), 0.0);
  const double md = static_cast<double>(spec.m);
  Vec b(spec.m);
  for (std::size_t i = 0; i < spec.m; ++i) {
    const double q = s * u[i];
    b[i] = -spec.varrho * spec.mu[i] / md - spec.mu[i] * (x[i] - q);
    if (x[i] <= c) b[i] -= spec.gamma[i] * q;
  }
  return b;
}

Vec drift(std::span<const double> x, const ControlVector& u, const DiffusionSpec& spec) {
  return drift_truncated(x, u, spec, kInf);
}

bool in_cone(std::span<const double> x, double delta, int sign) {
  const double s = sum(x);
  const double n1 = l1_norm(x);
  return sign > 0 ? s >= delta * n1 : s <= -delta * n1;
}

Cone cone_membership(std::span<const double> x, double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw PreconditionError("cone: delta must lie in [0,1]");
  const bool plus = in_cone(x, delta, +1);
  const bool minus = in_cone(x, delta, -1);
  if (plus && minus) return Cone::Both;
  if (plus) return Cone::Plus;
  if (minus) return Cone::Minus;
  return Cone::Neither;
}

Vec scale_state(std::span<const std::int64_t> x, const PrelimitParams& p) {
  if (x.size() != p.m()) throw PreconditionError("scale: dimension mismatch");
  const double md = static_cast<double>(p.m());
  Vec xh(p.m());
  for (std::size_t i = 0; i < p.m(); ++i) {
    if (x[i] < 0) throw PreconditionError("scale: negative job count");
    xh[i] = (static_cast<double>(x[i]) - p.lambda_n()[i] / p.mu_n()[i]) / p.sqrt_n() - p.varrho_n() / md;
  }
  return xh;
}

std::vector<std::int64_t> unscale_state(std::span<const double> xhat, const PrelimitParams& p) {
  if (xhat.size() != p.m()) throw PreconditionError("unscale: dimension mismatch");
  const double md = static_cast<double>(p.m());
  std::vector<std::int64_t> x(p.m());
  for (std::size_t i = 0; i < p.m(); ++i) {
    const double v = p.sqrt_n() * (xhat[i] + p.varrho_n() / md) + p.lambda_n()[i] / p.mu_n()[i];
    x[i] = std::max<std::int64_t>(0, std::llround(v));
  }
  return x;
}

Vec scale_allocation(std::span<const std::int64_t> z, const PrelimitParams& p) { return scale_state(z, p); }

std::optional<ControlVector> allocation_to_control(std::span<const double> xhat, std::span<const double> zhat,
                                                   double tol) {
  if (xhat.size() != zhat.size()) throw PreconditionError("allocation: dimension mismatch");
  const double s = sum(xhat);
  if (s <= 0.0) return std::nullopt;
  Vec u(xhat.size());
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = (xhat[i] - zhat[i]) / s;
    if (u[i] < -tol) throw ControlError("allocation: recovered control has a negative component");
    u[i] = std::max(u[i], 0.0);
    total += u[i];
  }
  if (std::fabs(total - 1.0) > tol) throw ControlError("allocation: recovered control leaves the simplex");
  for (double& v : u) v /= total;
  return ControlVector(std::move(u));
}

}  // namespace hwq
