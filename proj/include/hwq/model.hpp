#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hwq {

using Vec = std::vector<double>;

class PreconditionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kSimplexTol = 1e-12;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct SystemParams {
  std::size_t m = 0;
  Vec lambda, mu, gamma;
  Vec hat_lambda, hat_mu;
  Vec scv;

  // Throws PreconditionError when sizes or signs are off or the load does not sum to one.
  void validate(double load_tol = 1e-9) const;

  double beta(std::size_t i) const { return gamma[i] / mu[i]; }
  double beta_max() const;
  double beta_min() const;
  double mu_max() const;
  double mu_min() const;

  // Symmetric m-class system with load 1/m per class and λ̂ picked so the spare capacity is `spare`.
  static SystemParams balanced(std::size_t m, double spare, double mu = 1.0, double gamma = 0.0, double scv = 1.0);
};

double spare_capacity(const SystemParams& params);

class PrelimitParams {
public:
  PrelimitParams(std::size_t n, Vec lambda_n, Vec mu_n, Vec gamma_n);
  static PrelimitParams from_system(const SystemParams& params, std::size_t n);

  std::size_t n() const { return n_; }
  std::size_t m() const { return lambda_n_.size(); }
  const Vec& lambda_n() const { return lambda_n_; }
  const Vec& mu_n() const { return mu_n_; }
  const Vec& gamma_n() const { return gamma_n_; }
  double varrho_n() const { return varrho_n_; }
  double sqrt_n() const { return sqrt_n_; }

private:
  std::size_t n_;
  Vec lambda_n_, mu_n_, gamma_n_;
  double varrho_n_;
  double sqrt_n_;
};

class ControlVector {
public:
  // Accepts points within kSimplexTol of the simplex and projects them onto it.
  explicit ControlVector(Vec u);
  static ControlVector vertex(std::size_t m, std::size_t i);
  static ControlVector barycenter(std::size_t m);

  std::size_t size() const { return u_.size(); }
  double operator[](std::size_t i) const { return u_[i]; }
  const Vec& values() const { return u_; }

private:
  Vec u_;
};

struct DiffusionSpec {
  std::size_t m = 0;
  double varrho = 0.0;
  Vec mu, gamma;
  Vec sigma;  // diagonal of the covariance square root

  static DiffusionSpec from_system(const SystemParams& params);
  // Poisson-like instance: σ_i² = 2λ_i.
  static DiffusionSpec make(double varrho, Vec mu, Vec gamma, Vec lambda);

  double a(std::size_t i) const { return sigma[i] * sigma[i]; }
  double lambda_tilde(std::size_t i) const { return 0.5 * a(i); }
  void validate() const;
};

Vec drift(std::span<const double> x, const ControlVector& u, const DiffusionSpec& spec);
Vec drift_truncated(std::span<const double> x, const ControlVector& u, const DiffusionSpec& spec, double c);

enum class Cone { Plus, Minus, Both, Neither };
Cone cone_membership(std::span<const double> x, double delta);
bool in_cone(std::span<const double> x, double delta, int sign);

Vec scale_state(std::span<const std::int64_t> x, const PrelimitParams& p);
// Nearest lattice preimage; exact inverse on images of scale_state.
std::vector<std::int64_t> unscale_state(std::span<const double> xhat, const PrelimitParams& p);
Vec scale_allocation(std::span<const std::int64_t> z, const PrelimitParams& p);

class ControlError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Tolerance is looser than kSimplexTol because scaled inputs carry O(√n·1e-16) rounding.
std::optional<ControlVector> allocation_to_control(std::span<const double> xhat, std::span<const double> zhat,
                                                   double tol = 1e-9);

double sum(std::span<const double> x);
double l1_norm(std::span<const double> x);
double pos_part_sum(std::span<const double> x);
double neg_part_sum(std::span<const double> x);

}  // namespace hwq
