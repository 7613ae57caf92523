#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hwq/model.hpp"

namespace hwq {

// Unit-mean interarrival law with closed-form survival, hazard and mean residual life.
class Interarrival {
public:
  enum class Kind { Exponential, Hyperexponential, Erlang, Lognormal };

  static Interarrival exponential();
  // Balanced-means two-phase mixture; requires scv > 1.
  static Interarrival hyperexponential(double scv);
  static Interarrival erlang(int k);
  static Interarrival lognormal(double scv);

  Kind kind() const { return kind_; }
  std::string name() const;
  double scv() const;

  double survival(double t) const;
  double density(double t) const;
  double hazard(double t) const;
  // ζ(t) = E[T − t | T > t]; ζ(0) = 1.
  double mrl(double t) const;
  // dζ/dt via the closed form hζ − 1.
  double mrl_derivative(double t) const { return hazard(t) * mrl(t) - 1.0; }

  bool bounded_mrl() const { return kind_ != Kind::Lognormal; }
  double hazard_sup() const;
  double mrl_sup() const;  // +∞ when unbounded

  template <class D>
  double sample(D& draws) const {
    switch (kind_) {
      case Kind::Exponential: return draws.exponential();
      case Kind::Hyperexponential: {
        const double u = draws.uniform();
        return draws.exponential() / (u <= p1_ ? rate1_ : rate2_);
      }
      case Kind::Erlang: {
        double s = 0.0;
        for (int l = 0; l < k_; ++l) s += draws.exponential();
        return s / static_cast<double>(k_);
      }
      case Kind::Lognormal: return std::exp(loc_ + sigma_ * draws.normal());
    }
    return 0.0;
  }

private:
  Kind kind_ = Kind::Exponential;
  double p1_ = 1.0, rate1_ = 1.0, rate2_ = 1.0;
  int k_ = 1;
  double loc_ = 0.0, sigma_ = 0.0;
};

struct ArrivalSpec {
  enum class Kind { Poisson, Renewal };
  Kind kind = Kind::Poisson;
  std::vector<Interarrival> laws;  // renewal: one per class

  static ArrivalSpec poisson() { return {}; }
  static ArrivalSpec renewal(std::vector<Interarrival> laws) { return {Kind::Renewal, std::move(laws)}; }
  bool is_renewal() const { return kind == Kind::Renewal; }
  // Poisson arrivals behave as exponential laws.
  Interarrival law(std::size_t i) const { return is_renewal() ? laws.at(i) : Interarrival::exponential(); }
  void validate(std::size_t m) const;
};

// Scaled hazard rⁿ(τ) = λ h(λτ) and scaled residual life ζⁿ(τ) = ζ(λτ).
inline double scaled_hazard(const Interarrival& law, double lambda_n, double tau) {
  return lambda_n * law.hazard(lambda_n * tau);
}
inline double scaled_mrl(const Interarrival& law, double lambda_n, double tau) { return law.mrl(lambda_n * tau); }

}  // namespace hwq
