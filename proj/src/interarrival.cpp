#include "hwq/interarrival.hpp"

#include <algorithm>
#include <cmath>
#include <vector>
#include <sstream>

namespace hwq {

namespace {

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Σ_{l<k} (kt)^l / l! and Σ_{l<k} (k−l)(kt)^l / l!, both divided by exp(scale).
struct ErlangSums {
  double s, w, scale;
};

ErlangSums erlang_sums(int k, double t) {
  const double kt = static_cast<double>(k) * t;
  std::vector<double> lt(static_cast<std::size_t>(k));
  double top = 0.0;
  for (int l = 0; l < k; ++l) {
    lt[l] = l == 0 ? 0.0 : static_cast<double>(l) * std::log(kt) - std::lgamma(l + 1.0);
    top = std::max(top, lt[l]);
  }
  ErlangSums r{0.0, 0.0, top};
  for (int l = 0; l < k; ++l) {
    const double term = std::exp(lt[l] - top);
    r.s += term;
    r.w += static_cast<double>(k - l) * term;
  }
  return r;
}

}  // namespace

Interarrival Interarrival::exponential() { return {}; }

Interarrival Interarrival::hyperexponential(double scv) {
  if (!(scv > 1.0)) throw PreconditionError("interarrival: hyperexponential needs scv > 1");
  Interarrival a;
  a.kind_ = Kind::Hyperexponential;
  a.p1_ = 0.5 * (1.0 + std::sqrt((scv - 1.0) / (scv + 1.0)));
  a.rate1_ = 2.0 * a.p1_;
  a.rate2_ = 2.0 * (1.0 - a.p1_);
  return a;
}

Interarrival Interarrival::erlang(int k) {
  if (k < 1) throw PreconditionError("interarrival: Erlang shape must be >= 1");
  Interarrival a;
  a.kind_ = Kind::Erlang;
  a.k_ = k;
  return a;
}

Interarrival Interarrival::lognormal(double scv) {
  if (!(scv > 0.0)) throw PreconditionError("interarrival: lognormal needs scv > 0");
  Interarrival a;
  a.kind_ = Kind::Lognormal;
  a.sigma_ = std::sqrt(std::log1p(scv));
  a.loc_ = -0.5 * a.sigma_ * a.sigma_;
  return a;
}

std::string Interarrival::name() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Exponential: os << "exponential"; break;
    case Kind::Hyperexponential: os << "hyperexponential(scv=" << scv() << ")"; break;
    case Kind::Erlang: os << "erlang(" << k_ << ")"; break;
    case Kind::Lognormal: os << "lognormal(scv=" << scv() << ")"; break;
  }
  return os.str();
}

double Interarrival::scv() const {
  switch (kind_) {
    case Kind::Exponential: return 1.0;
    case Kind::Hyperexponential: return 0.5 / p1_ + 0.5 / (1.0 - p1_) - 1.0;
    case Kind::Erlang: return 1.0 / static_cast<double>(k_);
    case Kind::Lognormal: return std::expm1(sigma_ * sigma_);
  }
  return 1.0;
}

double Interarrival::survival(double t) const {
  if (t <= 0.0) return 1.0;
  if (std::isinf(t)) return 0.0;
  switch (kind_) {
    case Kind::Exponential: return std::exp(-t);
    case Kind::Hyperexponential: return p1_ * std::exp(-rate1_ * t) + (1.0 - p1_) * std::exp(-rate2_ * t);
    case Kind::Erlang: {
      const ErlangSums e = erlang_sums(k_, t);
      return std::exp(e.scale - static_cast<double>(k_) * t) * e.s;
    }
    case Kind::Lognormal: return normal_sf((std::log(t) - loc_) / sigma_);
  }
  return 0.0;
}

double Interarrival::density(double t) const {
  if (t < 0.0 || std::isinf(t)) return 0.0;
  switch (kind_) {
    case Kind::Exponential: return std::exp(-t);
    case Kind::Hyperexponential:
      return p1_ * rate1_ * std::exp(-rate1_ * t) + (1.0 - p1_) * rate2_ * std::exp(-rate2_ * t);
    case Kind::Erlang: {
      const double k = static_cast<double>(k_);
      return k * std::exp((k - 1.0) * std::log(k * t) - k * t - std::lgamma(k));
    }
    case Kind::Lognormal: {
      if (t == 0.0) return 0.0;
      const double z = (std::log(t) - loc_) / sigma_;
      return std::exp(-0.5 * z * z) / (t * sigma_ * std::sqrt(2.0 * M_PI));
    }
  }
  return 0.0;
}

double Interarrival::hazard(double t) const {
  t = std::max(t, 0.0);
  switch (kind_) {
    case Kind::Exponential: return 1.0;
    case Kind::Hyperexponential: {
      // factor out the slower exponential to avoid underflow at large ages
      const double w = std::exp(-(rate1_ - rate2_) * t);
      const double p2 = 1.0 - p1_;
      if (rate1_ >= rate2_) return (p1_ * rate1_ * w + p2 * rate2_) / (p1_ * w + p2);
      const double v = 1.0 / w;
      return (p1_ * rate1_ + p2 * rate2_ * v) / (p1_ + p2 * v);
    }
    case Kind::Erlang: {
      if (k_ == 1) return 1.0;
      const double k = static_cast<double>(k_);
      if (t == 0.0) return 0.0;
      const ErlangSums e = erlang_sums(k_, t);
      const double last = (k - 1.0) * std::log(k * t) - std::lgamma(k);
      return k * std::exp(last - e.scale) / e.s;
    }
    case Kind::Lognormal: {
      const double sf = survival(t);
      return sf > 0.0 ? density(t) / sf : 0.0;
    }
  }
  return 0.0;
}

double Interarrival::mrl(double t) const {
  t = std::max(t, 0.0);
  switch (kind_) {
    case Kind::Exponential: return 1.0;
    case Kind::Hyperexponential: {
      const double p2 = 1.0 - p1_;
      const double slow = std::min(rate1_, rate2_);
      const double w1 = std::exp(-(rate1_ - slow) * t), w2 = std::exp(-(rate2_ - slow) * t);
      return 0.5 * (w1 + w2) / (p1_ * w1 + p2 * w2);
    }
    case Kind::Erlang: {
      const ErlangSums e = erlang_sums(k_, t);
      return e.w / (static_cast<double>(k_) * e.s);
    }
    case Kind::Lognormal: {
      const double z = (std::log(t) - loc_) / sigma_;
      const double sf = normal_sf(z);
      if (t == 0.0) return 1.0;
      return std::max(normal_sf(z - sigma_) - t * sf, 0.0) / sf;
    }
  }
  return 1.0;
}

double Interarrival::hazard_sup() const {
  switch (kind_) {
    case Kind::Exponential: return 1.0;
    case Kind::Hyperexponential: return p1_ * rate1_ + (1.0 - p1_) * rate2_;  // decreasing hazard
    case Kind::Erlang: return static_cast<double>(k_);                       // increasing hazard
    case Kind::Lognormal: {
      double best = 0.0, arg = 1.0;
      for (int j = 0; j <= 4000; ++j) {
        const double t = std::exp(-8.0 + 16.0 * j / 4000.0);
        const double h = hazard(t);
        if (h > best) best = h, arg = t;
      }
      for (double step = 0.01; step > 1e-10; step *= 0.5)
        for (double t : {arg * std::exp(step), arg * std::exp(-step)})
          if (const double h = hazard(t); h > best) best = h, arg = t;
      return best;
    }
  }
  return kInf;
}

double Interarrival::mrl_sup() const {
  switch (kind_) {
    case Kind::Exponential: return 1.0;
    case Kind::Hyperexponential: return 1.0 / std::min(rate1_, rate2_);  // increasing residual life
    case Kind::Erlang: return 1.0;                                      // decreasing residual life
    case Kind::Lognormal: return kInf;
  }
  return kInf;
}

void ArrivalSpec::validate(std::size_t m) const {
  if (is_renewal() && laws.size() != m) throw PreconditionError("arrivals: need one interarrival law per class");
}

}  // namespace hwq
