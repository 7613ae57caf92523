#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace hwq {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed of substream `stream` of master seed `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) { return mix64(mix64(seed) ^ mix64(~stream)); }

// Cheap engine for per-sample substreams.
class SplitMix64 {
public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    const std::uint64_t z = mix64(state_);
    state_ += 0x9e3779b97f4a7c15ULL;
    return z;
  }

private:
  std::uint64_t state_;
};

// Engine plus the distributions the simulators draw from. boost's implementations are
// fixed across platforms, unlike the std:: distributions.
template <class Engine>
class Draws {
public:
  explicit Draws(std::uint64_t seed) : eng_(seed) {}
  double normal() { return normal_(eng_); }
  double exponential() { return exp_(eng_); }
  double uniform() {
    // (0,1]: never returns 0 so logs and inverse cdfs stay finite
    return 1.0 - static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }
  std::uint64_t bits() { return eng_(); }
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(static_cast<double>(eng_() >> 11) * 0x1.0p-53 * static_cast<double>(n));
  }
  Engine& engine() { return eng_; }

private:
  Engine eng_;
  boost::random::normal_distribution<double> normal_;
  boost::random::exponential_distribution<double> exp_;
};

using StreamDraws = Draws<std::mt19937_64>;
using SampleDraws = Draws<SplitMix64>;

}  // namespace hwq
