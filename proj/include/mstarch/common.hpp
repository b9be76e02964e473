#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace mstarch {

// Invalid inputs, shapes, or configuration. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failures of the numerics themselves (singular systems, underflow,
// no usable optimum). Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace constants {
// E[log chi^2_1] = digamma(1/2) + log 2
inline constexpr double mu_eps = -1.2703628454614782;
// Var[log chi^2_1] = pi^2 / 2
inline constexpr double log_chi2_var = 4.934802200544679;
}  // namespace constants

inline double log_sum_exp(double a, double b) {
  if (std::isinf(a) && a < 0) return b;
  if (std::isinf(b) && b < 0) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// SplitMix64 finalizer; mixes seeds into well-separated substreams.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(master) ^ a) ^ b);
}

// Treatment of exact zeros ahead of the log-square transform. Zeros are
// floored rather than dropped so the panel stays aligned in time.
struct ZeroPolicy {
  enum class Mode { ScaledFloor, AbsoluteFloor };
  Mode mode = Mode::ScaledFloor;
  double scale = 1e-3;     // floor = scale * sd(series) under ScaledFloor
  double absolute = 1e-8;  // floor under AbsoluteFloor, or when sd == 0

  double floor_for(double series_sd) const {
    if (mode == Mode::AbsoluteFloor) return absolute;
    const double f = scale * series_sd;
    return f > 0.0 ? f : absolute;
  }
};

}  // namespace mstarch
