#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "streamem/types.hpp"

namespace streamem {

// Stepsize sequence gamma_n for the stochastic-approximation updates. Either
// the power form gamma_n = n^{-alpha} with 0.5 < alpha <= 1 (so gamma_1 = 1
// and sum gamma = inf, sum gamma^2 < inf), or an explicit list.
class StepsizeSchedule {
public:
  static StepsizeSchedule power(double alpha) {
    if (!(alpha > 0.5 && alpha <= 1.0))
      throw ConfigError("stepsize exponent must lie in (0.5, 1], got " + std::to_string(alpha));
    StepsizeSchedule s;
    s.alpha_ = alpha;
    return s;
  }

  static StepsizeSchedule explicit_sequence(std::vector<double> gammas) {
    if (gammas.empty()) throw ConfigError("explicit stepsize sequence must not be empty");
    for (double g : gammas) {
      if (!(g > 0.0 && g <= 1.0))
        throw ConfigError("explicit stepsizes must lie in (0, 1], got " + std::to_string(g));
    }
    StepsizeSchedule s;
    s.gammas_ = std::move(gammas);
    return s;
  }

  // n is the 1-based update-step index.
  double gamma(std::int64_t n) const {
    if (n < 1) throw std::invalid_argument("stepsize index must be >= 1");
    if (!gammas_.empty()) {
      if (static_cast<std::size_t>(n) > gammas_.size())
        throw ConfigError("explicit stepsize sequence has " + std::to_string(gammas_.size()) +
                          " entries, step " + std::to_string(n) + " requested");
      return gammas_[static_cast<std::size_t>(n - 1)];
    }
    // Exact 1/n when alpha is one keeps the running-average identity with
    // incremental first tours bit-for-bit.
    if (alpha_ == 1.0) return 1.0 / static_cast<double>(n);
    return std::pow(static_cast<double>(n), -alpha_);
  }

  bool is_power() const { return gammas_.empty(); }
  double alpha() const { return alpha_; }

private:
  StepsizeSchedule() = default;
  double alpha_ = 1.0;
  std::vector<double> gammas_;
};

}  // namespace streamem
