#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "streamem/model.hpp"
#include "streamem/stepsize.hpp"

namespace streamem {

// Clamp distance used whenever a gradient update needs pushing back into the
// interior of the constraint set.
inline constexpr double kInteriorEps = 1e-8;

struct TrajectoryRecord {
  std::int64_t step;      // 1-based, strictly increasing
  ParameterPoint theta;   // parameter after this step
  SufficientStat stat;    // running statistic after this step; empty when none exists
  double loglik;          // batch: normalized full-data log-lik at theta;
                          // streaming: predictive log f(y_n) at the pre-update theta
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  ParameterPoint final_theta;
  std::optional<ParameterPoint> averaged_theta;
  std::vector<double> tour_loglik;     // normalized full-data log-lik at each tour end
  std::int64_t freeze_events = 0;      // M-steps skipped on an inadmissible statistic
  std::int64_t projection_events = 0;  // parameters clamped back into the interior
};

struct ScanOrder {
  enum class Mode { systematic, random_with_replacement };
  Mode mode = Mode::systematic;
  std::uint64_t seed = 0;  // only the random mode consumes it
};

struct OnlineEmConfig {
  StepsizeSchedule schedule = StepsizeSchedule::power(0.6);
  // M-step held off for the first freeze_count update steps.
  std::int64_t freeze_count = 5;
  // Consecutive observations averaged per update step; one gamma per block.
  Eigen::Index minibatch_size = 1;
  // When set, every M-step sees S_n + prior_stat / n.
  std::optional<SufficientStat> prior_stat;
  // When set (in [0, 1)), a running mean of theta over the update steps after
  // floor(fraction * total_steps) lands in Trajectory::averaged_theta.
  std::optional<double> averaging_start_fraction;
  // Starting statistic S_0; with gamma_1 = 1 it never influences the run.
  std::optional<SufficientStat> initial_stat;
};

// Classic EM: iterations of full-data E-step average followed by an M-step.
Trajectory batch_em(const Model& model, const Matrix& data, const ParameterPoint& theta0,
                    int iterations);

// One application of the EM map under the empirical distribution of `data`;
// identical to the first batch_em iterate by construction.
ParameterPoint limiting_em_step(const Model& model, const Matrix& data,
                                const ParameterPoint& theta);

// Single-pass stochastic approximation on the statistic:
//   S_n = (1 - gamma_n) S_{n-1} + gamma_n E_theta[s | block_n],
//   theta_n = mstep(S_n)  (after the freeze phase, when admissible).
Trajectory online_em(const Model& model, const Matrix& stream, const ParameterPoint& theta0,
                     const OnlineEmConfig& config);

// Repeated online_em scans of a fixed dataset; the step index and statistic
// carry across tours, and tour_loglik records a full-data pass per tour.
Trajectory tour_runner(const Model& model, const Matrix& data, const ParameterPoint& theta0,
                       const OnlineEmConfig& config, int tours, const ScanOrder& order = {});

// Per-observation statistic cache: the first tour is exactly online_em with
// gamma_n = 1/n, later tours replace cached contributions one at a time.
Trajectory incremental_em(const Model& model, const Matrix& data, const ParameterPoint& theta0,
                          int tours, std::int64_t freeze_count = 5);

// Gradient recursion theta_n = theta_{n-1} + gamma_n I_c^{-1} score(y_n) in
// the model's reduced parameterization, clamped back into the interior when
// a step leaves it.
Trajectory titterington(const Model& model, const Matrix& stream, const ParameterPoint& theta0,
                        const StepsizeSchedule& schedule);

// Coordinate-wise mean of the recorded parameters over steps > n0, with exact
// constraints scrubbed afterwards.
ParameterPoint polyak_ruppert(const Model& model, const Trajectory& trajectory,
                              std::int64_t n0);

// (1/N) sum_t log f_theta(y_t).
double normalized_loglik(const Model& model, const ParameterPoint& theta, const Matrix& data);

}  // namespace streamem
