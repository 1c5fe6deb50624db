#include "streamem/estimators.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "streamem/log.hpp"

namespace streamem {

namespace {

void check_inputs(const Model& model, const Matrix& data, const ParameterPoint& theta0) {
  if (data.cols() != model.obs_dim())
    throw DomainError(model.name() + ": data has " + std::to_string(data.cols()) +
                      " columns, expected " + std::to_string(model.obs_dim()));
  if (data.rows() < 1)
    throw std::invalid_argument(model.name() + ": need at least one observation");
  if (!model.valid_parameter(theta0))
    throw DomainError(model.name() + ": starting parameter is outside the domain");
}

SufficientStat average_estep(const Model& model, const Matrix& data,
                             const ParameterPoint& theta) {
  SufficientStat sum = Vector::Zero(model.stat_dim());
  for (Eigen::Index t = 0; t < data.rows(); ++t)
    sum += model.estep(theta, data.row(t).transpose());
  return sum / static_cast<double>(data.rows());
}

struct RunningMean {
  Vector mean;
  std::int64_t count = 0;
  void add(const Vector& x) {
    ++count;
    if (count == 1) {
      mean = x;
    } else {
      mean += (x - mean) / static_cast<double>(count);
    }
  }
};

// Shared state machine behind online_em, tour_runner and incremental_em: owns
// the running statistic, the freeze policy, optional prior regularization,
// optional tail averaging and the step records.
class OnlineCore {
public:
  OnlineCore(const Model& model, const OnlineEmConfig& cfg, const ParameterPoint& theta0,
             std::int64_t total_steps)
      : model_(model), cfg_(cfg), theta_(theta0) {
    if (cfg.minibatch_size < 1) throw ConfigError("minibatch size must be >= 1");
    if (cfg.freeze_count < 0) throw ConfigError("freeze count must be >= 0");
    if (cfg.prior_stat && cfg.prior_stat->size() != model.stat_dim())
      throw ConfigError("prior statistic has size " + std::to_string(cfg.prior_stat->size()) +
                        ", expected " + std::to_string(model.stat_dim()));
    if (cfg.initial_stat) {
      if (cfg.initial_stat->size() != model.stat_dim())
        throw ConfigError("initial statistic has size " +
                          std::to_string(cfg.initial_stat->size()) + ", expected " +
                          std::to_string(model.stat_dim()));
      s_ = *cfg.initial_stat;
    } else {
      s_ = Vector::Zero(model.stat_dim());
    }
    if (cfg.averaging_start_fraction) {
      const double f = *cfg.averaging_start_fraction;
      if (!(f >= 0.0 && f < 1.0))
        throw ConfigError("averaging start fraction must lie in [0, 1), got " +
                          std::to_string(f));
      avg_start_ = static_cast<std::int64_t>(std::floor(f * static_cast<double>(total_steps)));
    }
    traj_.records.reserve(static_cast<std::size_t>(total_steps));
  }

  const ParameterPoint& theta() const { return theta_; }

  // Convex combination toward the block contribution e with weight gamma_n.
  void update(const SufficientStat& e, double block_loglik) {
    ++step_;
    const double gamma = cfg_.schedule.gamma(step_);
    if (gamma == 1.0) {
      s_ = e;  // exact overwrite; also keeps any S_0 from leaking through
    } else {
      s_ = (1.0 - gamma) * s_ + gamma * e;
    }
    commit(block_loglik);
  }

  // Swap one cached contribution for a fresh one (incremental tours >= 2).
  void replace_update(const SufficientStat& e, const Eigen::Ref<const Vector>& cached,
                      double n_obs, double loglik_val) {
    ++step_;
    s_ += (e - cached) / n_obs;
    commit(loglik_val);
  }

  void push_tour_loglik(double v) { traj_.tour_loglik.push_back(v); }

  Trajectory finish() {
    traj_.final_theta = theta_;
    if (avg_start_ >= 0 && avg_.count > 0) {
      ParameterPoint a = avg_.mean;
      model_.renormalize(a);
      traj_.averaged_theta = std::move(a);
    }
    return std::move(traj_);
  }

private:
  void commit(double block_loglik) {
    if (step_ > cfg_.freeze_count) {
      try {
        theta_ = cfg_.prior_stat
                     ? model_.mstep(s_ + *cfg_.prior_stat / static_cast<double>(step_))
                     : model_.mstep(s_);
      } catch (const InadmissibleStatError& err) {
        ++traj_.freeze_events;
        logging::debug(model_.name() + " step " + std::to_string(step_) +
                       ": parameter frozen: " + err.what());
      }
    }
    if (avg_start_ >= 0 && step_ > avg_start_) avg_.add(theta_);
    traj_.records.push_back({step_, theta_, s_, block_loglik});
  }

  const Model& model_;
  const OnlineEmConfig& cfg_;
  SufficientStat s_;
  ParameterPoint theta_;
  std::int64_t step_ = 0;
  std::int64_t avg_start_ = -1;
  RunningMean avg_;
  Trajectory traj_;
};

Trajectory run_online(const Model& model, const Matrix& data, const ParameterPoint& theta0,
                      const OnlineEmConfig& cfg, int tours, const ScanOrder& order,
                      bool record_tour_loglik) {
  check_inputs(model, data, theta0);
  if (tours < 1) throw std::invalid_argument("tour count must be >= 1");
  if (cfg.minibatch_size < 1) throw ConfigError("minibatch size must be >= 1");
  const Eigen::Index n = data.rows();
  const Eigen::Index m = cfg.minibatch_size;
  const std::int64_t total_pseudo = static_cast<std::int64_t>(tours) * n;
  const std::int64_t total_steps = (total_pseudo + m - 1) / m;
  OnlineCore core(model, cfg, theta0, total_steps);

  std::mt19937_64 rng(order.seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);

  std::int64_t consumed = 0;
  std::int64_t tour_mark = n;
  SufficientStat sum(model.stat_dim());
  while (consumed < total_pseudo) {
    const std::int64_t take = std::min<std::int64_t>(m, total_pseudo - consumed);
    sum.setZero();
    double ll = 0.0;
    for (std::int64_t j = 0; j < take; ++j) {
      const Eigen::Index t = order.mode == ScanOrder::Mode::systematic
                                 ? static_cast<Eigen::Index>((consumed + j) % n)
                                 : pick(rng);
      const Observation y = data.row(t).transpose();
      ll += model.log_likelihood(core.theta(), y);
      sum += model.estep(core.theta(), y);
    }
    core.update(sum / static_cast<double>(take), ll / static_cast<double>(take));
    consumed += take;
    while (record_tour_loglik && consumed >= tour_mark) {
      core.push_tour_loglik(normalized_loglik(model, core.theta(), data));
      tour_mark += n;
    }
  }
  return core.finish();
}

// LDLT solve with a ridge fallback for a singular information matrix.
Vector solve_information(const Matrix& info, const Vector& g, const std::string& who,
                         bool& warned) {
  Eigen::LDLT<Matrix> ldlt(info);
  if (ldlt.info() == Eigen::Success) {
    Vector d = ldlt.solve(g);
    if (d.allFinite() && (info * d - g).norm() <= 1e-8 * (1.0 + g.norm())) return d;
  }
  if (!warned) {
    logging::warn(who + ": information matrix singular; adding 1e-10 ridge");
    warned = true;
  } else {
    logging::debug(who + ": information matrix singular; adding 1e-10 ridge");
  }
  const Matrix reg = info + 1e-10 * Matrix::Identity(info.rows(), info.cols());
  Eigen::LDLT<Matrix> again(reg);
  Vector d = again.solve(g);
  if (again.info() != Eigen::Success || !d.allFinite())
    throw NumericalError(who + ": information matrix unusable even after ridge");
  return d;
}

}  // namespace

Trajectory batch_em(const Model& model, const Matrix& data, const ParameterPoint& theta0,
                    int iterations) {
  check_inputs(model, data, theta0);
  if (iterations < 0) throw std::invalid_argument("batch_em: iterations must be >= 0");
  Trajectory traj;
  traj.records.reserve(static_cast<std::size_t>(iterations));
  ParameterPoint theta = theta0;
  for (int k = 1; k <= iterations; ++k) {
    const SufficientStat s = average_estep(model, data, theta);
    try {
      theta = model.mstep(s);
    } catch (const InadmissibleStatError& err) {
      throw NumericalError("batch_em: aggregate statistic inadmissible at iteration " +
                           std::to_string(k) + ": " + err.what());
    }
    traj.records.push_back({k, theta, s, normalized_loglik(model, theta, data)});
  }
  traj.final_theta = theta;
  return traj;
}

ParameterPoint limiting_em_step(const Model& model, const Matrix& data,
                                const ParameterPoint& theta) {
  check_inputs(model, data, theta);
  const SufficientStat s = average_estep(model, data, theta);
  try {
    return model.mstep(s);
  } catch (const InadmissibleStatError& err) {
    throw NumericalError(std::string("limiting_em_step: aggregate statistic inadmissible: ") +
                         err.what());
  }
}

Trajectory online_em(const Model& model, const Matrix& stream, const ParameterPoint& theta0,
                     const OnlineEmConfig& config) {
  return run_online(model, stream, theta0, config, 1, ScanOrder{}, false);
}

Trajectory tour_runner(const Model& model, const Matrix& data, const ParameterPoint& theta0,
                       const OnlineEmConfig& config, int tours, const ScanOrder& order) {
  return run_online(model, data, theta0, config, tours, order, true);
}

Trajectory incremental_em(const Model& model, const Matrix& data, const ParameterPoint& theta0,
                          int tours, std::int64_t freeze_count) {
  check_inputs(model, data, theta0);
  if (tours < 1) throw std::invalid_argument("incremental_em: tours must be >= 1");
  const Eigen::Index n = data.rows();
  OnlineEmConfig cfg;
  cfg.schedule = StepsizeSchedule::power(1.0);
  cfg.freeze_count = freeze_count;
  OnlineCore core(model, cfg, theta0, static_cast<std::int64_t>(tours) * n);
  Matrix cache(model.stat_dim(), n);

  // First tour is a running average: the same arithmetic as online updates
  // with gamma_n = 1/n, while the per-observation contributions get cached.
  for (Eigen::Index t = 0; t < n; ++t) {
    const Observation y = data.row(t).transpose();
    const double ll = model.log_likelihood(core.theta(), y);
    const SufficientStat e = model.estep(core.theta(), y);
    cache.col(t) = e;
    core.update(e, ll);
  }
  core.push_tour_loglik(normalized_loglik(model, core.theta(), data));

  for (int tour = 2; tour <= tours; ++tour) {
    for (Eigen::Index t = 0; t < n; ++t) {
      const Observation y = data.row(t).transpose();
      const double ll = model.log_likelihood(core.theta(), y);
      const SufficientStat e = model.estep(core.theta(), y);
      core.replace_update(e, cache.col(t), static_cast<double>(n), ll);
      cache.col(t) = e;
    }
    core.push_tour_loglik(normalized_loglik(model, core.theta(), data));
  }
  return core.finish();
}

Trajectory titterington(const Model& model, const Matrix& stream, const ParameterPoint& theta0,
                        const StepsizeSchedule& schedule) {
  check_inputs(model, stream, theta0);
  if (!model.has_gradients())
    throw DomainError(model.name() + ": gradient updates need score and complete_fisher");
  {
    ParameterPoint probe = theta0;
    if (model.project_interior(probe, kInteriorEps))
      throw DomainError(model.name() +
                        ": starting parameter must be strictly interior for gradient updates");
  }
  Trajectory traj;
  traj.records.reserve(static_cast<std::size_t>(stream.rows()));
  ParameterPoint theta = theta0;
  bool warned = false;
  for (Eigen::Index t = 0; t < stream.rows(); ++t) {
    const Observation y = stream.row(t).transpose();
    const double ll = model.log_likelihood(theta, y);
    const Vector g = model.score(theta, y);
    const Matrix info = model.complete_fisher(theta);
    // A non-finite score or information means the iterate has left the
    // region where the model evaluates; the pseudo-inverse solve below would
    // otherwise swallow an infinite right-hand side.
    if (!g.allFinite() || !info.allFinite())
      throw NumericalError(model.name() + ": gradient update diverged at step " +
                           std::to_string(t + 1));
    const Vector delta = solve_information(info, g, model.name(), warned);
    const Vector r = model.to_reduced(theta) + schedule.gamma(t + 1) * delta;
    theta = model.from_reduced(r);
    if (!theta.allFinite())
      throw NumericalError(model.name() + ": gradient update diverged at step " +
                           std::to_string(t + 1));
    if (model.project_interior(theta, kInteriorEps)) ++traj.projection_events;
    traj.records.push_back({t + 1, theta, Vector(), ll});
  }
  traj.final_theta = theta;
  return traj;
}

ParameterPoint polyak_ruppert(const Model& model, const Trajectory& trajectory,
                              std::int64_t n0) {
  if (trajectory.records.empty())
    throw std::invalid_argument("polyak averaging needs a recorded trajectory");
  if (n0 < 0 || n0 >= trajectory.records.back().step)
    throw std::invalid_argument("averaging start " + std::to_string(n0) +
                                " must lie in [0, last recorded step)");
  RunningMean avg;
  for (const auto& rec : trajectory.records)
    if (rec.step > n0) avg.add(rec.theta);
  ParameterPoint out = avg.mean;
  model.renormalize(out);
  return out;
}

double normalized_loglik(const Model& model, const ParameterPoint& theta, const Matrix& data) {
  if (data.cols() != model.obs_dim())
    throw DomainError(model.name() + ": data has " + std::to_string(data.cols()) +
                      " columns, expected " + std::to_string(model.obs_dim()));
  if (data.rows() < 1)
    throw std::invalid_argument("normalized_loglik: need at least one observation");
  double acc = 0.0;
  for (Eigen::Index t = 0; t < data.rows(); ++t)
    acc += model.log_likelihood(theta, data.row(t).transpose());
  return acc / static_cast<double>(data.rows());
}

}  // namespace streamem
