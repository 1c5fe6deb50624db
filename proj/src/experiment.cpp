#include "streamem/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <thread>

#include "streamem/log.hpp"
#include "streamem/mixture.hpp"
#include "streamem/ppca1.hpp"
#include "streamem/rng.hpp"
#include "streamem/sampling.hpp"

namespace streamem {

namespace {

constexpr double kNormalUpperQuartile = 0.6744897501960817;  // Phi^{-1}(0.75)

struct MetricPoint {
  std::string checkpoint;
  double value;
};

struct ArmResult {
  bool ok = false;
  std::string error;
  std::vector<MetricPoint> points;
};

struct RepResult {
  std::vector<ArmResult> arms;
};

std::uint64_t stream_key(int kind, std::size_t size_idx, std::size_t rep) {
  return (static_cast<std::uint64_t>(kind) << 42) ^
         (static_cast<std::uint64_t>(size_idx) << 32) ^ static_cast<std::uint64_t>(rep);
}

Matrix generate_dataset(const ExperimentPlan& plan, Eigen::Index n, std::mt19937_64& rng) {
  if (plan.model_kind == "ppca1") return sample_ppca1(plan.true_u, plan.true_lambda, n, rng);
  return sample_poisson_mixture(plan.true_weights, plan.true_means, n, rng);
}

ParameterPoint draw_theta0(const ExperimentPlan& plan, const Model& model,
                           std::mt19937_64& rng) {
  if (plan.init == ExperimentPlan::Init::fixed) return plan.theta0;
  // uniform-means: fresh component means per replication, fixed weights
  const auto& mix = dynamic_cast<const MixtureModel&>(model);
  std::uniform_real_distribution<double> unif(plan.init_low, plan.init_high);
  ParameterPoint theta(model.param_dim());
  theta.head(mix.components()) = plan.init_weights;
  for (int i = 0; i < mix.components(); ++i) theta[mix.components() + i] = unif(rng);
  return theta;
}

double norm_u_sq(const ExperimentPlan& plan, const ParameterPoint& theta) {
  return theta.head(plan.dim).squaredNorm();
}

std::vector<MetricPoint> extract_metric(const ExperimentPlan& plan, const FitSpec& spec,
                                        const Trajectory& traj) {
  std::vector<MetricPoint> pts;
  if (plan.metric == "norm-u-sq") {
    if (spec.algo == Algo::batch) {
      for (const auto& rec : traj.records)
        pts.push_back({"iter:" + std::to_string(rec.step), norm_u_sq(plan, rec.theta)});
    } else {
      const std::int64_t last = traj.records.back().step;
      std::int64_t next_pow = 1;
      for (const auto& rec : traj.records) {
        if (rec.step == next_pow && rec.step != last) {
          pts.push_back({"step:" + std::to_string(rec.step), norm_u_sq(plan, rec.theta)});
          while (next_pow <= rec.step) next_pow *= 2;
        }
      }
      pts.push_back({"final", norm_u_sq(plan, traj.final_theta)});
      if (traj.averaged_theta)
        pts.push_back({"final-avg", norm_u_sq(plan, *traj.averaged_theta)});
    }
  } else {  // normalized-loglik
    if (spec.algo == Algo::batch) {
      for (const auto& rec : traj.records)
        pts.push_back({"iter:" + std::to_string(rec.step), rec.loglik});
    } else {
      for (std::size_t i = 0; i < traj.tour_loglik.size(); ++i)
        pts.push_back({"tour:" + std::to_string(i + 1), traj.tour_loglik[i]});
    }
  }
  return pts;
}

void validate_plan(const ExperimentPlan& plan) {
  if (!plan.seed_set)
    throw ConfigError("experiment plan needs an explicit master seed; refusing to fall back "
                      "to the wall clock");
  if (plan.model_kind != "ppca1" && plan.model_kind != "poisson-mix")
    throw ConfigError("unknown model kind '" + plan.model_kind + "'");
  if (plan.model_kind == "ppca1") {
    if (plan.dim < 1) throw ConfigError("ppca1 plan needs dim >= 1");
    if (plan.true_u.size() != plan.dim)
      throw ConfigError("true factor loading has wrong size");
    if (!(plan.true_lambda > 0.0)) throw ConfigError("true noise variance must be positive");
    if (plan.init != ExperimentPlan::Init::fixed)
      throw ConfigError("uniform-means initialization applies to mixtures only");
  } else {
    const Eigen::Index m = plan.true_weights.size();
    if (m < 1 || plan.true_means.size() != m)
      throw ConfigError("mixture plan needs matching weights and means");
  }
  if (plan.metric != "norm-u-sq" && plan.metric != "normalized-loglik")
    throw ConfigError("unknown metric '" + plan.metric + "'");
  if (plan.metric == "norm-u-sq" && plan.model_kind != "ppca1")
    throw ConfigError("metric norm-u-sq applies to ppca1 plans only");
  if (plan.data_sizes.empty()) throw ConfigError("plan needs at least one data size");
  for (auto n : plan.data_sizes)
    if (n < 1) throw ConfigError("data sizes must be >= 1");
  if (plan.replications < 1) throw ConfigError("replication count must be >= 1");
  if (plan.estimators.empty()) throw ConfigError("plan needs at least one estimator arm");
  std::vector<std::string> labels;
  for (const auto& e : plan.estimators) labels.push_back(e.display_label());
  std::sort(labels.begin(), labels.end());
  if (std::adjacent_find(labels.begin(), labels.end()) != labels.end())
    throw ConfigError("estimator labels must be unique");
  if (plan.init == ExperimentPlan::Init::uniform_means) {
    if (!(plan.init_low > 0.0) || !(plan.init_high >= plan.init_low))
      throw ConfigError("uniform-means range must satisfy 0 < low <= high");
    if (plan.init_weights.size() != plan.true_weights.size())
      throw ConfigError("init weights have wrong size");
  }
}

}  // namespace

Algo algo_from_string(const std::string& s) {
  if (s == "batch") return Algo::batch;
  if (s == "online") return Algo::online;
  if (s == "incremental") return Algo::incremental;
  if (s == "titterington") return Algo::titterington;
  throw ConfigError("unknown algorithm '" + s +
                    "' (expected batch | online | incremental | titterington)");
}

std::string algo_to_string(Algo a) {
  switch (a) {
    case Algo::batch: return "batch";
    case Algo::online: return "online";
    case Algo::incremental: return "incremental";
    case Algo::titterington: return "titterington";
  }
  return "?";
}

Trajectory run_fit(const Model& model, const Matrix& data, const ParameterPoint& theta0,
                   const FitSpec& spec) {
  const StepsizeSchedule schedule = spec.gammas.empty()
                                        ? StepsizeSchedule::power(spec.alpha)
                                        : StepsizeSchedule::explicit_sequence(spec.gammas);
  switch (spec.algo) {
    case Algo::batch:
      return batch_em(model, data, theta0, spec.iterations);
    case Algo::online: {
      OnlineEmConfig cfg;
      cfg.schedule = schedule;
      cfg.freeze_count = spec.freeze;
      cfg.minibatch_size = spec.minibatch;
      cfg.prior_stat = spec.prior_stat;
      if (spec.avg_start >= 0.0) cfg.averaging_start_fraction = spec.avg_start;
      return tour_runner(model, data, theta0, cfg, spec.tours, spec.scan);
    }
    case Algo::incremental: {
      Trajectory traj = incremental_em(model, data, theta0, spec.tours, spec.freeze);
      if (spec.avg_start >= 0.0 && !traj.records.empty()) {
        const auto n0 = static_cast<std::int64_t>(
            std::floor(spec.avg_start * static_cast<double>(traj.records.back().step)));
        traj.averaged_theta = polyak_ruppert(model, traj, n0);
      }
      return traj;
    }
    case Algo::titterington: {
      const Eigen::Index n = data.rows();
      if (n < 1) throw std::invalid_argument("need at least one observation");
      Matrix stream(static_cast<Eigen::Index>(spec.tours) * n, data.cols());
      std::mt19937_64 rng(spec.scan.seed);
      std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
      for (Eigen::Index j = 0; j < stream.rows(); ++j) {
        const Eigen::Index t =
            spec.scan.mode == ScanOrder::Mode::systematic ? j % n : pick(rng);
        stream.row(j) = data.row(t);
      }
      Trajectory traj = titterington(model, stream, theta0, schedule);
      for (int k = 1; k <= spec.tours; ++k) {
        const auto& rec = traj.records[static_cast<std::size_t>(k) * n - 1];
        traj.tour_loglik.push_back(normalized_loglik(model, rec.theta, data));
      }
      if (spec.avg_start >= 0.0 && !traj.records.empty()) {
        const auto n0 = static_cast<std::int64_t>(
            std::floor(spec.avg_start * static_cast<double>(traj.records.back().step)));
        traj.averaged_theta = polyak_ruppert(model, traj, n0);
      }
      return traj;
    }
  }
  throw std::logic_error("unreachable estimator dispatch");
}

std::shared_ptr<const Model> build_plan_model(const ExperimentPlan& plan) {
  if (plan.model_kind == "ppca1") return std::make_shared<const Ppca1Model>(plan.dim);
  if (plan.model_kind == "poisson-mix")
    return std::make_shared<const MixtureModel>(
        make_poisson_mixture(static_cast<int>(plan.true_weights.size())));
  throw ConfigError("unknown model kind '" + plan.model_kind + "'");
}

ParameterPoint plan_true_theta(const ExperimentPlan& plan) {
  if (plan.model_kind == "ppca1") {
    ParameterPoint theta(plan.dim + 1);
    theta.head(plan.dim) = plan.true_u;
    theta[plan.dim] = plan.true_lambda;
    return theta;
  }
  const Eigen::Index m = plan.true_weights.size();
  ParameterPoint theta(2 * m);
  theta.head(m) = plan.true_weights;
  theta.tail(m) = plan.true_means;
  return theta;
}

ExperimentReport run_replications(const ExperimentPlan& plan) {
  validate_plan(plan);
  const auto model = build_plan_model(plan);
  const std::size_t n_sizes = plan.data_sizes.size();
  const auto reps = static_cast<std::size_t>(plan.replications);
  const std::size_t n_arms = plan.estimators.size();

  // Shared datasets for fixed-data plans, generated up front.
  std::vector<Matrix> shared_data;
  if (plan.fixed_data) {
    shared_data.reserve(n_sizes);
    for (std::size_t a = 0; a < n_sizes; ++a) {
      auto rng = make_stream(plan.master_seed, stream_key(0, a, 0));
      shared_data.push_back(generate_dataset(plan, plan.data_sizes[a], rng));
    }
  }

  std::vector<RepResult> results(n_sizes * reps);
  std::atomic<std::size_t> cursor{0};
  auto run_job = [&](std::size_t job) {
    const std::size_t a = job / reps;
    const std::size_t r = job % reps;
    RepResult& slot = results[job];
    slot.arms.resize(n_arms);
    Matrix local_data;
    const Matrix* data = nullptr;
    try {
      if (plan.fixed_data) {
        data = &shared_data[a];
      } else {
        auto rng = make_stream(plan.master_seed, stream_key(0, a, r));
        local_data = generate_dataset(plan, plan.data_sizes[a], rng);
        data = &local_data;
      }
    } catch (const std::exception& e) {
      for (auto& arm : slot.arms) arm.error = std::string("dataset: ") + e.what();
      return;
    }
    ParameterPoint theta0;
    try {
      auto rng = make_stream(plan.master_seed, stream_key(1, a, r));
      theta0 = draw_theta0(plan, *model, rng);
    } catch (const std::exception& e) {
      for (auto& arm : slot.arms) arm.error = std::string("init: ") + e.what();
      return;
    }
    for (std::size_t e = 0; e < n_arms; ++e) {
      try {
        const Trajectory traj = run_fit(*model, *data, theta0, plan.estimators[e]);
        slot.arms[e].points = extract_metric(plan, plan.estimators[e], traj);
        slot.arms[e].ok = true;
      } catch (const std::exception& ex) {
        slot.arms[e].error = ex.what();
      }
    }
  };

  const std::size_t n_jobs = n_sizes * reps;
  std::size_t n_workers = plan.workers > 0
                              ? static_cast<std::size_t>(plan.workers)
                              : std::max(1u, std::thread::hardware_concurrency());
  n_workers = std::min(n_workers, n_jobs);
  if (n_workers <= 1) {
    for (std::size_t j = 0; j < n_jobs; ++j) run_job(j);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const std::size_t j = cursor.fetch_add(1);
          if (j >= n_jobs) return;
          run_job(j);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  ExperimentReport report;
  report.plan_name = plan.name;
  report.total_runs = static_cast<int>(n_jobs * n_arms);
  for (std::size_t a = 0; a < n_sizes; ++a) {
    for (std::size_t e = 0; e < n_arms; ++e) {
      // checkpoint -> values over replications, in first-seen order
      std::vector<std::string> order;
      std::map<std::string, std::vector<double>> columns;
      for (std::size_t r = 0; r < reps; ++r) {
        const ArmResult& arm = results[a * reps + r].arms[e];
        if (!arm.ok) {
          ++report.failed_runs;
          if (report.failures.size() < 8)
            report.failures.push_back(plan.estimators[e].display_label() + " N=" +
                                      std::to_string(plan.data_sizes[a]) + " rep " +
                                      std::to_string(r) + ": " + arm.error);
          continue;
        }
        for (const auto& pt : arm.points) {
          auto it = columns.find(pt.checkpoint);
          if (it == columns.end()) {
            order.push_back(pt.checkpoint);
            it = columns.emplace(pt.checkpoint, std::vector<double>{}).first;
          }
          it->second.push_back(pt.value);
        }
      }
      for (const auto& cp : order) {
        const auto& vals = columns[cp];
        if (vals.empty()) continue;
        ReportRow row;
        row.estimator = plan.estimators[e].display_label();
        row.data_size = plan.data_sizes[a];
        row.checkpoint = cp;
        row.metric = plan.metric;
        const auto q = quantiles(vals, {0.05, 0.25, 0.50, 0.75, 0.95});
        row.q05 = q[0];
        row.q25 = q[1];
        row.q50 = q[2];
        row.q75 = q[3];
        row.q95 = q[4];
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double ss = 0.0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        row.mean = mean;
        row.sd = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
        row.samples = static_cast<int>(vals.size());
        if (plan.metric == "norm-u-sq") {
          const auto band = fisher_band_ppca_norm_u(plan.true_lambda,
                                                    plan.true_u.squaredNorm(),
                                                    plan.data_sizes[a]);
          row.has_band = true;
          row.band_lo = band.first;
          row.band_hi = band.second;
        }
        report.rows.push_back(std::move(row));
      }
    }
  }

  if (report.failed_runs > 0) {
    logging::warn("experiment '" + plan.name + "': " + std::to_string(report.failed_runs) +
                  " of " + std::to_string(report.total_runs) + " runs failed");
  }
  if (static_cast<double>(report.failed_runs) > 0.01 * static_cast<double>(report.total_runs)) {
    std::string msg = "experiment '" + plan.name + "': " +
                      std::to_string(report.failed_runs) + " of " +
                      std::to_string(report.total_runs) + " runs failed (> 1%)";
    for (const auto& f : report.failures) msg += "\n  " + f;
    throw NumericalError(msg);
  }
  return report;
}

double asymptotic_sd_ppca_norm_u(double lambda, double norm_u_sq, Eigen::Index n) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw DomainError("band: noise variance must be positive and finite");
  if (!(norm_u_sq >= 0.0) || !std::isfinite(norm_u_sq))
    throw DomainError("band: |u|^2 must be nonnegative and finite");
  if (n < 1) throw std::invalid_argument("band: n must be >= 1");
  const double g = lambda + norm_u_sq;
  return std::sqrt(2.0 * g * g / static_cast<double>(n));
}

std::pair<double, double> fisher_band_ppca_norm_u(double lambda, double norm_u_sq,
                                                  Eigen::Index n) {
  const double sd = asymptotic_sd_ppca_norm_u(lambda, norm_u_sq, n);
  const double iqr = 2.0 * kNormalUpperQuartile * sd;
  return {norm_u_sq - 2.0 * iqr, norm_u_sq + 2.0 * iqr};
}

std::vector<double> quantiles(std::vector<double> values, const std::vector<double>& probs) {
  if (values.empty()) throw std::invalid_argument("quantiles: need at least one value");
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(probs.size());
  const auto n = values.size();
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("quantiles: probabilities must lie in [0, 1]");
    const double h = static_cast<double>(n - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = h - static_cast<double>(lo);
    out.push_back(values[lo] + frac * (values[hi] - values[lo]));
  }
  return out;
}

}  // namespace streamem
