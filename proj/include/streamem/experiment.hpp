#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "streamem/estimators.hpp"
#include "streamem/model.hpp"

namespace streamem {

enum class Algo { batch, online, incremental, titterington };

Algo algo_from_string(const std::string& s);
std::string algo_to_string(Algo a);

// One estimator arm: how to fit a dataset from a starting parameter.
struct FitSpec {
  Algo algo = Algo::online;
  std::string label;             // report label; defaults to the algo name
  int iterations = 20;           // batch only
  int tours = 1;                 // streaming estimators
  double alpha = 0.6;            // stepsize exponent
  std::vector<double> gammas;    // explicit stepsizes, overrides alpha when nonempty
  std::int64_t freeze = 5;
  Eigen::Index minibatch = 1;
  double avg_start = -1.0;       // < 0: no averaging; else fraction of total steps
  ScanOrder scan{};
  std::optional<Vector> prior_stat;

  std::string display_label() const { return label.empty() ? algo_to_string(algo) : label; }
};

// Runs one estimator arm. Streaming arms scan the dataset `tours` times in
// the spec's scan order; gradient arms get per-tour log-likelihoods filled in
// afterwards so reports can treat every arm uniformly.
Trajectory run_fit(const Model& model, const Matrix& data, const ParameterPoint& theta0,
                   const FitSpec& spec);

// Replication study: for each dataset size and replication, draw (or reuse)
// a dataset, draw or fix the starting point, run every estimator arm, pull
// the plan's metric at its checkpoints, then aggregate over replications.
struct ExperimentPlan {
  std::string name;
  std::string model_kind;  // "ppca1" | "poisson-mix"

  // ppca1 structure + truth
  int dim = 0;
  Vector true_u;
  double true_lambda = 1.0;

  // mixture structure + truth
  Vector true_weights;
  Vector true_means;

  enum class Init { fixed, uniform_means };
  Init init = Init::fixed;
  ParameterPoint theta0;  // fixed starting point (packed for the model)
  double init_low = 0.5;  // uniform-means draw range
  double init_high = 5.0;
  Vector init_weights;    // weights used with uniform-means draws

  std::vector<Eigen::Index> data_sizes;
  bool fixed_data = false;  // one dataset per size, shared across replications
  int replications = 1;
  bool seed_set = false;
  std::uint64_t master_seed = 0;
  std::string metric;  // "norm-u-sq" | "normalized-loglik"
  std::vector<FitSpec> estimators;
  int workers = 0;  // 0: hardware concurrency
};

struct ReportRow {
  std::string estimator;
  std::int64_t data_size = 0;
  std::string checkpoint;  // "iter:k" | "tour:k" | "step:n" | "final" | "final-avg"
  std::string metric;
  double q05 = 0, q25 = 0, q50 = 0, q75 = 0, q95 = 0;
  double mean = 0, sd = 0;
  int samples = 0;
  bool has_band = false;
  double band_lo = 0, band_hi = 0;
};

struct ExperimentReport {
  std::string plan_name;
  std::vector<ReportRow> rows;
  int total_runs = 0;   // replications x sizes x estimator arms
  int failed_runs = 0;  // excluded from the aggregates
  std::vector<std::string> failures;
};

std::shared_ptr<const Model> build_plan_model(const ExperimentPlan& plan);
ParameterPoint plan_true_theta(const ExperimentPlan& plan);

ExperimentReport run_replications(const ExperimentPlan& plan);

// Asymptotic frequentist spread of the |u|^2 estimate: the per-observation
// information for |u|^2 in this model is 1 / (2 (lambda + |u|^2)^2).
double asymptotic_sd_ppca_norm_u(double lambda, double norm_u_sq, Eigen::Index n);

// Reference interval |u|^2_true +/- 2 IQR, IQR taken from the asymptotic
// Gaussian above (roughly a 99.3% band).
std::pair<double, double> fisher_band_ppca_norm_u(double lambda, double norm_u_sq,
                                                  Eigen::Index n);

// Sample quantiles with linear interpolation between order statistics.
std::vector<double> quantiles(std::vector<double> values, const std::vector<double>& probs);

}  // namespace streamem
