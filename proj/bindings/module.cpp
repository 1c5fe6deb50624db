// Python bindings for the streaming-EM toolkit. Heavy estimator calls release
// the GIL; all array traffic goes through Eigen copies so the C++ side never
// holds a view into Python memory.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "streamem/estimators.hpp"
#include "streamem/experiment.hpp"
#include "streamem/io.hpp"
#include "streamem/mixture.hpp"
#include "streamem/model.hpp"
#include "streamem/ppca1.hpp"
#include "streamem/rng.hpp"
#include "streamem/sampling.hpp"

namespace py = pybind11;
using namespace streamem;

namespace {

ScanOrder make_scan(const std::string& mode, std::uint64_t seed) {
  ScanOrder s;
  if (mode == "systematic") {
    s.mode = ScanOrder::Mode::systematic;
  } else if (mode == "random") {
    s.mode = ScanOrder::Mode::random_with_replacement;
  } else {
    throw ConfigError("scan mode must be 'systematic' or 'random', got '" + mode + "'");
  }
  s.seed = seed;
  return s;
}

StepsizeSchedule make_schedule(double alpha, const std::optional<std::vector<double>>& gammas) {
  if (gammas && !gammas->empty()) return StepsizeSchedule::explicit_sequence(*gammas);
  return StepsizeSchedule::power(alpha);
}

OnlineEmConfig make_config(double alpha, const std::optional<std::vector<double>>& gammas,
                           std::int64_t freeze, Eigen::Index minibatch,
                           std::optional<double> avg_start, const std::optional<Vector>& prior_stat,
                           const std::optional<Vector>& initial_stat) {
  OnlineEmConfig cfg;
  cfg.schedule = make_schedule(alpha, gammas);
  cfg.freeze_count = freeze;
  cfg.minibatch_size = minibatch;
  cfg.averaging_start_fraction = avg_start;
  cfg.prior_stat = prior_stat;
  cfg.initial_stat = initial_stat;
  return cfg;
}

Matrix record_thetas(const Trajectory& t) {
  const Eigen::Index rows = static_cast<Eigen::Index>(t.records.size());
  const Eigen::Index cols = rows > 0 ? t.records.front().theta.size() : 0;
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) out.row(i) = t.records[static_cast<std::size_t>(i)].theta;
  return out;
}

Vector record_logliks(const Trajectory& t) {
  Vector out(static_cast<Eigen::Index>(t.records.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out[i] = t.records[static_cast<std::size_t>(i)].loglik;
  return out;
}

std::vector<std::int64_t> record_steps(const Trajectory& t) {
  std::vector<std::int64_t> out;
  out.reserve(t.records.size());
  for (const auto& rec : t.records) out.push_back(rec.step);
  return out;
}

}  // namespace

PYBIND11_MODULE(_streamem, m) {
  m.doc() = "Streaming and batch EM estimators for latent-variable models";
  m.attr("__version__") = "1.0.0";

  // Exception hierarchy mirrors the C++ one; the derived statistic error is
  // registered after its base so its translator runs first.
  auto domain_exc = py::register_exception<DomainError>(m, "DomainError");
  py::register_exception<InadmissibleStatError>(m, "InadmissibleStatError", domain_exc);
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericalError>(m, "NumericalError");

  py::class_<Model>(m, "Model")
      .def("name", &Model::name)
      .def("stat_dim", &Model::stat_dim)
      .def("param_dim", &Model::param_dim)
      .def("obs_dim", &Model::obs_dim)
      .def("reduced_dim", &Model::reduced_dim)
      .def("has_gradients", &Model::has_gradients)
      .def("valid_parameter", &Model::valid_parameter, py::arg("theta"))
      .def("admissible", &Model::admissible, py::arg("s"))
      .def("estep", &Model::estep, py::arg("theta"), py::arg("y"))
      .def("mstep", &Model::mstep, py::arg("s"))
      .def("log_likelihood", &Model::log_likelihood, py::arg("theta"), py::arg("y"))
      .def("score", &Model::score, py::arg("theta"), py::arg("y"))
      .def("complete_fisher", &Model::complete_fisher, py::arg("theta"))
      .def("to_reduced", &Model::to_reduced, py::arg("theta"))
      .def("from_reduced", &Model::from_reduced, py::arg("r"))
      .def("param_names", &Model::param_names);

  py::class_<MixtureModel, Model>(m, "MixtureModel")
      .def("components", &MixtureModel::components)
      .def("posteriors", &MixtureModel::posteriors, py::arg("theta"), py::arg("y"))
      .def("pack", &MixtureModel::pack, py::arg("weights"), py::arg("betas"))
      .def("weights", &MixtureModel::weights, py::arg("theta"))
      .def("component_param", &MixtureModel::component_param, py::arg("theta"), py::arg("i"));

  m.def("make_poisson_mixture", &make_poisson_mixture, py::arg("components"),
        "Finite mixture of Poisson counts with the given component count");

  py::class_<Ppca1Model, Model>(m, "Ppca1Model")
      .def(py::init<int>(), py::arg("dim"))
      .def("dim", &Ppca1Model::dim)
      .def("pack", &Ppca1Model::pack, py::arg("u"), py::arg("lambda_"))
      .def("factor_loading", &Ppca1Model::factor_loading, py::arg("theta"))
      .def("noise_variance", &Ppca1Model::noise_variance, py::arg("theta"));

  py::class_<TrajectoryRecord>(m, "TrajectoryRecord")
      .def_readonly("step", &TrajectoryRecord::step)
      .def_readonly("theta", &TrajectoryRecord::theta)
      .def_readonly("stat", &TrajectoryRecord::stat)
      .def_readonly("loglik", &TrajectoryRecord::loglik);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("final_theta", &Trajectory::final_theta)
      .def_readonly("averaged_theta", &Trajectory::averaged_theta)
      .def_readonly("tour_loglik", &Trajectory::tour_loglik)
      .def_readonly("freeze_events", &Trajectory::freeze_events)
      .def_readonly("projection_events", &Trajectory::projection_events)
      .def("__len__", [](const Trajectory& t) { return t.records.size(); })
      .def("record", [](const Trajectory& t, std::size_t i) { return t.records.at(i); },
           py::arg("i"))
      .def("steps", &record_steps, "Step index of every record")
      .def("thetas", &record_thetas, "Row per record, one column per parameter")
      .def("logliks", &record_logliks, "Recorded log-likelihood per step");

  m.def("batch_em", &batch_em, py::arg("model"), py::arg("data"), py::arg("theta0"),
        py::arg("iterations"), py::call_guard<py::gil_scoped_release>());

  m.def("limiting_em_step", &limiting_em_step, py::arg("model"), py::arg("data"),
        py::arg("theta"), py::call_guard<py::gil_scoped_release>());

  m.def(
      "online_em",
      [](const Model& model, const Matrix& stream, const ParameterPoint& theta0, double alpha,
         const std::optional<std::vector<double>>& gammas, std::int64_t freeze,
         Eigen::Index minibatch, std::optional<double> avg_start,
         const std::optional<Vector>& prior_stat, const std::optional<Vector>& initial_stat) {
        const OnlineEmConfig cfg =
            make_config(alpha, gammas, freeze, minibatch, avg_start, prior_stat, initial_stat);
        py::gil_scoped_release release;
        return online_em(model, stream, theta0, cfg);
      },
      py::arg("model"), py::arg("stream"), py::arg("theta0"), py::kw_only(),
      py::arg("alpha") = 0.6, py::arg("gammas") = py::none(), py::arg("freeze") = 5,
      py::arg("minibatch") = 1, py::arg("avg_start") = py::none(),
      py::arg("prior_stat") = py::none(), py::arg("initial_stat") = py::none(),
      "Single pass of stochastic-approximation EM over the rows of `stream`");

  m.def(
      "tour_runner",
      [](const Model& model, const Matrix& data, const ParameterPoint& theta0, int tours,
         double alpha, const std::optional<std::vector<double>>& gammas, std::int64_t freeze,
         Eigen::Index minibatch, std::optional<double> avg_start,
         const std::optional<Vector>& prior_stat, const std::string& scan,
         std::uint64_t scan_seed) {
        const OnlineEmConfig cfg =
            make_config(alpha, gammas, freeze, minibatch, avg_start, prior_stat, std::nullopt);
        const ScanOrder order = make_scan(scan, scan_seed);
        py::gil_scoped_release release;
        return tour_runner(model, data, theta0, cfg, tours, order);
      },
      py::arg("model"), py::arg("data"), py::arg("theta0"), py::arg("tours"), py::kw_only(),
      py::arg("alpha") = 0.6, py::arg("gammas") = py::none(), py::arg("freeze") = 5,
      py::arg("minibatch") = 1, py::arg("avg_start") = py::none(),
      py::arg("prior_stat") = py::none(), py::arg("scan") = "systematic",
      py::arg("scan_seed") = 0,
      "Online EM scanning a fixed dataset repeatedly; the step index never resets");

  m.def("incremental_em", &incremental_em, py::arg("model"), py::arg("data"), py::arg("theta0"),
        py::arg("tours"), py::arg("freeze") = 5, py::call_guard<py::gil_scoped_release>());

  m.def(
      "titterington",
      [](const Model& model, const Matrix& stream, const ParameterPoint& theta0, double alpha,
         const std::optional<std::vector<double>>& gammas) {
        const StepsizeSchedule schedule = make_schedule(alpha, gammas);
        py::gil_scoped_release release;
        return titterington(model, stream, theta0, schedule);
      },
      py::arg("model"), py::arg("stream"), py::arg("theta0"), py::kw_only(),
      py::arg("alpha") = 0.6, py::arg("gammas") = py::none(),
      "Gradient recursion preconditioned by the complete-data information");

  m.def("polyak_ruppert", &polyak_ruppert, py::arg("model"), py::arg("trajectory"),
        py::arg("n0"), "Mean of the recorded parameters over steps > n0");

  m.def("normalized_loglik", &normalized_loglik, py::arg("model"), py::arg("theta"),
        py::arg("data"), py::call_guard<py::gil_scoped_release>());

  m.def(
      "run_fit",
      [](const Model& model, const Matrix& data, const ParameterPoint& theta0,
         const std::string& algo, int iterations, int tours, double alpha,
         const std::optional<std::vector<double>>& gammas, std::int64_t freeze,
         Eigen::Index minibatch, double avg_start, const std::optional<Vector>& prior_stat,
         const std::string& scan, std::uint64_t scan_seed) {
        FitSpec spec;
        spec.algo = algo_from_string(algo);
        spec.iterations = iterations;
        spec.tours = tours;
        spec.alpha = alpha;
        if (gammas) spec.gammas = *gammas;
        spec.freeze = freeze;
        spec.minibatch = minibatch;
        spec.avg_start = avg_start;
        spec.prior_stat = prior_stat;
        spec.scan = make_scan(scan, scan_seed);
        py::gil_scoped_release release;
        return run_fit(model, data, theta0, spec);
      },
      py::arg("model"), py::arg("data"), py::arg("theta0"), py::kw_only(),
      py::arg("algo") = "online", py::arg("iterations") = 20, py::arg("tours") = 1,
      py::arg("alpha") = 0.6, py::arg("gammas") = py::none(), py::arg("freeze") = 5,
      py::arg("minibatch") = 1, py::arg("avg_start") = -1.0,
      py::arg("prior_stat") = py::none(), py::arg("scan") = "systematic",
      py::arg("scan_seed") = 0,
      "One estimator arm dispatched by name: batch, online, incremental or titterington");

  m.def(
      "sample_ppca1",
      [](const Vector& u, double lambda, Eigen::Index n, std::uint64_t seed, std::uint64_t rep) {
        auto rng = make_stream(seed, rep);
        return sample_ppca1(u, lambda, n, rng);
      },
      py::arg("u"), py::arg("lambda_"), py::arg("n"), py::arg("seed"), py::arg("rep") = 0,
      "Draws y = u x + noise rows from the seeded substream (seed, rep)");

  m.def(
      "sample_poisson_mixture",
      [](const Vector& weights, const Vector& means, Eigen::Index n, std::uint64_t seed,
         std::uint64_t rep) {
        auto rng = make_stream(seed, rep);
        return sample_poisson_mixture(weights, means, n, rng);
      },
      py::arg("weights"), py::arg("means"), py::arg("n"), py::arg("seed"), py::arg("rep") = 0,
      "Draws mixture counts from the seeded substream (seed, rep)");

  m.def("derive_stream_seed", &derive_stream_seed, py::arg("master_seed"), py::arg("rep"));

  m.def(
      "run_experiment",
      [](const std::string& plan_json) {
        const ExperimentPlan plan = parse_plan_json(plan_json);
        py::gil_scoped_release release;
        const ExperimentReport report = run_replications(plan);
        return report_to_json(report);
      },
      py::arg("plan_json"),
      "Parses a JSON experiment plan, runs the replications, returns the JSON report");

  m.def("asymptotic_sd_ppca_norm_u", &asymptotic_sd_ppca_norm_u, py::arg("lambda_"),
        py::arg("norm_u_sq"), py::arg("n"));
  m.def("fisher_band_ppca_norm_u", &fisher_band_ppca_norm_u, py::arg("lambda_"),
        py::arg("norm_u_sq"), py::arg("n"));

  m.def("read_dataset_csv", &read_dataset_csv, py::arg("path"), py::arg("expected_cols") = -1);
  m.def("write_dataset_csv", &write_dataset_csv, py::arg("path"), py::arg("data"),
        py::arg("columns"));
  m.def("format_double", &format_double, py::arg("x"),
        "Shortest decimal form that parses back to the same double");
}
