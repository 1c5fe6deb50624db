#include "streamem/cli.hpp"

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json_support.hpp"
#include "streamem/estimators.hpp"
#include "streamem/experiment.hpp"
#include "streamem/io.hpp"
#include "streamem/mixture.hpp"
#include "streamem/ppca1.hpp"
#include "streamem/rng.hpp"
#include "streamem/sampling.hpp"

namespace streamem {

namespace {

using jsupport::json;

// Run config = optional JSON file + command-line patches; a flag always wins
// over the file.
json merge_config(const std::string& config_path, const json& patch) {
  json cfg = json::object();
  if (!config_path.empty()) cfg = jsupport::load_file(config_path, "config");
  if (!cfg.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& item : patch.items()) cfg[item.key()] = item.value();
  return cfg;
}

std::uint64_t require_seed(const json& cfg, const std::string& where) {
  if (!cfg.contains("seed"))
    throw ConfigError(where + ": an explicit 'seed' is required; wall-clock seeding is "
                      "disabled for reproducibility");
  return cfg.at("seed").get<std::uint64_t>();
}

std::vector<std::string> dataset_columns(int obs_dim) {
  if (obs_dim == 1) return {"y"};
  std::vector<std::string> cols;
  cols.reserve(obs_dim);
  for (int j = 1; j <= obs_dim; ++j) cols.push_back("y" + std::to_string(j));
  return cols;
}

struct ModelSetup {
  std::shared_ptr<const Model> model;
  std::string kind;
};

// Builds the model named by cfg. For ppca1, `dim` may be inferred from a
// known dataset width; for mixtures the component count comes from the
// longest of the relevant weight/mean arrays.
ModelSetup build_model(const json& cfg, Eigen::Index data_cols) {
  if (!cfg.contains("model")) throw ConfigError("missing 'model' (ppca1 | poisson-mix)");
  const std::string kind = cfg.at("model").get<std::string>();
  if (kind == "ppca1") {
    int dim = cfg.value("dim", 0);
    if (dim == 0 && data_cols > 0) dim = static_cast<int>(data_cols);
    if (dim < 1) throw ConfigError("ppca1 needs 'dim' (or a dataset to infer it from)");
    return {std::make_shared<const Ppca1Model>(dim), kind};
  }
  if (kind == "poisson-mix") {
    Eigen::Index m = 0;
    for (const char* key : {"weights", "init-weights"}) {
      if (cfg.contains(key))
        m = std::max(m, static_cast<Eigen::Index>(cfg.at(key).size()));
    }
    if (m < 1)
      throw ConfigError("poisson-mix needs 'weights' or 'init-weights' to fix the "
                        "component count");
    return {std::make_shared<const MixtureModel>(make_poisson_mixture(static_cast<int>(m))),
            kind};
  }
  throw ConfigError("unknown model '" + kind + "' (expected ppca1 | poisson-mix)");
}

ParameterPoint true_theta_from(const json& cfg, const Model& model, const std::string& kind) {
  if (kind == "ppca1") {
    if (!cfg.contains("u") || !cfg.contains("lambda"))
      throw ConfigError("ppca1 generator needs 'u' and 'lambda'");
    const auto& ppca = dynamic_cast<const Ppca1Model&>(model);
    return ppca.pack(jsupport::loading_from(cfg.at("u"), ppca.dim(), "u"),
                     cfg.at("lambda").get<double>());
  }
  if (!cfg.contains("weights") || !cfg.contains("means"))
    throw ConfigError("poisson-mix generator needs 'weights' and 'means'");
  const Vector w = jsupport::vec_from(cfg.at("weights"), "weights");
  const Vector b = jsupport::vec_from(cfg.at("means"), "means");
  if (w.size() != b.size()) throw ConfigError("'weights' and 'means' sizes differ");
  ParameterPoint theta(2 * w.size());
  theta.head(w.size()) = w;
  theta.tail(b.size()) = b;
  return theta;
}

ParameterPoint init_theta_from(const json& cfg, const Model& model, const std::string& kind) {
  if (kind == "ppca1") {
    if (!cfg.contains("init-u") || !cfg.contains("init-lambda"))
      throw ConfigError("fit needs 'init-u' and 'init-lambda'");
    const auto& ppca = dynamic_cast<const Ppca1Model&>(model);
    return ppca.pack(jsupport::loading_from(cfg.at("init-u"), ppca.dim(), "init-u"),
                     cfg.at("init-lambda").get<double>());
  }
  if (!cfg.contains("init-weights") || !cfg.contains("init-means"))
    throw ConfigError("fit needs 'init-weights' and 'init-means'");
  const Vector w = jsupport::vec_from(cfg.at("init-weights"), "init-weights");
  const Vector b = jsupport::vec_from(cfg.at("init-means"), "init-means");
  if (w.size() != b.size()) throw ConfigError("'init-weights' and 'init-means' sizes differ");
  ParameterPoint theta(2 * w.size());
  theta.head(w.size()) = w;
  theta.tail(b.size()) = b;
  return theta;
}

Matrix sample_from(const json& cfg, const Model& model, const std::string& kind,
                   Eigen::Index n, std::mt19937_64& rng) {
  const ParameterPoint truth = true_theta_from(cfg, model, kind);
  if (kind == "ppca1") {
    const auto& ppca = dynamic_cast<const Ppca1Model&>(model);
    return sample_ppca1(ppca.factor_loading(truth), ppca.noise_variance(truth), n, rng);
  }
  const auto& mix = dynamic_cast<const MixtureModel&>(model);
  const Eigen::Index m = mix.components();
  return sample_poisson_mixture(truth.head(m), truth.tail(m), n, rng);
}

// Loads the dataset named by cfg["data"], or draws one when generator keys
// are present instead. Exactly one of the two sources must be configured.
Matrix obtain_data(const json& cfg, const Model& model, const std::string& kind) {
  const bool has_file = cfg.contains("data");
  const bool has_gen = cfg.contains("n");
  if (has_file == has_gen)
    throw ConfigError("give exactly one data source: 'data' (a CSV path) or 'n' plus "
                      "generator parameters and 'seed'");
  Matrix data;
  if (has_file) {
    data = read_dataset_csv(cfg.at("data").get<std::string>(), model.obs_dim());
  } else {
    const auto n = cfg.at("n").get<Eigen::Index>();
    if (n < 1) throw ConfigError("fit needs n >= 1 observations");
    auto rng = make_stream(require_seed(cfg, "fit"), 0);
    data = sample_from(cfg, model, kind, n, rng);
  }
  if (data.rows() < 1) throw DataError("dataset is empty");
  for (Eigen::Index t = 0; t < data.rows(); ++t) {
    try {
      model.check_observation(data.row(t).transpose());
    } catch (const DomainError& e) {
      throw DataError("dataset row " + std::to_string(t + 1) + ": " + e.what());
    }
  }
  return data;
}

json named_params(const Model& model, const ParameterPoint& theta) {
  json out = json::object();
  const auto names = model.param_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    out[names[i]] = theta[static_cast<Eigen::Index>(i)];
  return out;
}

FitSpec fit_spec_from_config(const json& cfg) {
  json arm = json::object();
  for (const char* key : {"algo", "label", "iters", "tours", "alpha", "gammas", "freeze",
                          "minibatch", "avg-start", "scan", "scan-seed", "map-prior"}) {
    if (cfg.contains(key)) arm[key] = cfg.at(key);
  }
  if (!arm.contains("algo")) arm["algo"] = "online";
  return jsupport::fit_spec_from(arm, "fit");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text << '\n';
  if (!out) throw DataError("write to '" + path + "' failed");
}

void cmd_simulate(const json& cfg) {
  jsupport::require_keys(cfg,
                         {"model", "dim", "u", "lambda", "weights", "means", "n", "seed",
                          "out", "meta"},
                         "simulate");
  if (!cfg.contains("n")) throw ConfigError("simulate: missing 'n'");
  if (!cfg.contains("out")) throw ConfigError("simulate: missing 'out'");
  const auto n = cfg.at("n").get<Eigen::Index>();
  if (n < 0) throw ConfigError("simulate: n must be >= 0");
  const std::uint64_t seed = require_seed(cfg, "simulate");
  const auto setup = build_model(cfg, 0);
  auto rng = make_stream(seed, 0);
  const Matrix data = sample_from(cfg, *setup.model, setup.kind, n, rng);
  const std::string out_path = cfg.at("out").get<std::string>();
  write_dataset_csv(out_path, data, dataset_columns(setup.model->obs_dim()));

  json meta{{"model", setup.kind},
            {"n", n},
            {"seed", seed},
            {"params", named_params(*setup.model,
                                    true_theta_from(cfg, *setup.model, setup.kind))}};
  write_text(cfg.value("meta", out_path + ".meta.json"), meta.dump(2));
}

void cmd_fit(const json& cfg) {
  jsupport::require_keys(cfg,
                         {"model", "dim", "u", "lambda", "weights", "means", "n", "seed",
                          "data", "init-u", "init-lambda", "init-weights", "init-means",
                          "algo", "label", "iters", "tours", "alpha", "gammas", "freeze",
                          "minibatch", "avg-start", "scan", "scan-seed", "map-prior", "traj",
                          "summary"},
                         "fit");
  Eigen::Index data_cols = 0;
  if (cfg.contains("data") && cfg.value("model", std::string()) == "ppca1" &&
      !cfg.contains("dim")) {
    // peek at the width so dim can be inferred before the model is built
    data_cols = read_dataset_csv(cfg.at("data").get<std::string>()).cols();
  }
  const auto setup = build_model(cfg, data_cols);
  const Matrix data = obtain_data(cfg, *setup.model, setup.kind);
  const ParameterPoint theta0 = init_theta_from(cfg, *setup.model, setup.kind);
  const FitSpec spec = fit_spec_from_config(cfg);

  const auto tic = std::chrono::steady_clock::now();
  const Trajectory traj = run_fit(*setup.model, data, theta0, spec);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();

  json summary{{"model", setup.kind},
               {"algo", algo_to_string(spec.algo)},
               {"n", data.rows()},
               {"final", named_params(*setup.model, traj.final_theta)},
               {"final-loglik", normalized_loglik(*setup.model, traj.final_theta, data)},
               {"freeze-events", traj.freeze_events},
               {"projection-events", traj.projection_events},
               {"wall-clock-sec", secs}};
  if (traj.averaged_theta)
    summary["averaged"] = named_params(*setup.model, *traj.averaged_theta);
  if (!traj.tour_loglik.empty()) summary["tour-loglik"] = traj.tour_loglik;

  std::cout << summary.dump(2) << std::endl;
  if (cfg.contains("summary")) write_text(cfg.at("summary").get<std::string>(), summary.dump(2));
  if (cfg.contains("traj"))
    write_trajectory_csv(cfg.at("traj").get<std::string>(), *setup.model, traj);
}

void cmd_experiment(const json& cfg) {
  jsupport::require_keys(cfg, {"plan", "out", "report-json", "workers"}, "experiment");
  if (!cfg.contains("plan")) throw ConfigError("experiment: missing 'plan'");
  ExperimentPlan plan = load_plan(cfg.at("plan").get<std::string>());
  if (cfg.contains("workers")) plan.workers = cfg.at("workers").get<int>();
  const ExperimentReport report = run_replications(plan);
  bool wrote = false;
  if (cfg.contains("out")) {
    write_report_csv(cfg.at("out").get<std::string>(), report);
    wrote = true;
  }
  if (cfg.contains("report-json")) {
    write_text(cfg.at("report-json").get<std::string>(), report_to_json(report));
    wrote = true;
  }
  if (wrote) {
    json brief{{"plan", report.plan_name},
               {"rows", report.rows.size()},
               {"total-runs", report.total_runs},
               {"failed-runs", report.failed_runs}};
    std::cout << brief.dump() << std::endl;
  } else {
    std::cout << report_to_json(report) << std::endl;
  }
}

void cmd_compare(const json& cfg) {
  jsupport::require_keys(cfg,
                         {"model", "dim", "data", "init-u", "init-lambda", "init-weights",
                          "init-means", "estimators", "out"},
                         "compare");
  if (!cfg.contains("data")) throw ConfigError("compare: missing 'data'");
  if (!cfg.contains("estimators")) throw ConfigError("compare: missing 'estimators'");
  const auto& arms_json = cfg.at("estimators");
  if (!arms_json.is_array() || arms_json.empty())
    throw ConfigError("compare: 'estimators' must be a nonempty array");

  Eigen::Index data_cols = 0;
  if (cfg.value("model", std::string()) == "ppca1" && !cfg.contains("dim"))
    data_cols = read_dataset_csv(cfg.at("data").get<std::string>()).cols();
  const auto setup = build_model(cfg, data_cols);
  const Matrix data = obtain_data(cfg, *setup.model, setup.kind);
  const ParameterPoint theta0 = init_theta_from(cfg, *setup.model, setup.kind);

  std::vector<FitSpec> specs;
  int idx = 0;
  for (const auto& arm : arms_json) {
    specs.push_back(jsupport::fit_spec_from(arm, "compare.estimators[" +
                                                     std::to_string(idx) + "]"));
    ++idx;
  }

  json summaries = json::array();
  std::string merged = "estimator,checkpoint,metric,value\n";
  for (const auto& spec : specs) {
    const auto tic = std::chrono::steady_clock::now();
    const Trajectory traj = run_fit(*setup.model, data, theta0, spec);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
    const std::string label = spec.display_label();
    if (spec.algo == Algo::batch) {
      for (const auto& rec : traj.records)
        merged += label + ",iter:" + std::to_string(rec.step) + ",normalized-loglik," +
                  format_double(rec.loglik) + "\n";
    } else {
      for (std::size_t k = 0; k < traj.tour_loglik.size(); ++k)
        merged += label + ",tour:" + std::to_string(k + 1) + ",normalized-loglik," +
                  format_double(traj.tour_loglik[k]) + "\n";
    }
    json row{{"estimator", label},
             {"final", named_params(*setup.model, traj.final_theta)},
             {"final-loglik", normalized_loglik(*setup.model, traj.final_theta, data)},
             {"freeze-events", traj.freeze_events},
             {"projection-events", traj.projection_events},
             {"wall-clock-sec", secs}};
    if (traj.averaged_theta)
      row["averaged"] = named_params(*setup.model, *traj.averaged_theta);
    summaries.push_back(std::move(row));
  }
  std::cout << summaries.dump(2) << std::endl;
  if (cfg.contains("out")) {
    std::ofstream out(cfg.at("out").get<std::string>());
    if (!out) throw DataError("cannot open '" + cfg.at("out").get<std::string>() + "'");
    out << merged;
    if (!out) throw DataError("write failed");
  }
}

// Registers flags that patch the given config key when present.
struct FlagBinder {
  CLI::App* cmd;
  json* patch;

  void num(const char* flag, const char* key, const char* desc) {
    auto* p = patch;
    cmd->add_option_function<double>(
        flag, [p, key = std::string(key)](const double& v) { (*p)[key] = v; }, desc);
  }
  void integer(const char* flag, const char* key, const char* desc) {
    auto* p = patch;
    cmd->add_option_function<std::int64_t>(
        flag, [p, key = std::string(key)](const std::int64_t& v) { (*p)[key] = v; }, desc);
  }
  void uinteger(const char* flag, const char* key, const char* desc) {
    auto* p = patch;
    cmd->add_option_function<std::uint64_t>(
        flag, [p, key = std::string(key)](const std::uint64_t& v) { (*p)[key] = v; }, desc);
  }
  void text(const char* flag, const char* key, const char* desc) {
    auto* p = patch;
    cmd->add_option_function<std::string>(
        flag, [p, key = std::string(key)](const std::string& v) { (*p)[key] = v; }, desc);
  }
  void numbers(const char* flag, const char* key, const char* desc) {
    auto* p = patch;
    cmd->add_option_function<std::vector<double>>(
        flag, [p, key = std::string(key)](const std::vector<double>& v) { (*p)[key] = v; },
        desc);
  }
};

void bind_model_flags(FlagBinder& b) {
  b.text("--model", "model", "ppca1 | poisson-mix");
  b.integer("--dim", "dim", "observation dimension (ppca1)");
  b.numbers("--u", "u", "true factor loading (ppca1)");
  b.num("--lambda", "lambda", "true noise variance (ppca1)");
  b.numbers("--weights", "weights", "true mixture weights");
  b.numbers("--means", "means", "true component means");
}

void bind_u_e1_flag(FlagBinder& b) {
  auto* p = b.patch;
  b.cmd->add_option_function<double>(
      "--u-e1-norm-sq",
      [p](const double& v) { (*p)["u"] = json{{"e1-norm-sq", v}}; },
      "shorthand: true u = first basis vector scaled to |u|^2 = value");
}

void bind_init_flags(FlagBinder& b) {
  b.numbers("--init-u", "init-u", "starting factor loading (ppca1)");
  b.num("--init-lambda", "init-lambda", "starting noise variance (ppca1)");
  b.numbers("--init-weights", "init-weights", "starting mixture weights");
  b.numbers("--init-means", "init-means", "starting component means");
}

void bind_algo_flags(FlagBinder& b) {
  b.text("--algo", "algo", "batch | online | incremental | titterington");
  b.integer("--iters", "iters", "batch EM iterations");
  b.integer("--tours", "tours", "dataset scans for streaming estimators");
  b.num("--alpha", "alpha", "stepsize exponent in (0.5, 1]");
  b.numbers("--gammas", "gammas", "explicit stepsize sequence (overrides --alpha)");
  b.integer("--freeze", "freeze", "update steps before the first M-step");
  b.integer("--minibatch", "minibatch", "observations per update step");
  b.num("--avg-start", "avg-start", "tail-averaging start as a fraction of the run");
  b.text("--scan", "scan", "systematic | random");
  b.uinteger("--scan-seed", "scan-seed", "seed for the random scan order");
  b.numbers("--map-prior", "map-prior", "prior statistic for the MAP variant");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"streaming and batch EM estimation for latent-variable models"};
  app.require_subcommand(1);
  int exit_code = 0;

  std::string sim_config, fit_config, exp_config, cmp_config;
  json sim_patch = json::object(), fit_patch = json::object(), exp_patch = json::object(),
       cmp_patch = json::object();

  auto* sim = app.add_subcommand("simulate", "draw a synthetic dataset to CSV");
  sim->add_option("--config", sim_config, "JSON run config");
  {
    FlagBinder b{sim, &sim_patch};
    bind_model_flags(b);
    bind_u_e1_flag(b);
    b.integer("--n", "n", "number of observations");
    b.uinteger("--seed", "seed", "master seed (required, no wall-clock fallback)");
    b.text("--out", "out", "output CSV path");
    b.text("--meta", "meta", "metadata JSON path (default <out>.meta.json)");
  }
  sim->callback([&] { cmd_simulate(merge_config(sim_config, sim_patch)); });

  auto* fit = app.add_subcommand("fit", "fit one estimator to a dataset");
  fit->add_option("--config", fit_config, "JSON run config");
  {
    FlagBinder b{fit, &fit_patch};
    bind_model_flags(b);
    bind_u_e1_flag(b);
    b.text("--data", "data", "dataset CSV path");
    b.integer("--n", "n", "draw this many observations instead of reading --data");
    b.uinteger("--seed", "seed", "master seed for the generator path");
    bind_init_flags(b);
    bind_algo_flags(b);
    b.text("--traj", "traj", "write the step-by-step trajectory CSV here");
    b.text("--summary", "summary", "write the summary JSON here");
  }
  fit->callback([&] { cmd_fit(merge_config(fit_config, fit_patch)); });

  auto* exp = app.add_subcommand("experiment", "run a replication study from a plan file");
  exp->add_option("--config", exp_config, "JSON run config");
  {
    FlagBinder b{exp, &exp_patch};
    b.text("--plan", "plan", "experiment plan JSON path");
    b.text("--out", "out", "report CSV path");
    b.text("--report-json", "report-json", "report JSON path");
    b.integer("--workers", "workers", "worker threads (0 = all cores)");
  }
  exp->callback([&] { cmd_experiment(merge_config(exp_config, exp_patch)); });

  auto* cmp = app.add_subcommand("compare", "fit several estimators to one dataset");
  cmp->add_option("--config", cmp_config, "JSON run config");
  {
    FlagBinder b{cmp, &cmp_patch};
    b.text("--model", "model", "ppca1 | poisson-mix");
    b.integer("--dim", "dim", "observation dimension (ppca1)");
    b.text("--data", "data", "dataset CSV path");
    bind_init_flags(b);
    b.text("--out", "out", "merged per-checkpoint CSV path");
    auto* p = &cmp_patch;
    cmp->add_option_function<std::string>(
        "--algos",
        [p](const std::string& csv) {
          json arr = json::array();
          std::string cur;
          for (char c : csv + ",") {
            if (c == ',') {
              if (!cur.empty()) arr.push_back(json{{"algo", cur}});
              cur.clear();
            } else {
              cur.push_back(c);
            }
          }
          (*p)["estimators"] = arr;
        },
        "comma-separated algorithm list (shorthand for 'estimators')");
  }
  cmp->callback([&] { cmd_compare(merge_config(cmp_config, cmp_patch)); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const jsupport::json::exception& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 4;
  }
  return exit_code;
}

}  // namespace streamem
