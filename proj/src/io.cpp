#include "streamem/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "json_support.hpp"

namespace streamem {

namespace jsupport {

void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

json parse_text(const std::string& text, const std::string& where) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError(where + ": malformed JSON");
  return j;
}

json load_file(const std::string& path, const std::string& where) {
  std::ifstream in(path);
  if (!in) throw ConfigError(where + ": cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), where + " '" + path + "'");
}

Vector vec_from(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw ConfigError(where + ": expected an array of numbers");
  Vector v(arr.size());
  Eigen::Index i = 0;
  for (const auto& x : arr) {
    if (!x.is_number()) throw ConfigError(where + ": expected an array of numbers");
    v[i++] = x.get<double>();
  }
  return v;
}

json vec_to(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector loading_from(const json& v, Eigen::Index dim, const std::string& where) {
  if (v.is_array()) {
    Vector u = vec_from(v, where);
    if (u.size() != dim)
      throw ConfigError(where + ": expected " + std::to_string(dim) + " entries, got " +
                        std::to_string(u.size()));
    return u;
  }
  if (v.is_object()) {
    require_keys(v, {"e1-norm-sq", "fill-norm-sq"}, where);
    if (v.size() != 1) throw ConfigError(where + ": give exactly one generator form");
    Vector u;
    if (v.contains("e1-norm-sq")) {
      const double nsq = v.at("e1-norm-sq").get<double>();
      if (!(nsq >= 0.0)) throw ConfigError(where + ": e1-norm-sq must be >= 0");
      u = Vector::Zero(dim);
      u[0] = std::sqrt(nsq);
    } else {
      const double nsq = v.at("fill-norm-sq").get<double>();
      if (!(nsq >= 0.0)) throw ConfigError(where + ": fill-norm-sq must be >= 0");
      u = Vector::Constant(dim, std::sqrt(nsq / static_cast<double>(dim)));
    }
    return u;
  }
  throw ConfigError(where + ": expected an array or a generator object");
}

FitSpec fit_spec_from(const json& obj, const std::string& where) {
  require_keys(obj,
               {"algo", "label", "iters", "tours", "alpha", "gammas", "freeze", "minibatch",
                "avg-start", "scan", "scan-seed", "map-prior"},
               where);
  if (!obj.contains("algo")) throw ConfigError(where + ": missing 'algo'");
  FitSpec spec;
  spec.algo = algo_from_string(obj.at("algo").get<std::string>());
  spec.label = obj.value("label", std::string());
  spec.iterations = obj.value("iters", 20);
  spec.tours = obj.value("tours", 1);
  spec.alpha = obj.value("alpha", 0.6);
  if (obj.contains("gammas")) {
    const Vector g = vec_from(obj.at("gammas"), where + ".gammas");
    spec.gammas.assign(g.data(), g.data() + g.size());
  }
  spec.freeze = obj.value("freeze", std::int64_t{5});
  spec.minibatch = obj.value("minibatch", Eigen::Index{1});
  spec.avg_start = obj.value("avg-start", -1.0);
  const std::string scan = obj.value("scan", std::string("systematic"));
  if (scan == "systematic") {
    spec.scan.mode = ScanOrder::Mode::systematic;
  } else if (scan == "random") {
    spec.scan.mode = ScanOrder::Mode::random_with_replacement;
  } else {
    throw ConfigError(where + ": scan must be 'systematic' or 'random', got '" + scan + "'");
  }
  spec.scan.seed = obj.value("scan-seed", std::uint64_t{0});
  if (obj.contains("map-prior"))
    spec.prior_stat = vec_from(obj.at("map-prior"), where + ".map-prior");
  if (spec.iterations < 0) throw ConfigError(where + ": iters must be >= 0");
  if (spec.tours < 1) throw ConfigError(where + ": tours must be >= 1");
  return spec;
}

ExperimentPlan plan_from(const json& obj) {
  require_keys(obj,
               {"name", "model", "dim", "true-u", "true-lambda", "weights", "means", "init",
                "init-u", "init-lambda", "init-weights", "init-means", "init-low",
                "init-high", "data-sizes", "fixed-data", "replications", "master-seed",
                "metric", "estimators", "workers"},
               "plan");
  ExperimentPlan plan;
  plan.name = obj.value("name", std::string());
  if (!obj.contains("model")) throw ConfigError("plan: missing 'model'");
  plan.model_kind = obj.at("model").get<std::string>();

  if (plan.model_kind == "ppca1") {
    if (!obj.contains("dim")) throw ConfigError("plan: ppca1 needs 'dim'");
    plan.dim = obj.at("dim").get<int>();
    if (!obj.contains("true-u") || !obj.contains("true-lambda"))
      throw ConfigError("plan: ppca1 needs 'true-u' and 'true-lambda'");
    plan.true_u = loading_from(obj.at("true-u"), plan.dim, "plan.true-u");
    plan.true_lambda = obj.at("true-lambda").get<double>();
  } else if (plan.model_kind == "poisson-mix") {
    if (!obj.contains("weights") || !obj.contains("means"))
      throw ConfigError("plan: poisson-mix needs 'weights' and 'means'");
    plan.true_weights = vec_from(obj.at("weights"), "plan.weights");
    plan.true_means = vec_from(obj.at("means"), "plan.means");
  } else {
    throw ConfigError("plan: unknown model '" + plan.model_kind + "'");
  }

  const std::string init = obj.value("init", std::string("fixed"));
  if (init == "fixed") {
    plan.init = ExperimentPlan::Init::fixed;
    if (plan.model_kind == "ppca1") {
      if (!obj.contains("init-u") || !obj.contains("init-lambda"))
        throw ConfigError("plan: fixed ppca1 init needs 'init-u' and 'init-lambda'");
      const Vector u0 = loading_from(obj.at("init-u"), plan.dim, "plan.init-u");
      plan.theta0 = Vector(plan.dim + 1);
      plan.theta0.head(plan.dim) = u0;
      plan.theta0[plan.dim] = obj.at("init-lambda").get<double>();
    } else {
      if (!obj.contains("init-weights") || !obj.contains("init-means"))
        throw ConfigError("plan: fixed mixture init needs 'init-weights' and 'init-means'");
      const Vector w = vec_from(obj.at("init-weights"), "plan.init-weights");
      const Vector b = vec_from(obj.at("init-means"), "plan.init-means");
      if (w.size() != b.size()) throw ConfigError("plan: init weights/means sizes differ");
      plan.theta0 = Vector(2 * w.size());
      plan.theta0.head(w.size()) = w;
      plan.theta0.tail(b.size()) = b;
    }
  } else if (init == "uniform-means") {
    plan.init = ExperimentPlan::Init::uniform_means;
    if (!obj.contains("init-weights"))
      throw ConfigError("plan: uniform-means init needs 'init-weights'");
    plan.init_weights = vec_from(obj.at("init-weights"), "plan.init-weights");
    plan.init_low = obj.value("init-low", 0.5);
    plan.init_high = obj.value("init-high", 5.0);
  } else {
    throw ConfigError("plan: init must be 'fixed' or 'uniform-means', got '" + init + "'");
  }

  if (!obj.contains("data-sizes")) throw ConfigError("plan: missing 'data-sizes'");
  for (const auto& n : obj.at("data-sizes")) {
    if (!n.is_number_integer()) throw ConfigError("plan: data-sizes must be integers");
    plan.data_sizes.push_back(n.get<Eigen::Index>());
  }
  plan.fixed_data = obj.value("fixed-data", false);
  if (!obj.contains("replications")) throw ConfigError("plan: missing 'replications'");
  plan.replications = obj.at("replications").get<int>();
  if (!obj.contains("master-seed"))
    throw ConfigError("plan: missing 'master-seed' (no wall-clock fallback)");
  plan.master_seed = obj.at("master-seed").get<std::uint64_t>();
  plan.seed_set = true;
  if (!obj.contains("metric")) throw ConfigError("plan: missing 'metric'");
  plan.metric = obj.at("metric").get<std::string>();
  if (!obj.contains("estimators")) throw ConfigError("plan: missing 'estimators'");
  const auto& arms = obj.at("estimators");
  if (!arms.is_array()) throw ConfigError("plan: 'estimators' must be an array");
  int idx = 0;
  for (const auto& arm : arms) {
    plan.estimators.push_back(
        fit_spec_from(arm, "plan.estimators[" + std::to_string(idx) + "]"));
    ++idx;
  }
  plan.workers = obj.value("workers", 0);
  return plan;
}

json report_to(const ExperimentReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row{{"estimator", r.estimator}, {"N", r.data_size},   {"checkpoint", r.checkpoint},
             {"metric", r.metric},       {"q05", r.q05},       {"q25", r.q25},
             {"q50", r.q50},             {"q75", r.q75},       {"q95", r.q95},
             {"mean", r.mean},           {"sd", r.sd},         {"samples", r.samples}};
    if (r.has_band) {
      row["band-lo"] = r.band_lo;
      row["band-hi"] = r.band_hi;
    }
    rows.push_back(std::move(row));
  }
  return json{{"plan", report.plan_name},
              {"total-runs", report.total_runs},
              {"failed-runs", report.failed_runs},
              {"failures", report.failures},
              {"rows", std::move(rows)}};
}

}  // namespace jsupport

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& tok, bool& ok) {
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
  double v = 0.0;
  const auto res = std::from_chars(begin, end, v);
  ok = res.ec == std::errc() && res.ptr == end && begin != end;
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_dataset_csv(const std::string& path, const Matrix& data,
                       const std::vector<std::string>& columns) {
  if (static_cast<Eigen::Index>(columns.size()) != data.cols())
    throw DataError("dataset write: " + std::to_string(columns.size()) + " column names for " +
                    std::to_string(data.cols()) + " columns");
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (j) out << ',';
    out << columns[j];
  }
  out << '\n';
  for (Eigen::Index t = 0; t < data.rows(); ++t) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (j) out << ',';
      out << format_double(data(t, j));
    }
    out << '\n';
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

Matrix read_dataset_csv(const std::string& path, Eigen::Index expected_cols) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  Eigen::Index cols = -1;
  std::size_t lineno = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto toks = split_csv(line);
    std::vector<double> row;
    row.reserve(toks.size());
    bool numeric = true;
    for (const auto& tok : toks) {
      bool ok = false;
      const double v = parse_double(tok, ok);
      if (!ok) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (first_content_line) {  // header line
        cols = static_cast<Eigen::Index>(toks.size());
        first_content_line = false;
        continue;
      }
      throw DataError(path + ":" + std::to_string(lineno) + ": non-numeric value");
    }
    first_content_line = false;
    if (cols < 0) cols = static_cast<Eigen::Index>(row.size());
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(cols) + " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (cols < 0) throw DataError(path + ": empty file, expected at least a header");
  if (expected_cols >= 0 && cols != expected_cols)
    throw DataError(path + ": expected " + std::to_string(expected_cols) + " columns, found " +
                    std::to_string(cols));
  Matrix data(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (Eigen::Index j = 0; j < cols; ++j) data(static_cast<Eigen::Index>(t), j) = rows[t][j];
  return data;
}

void write_trajectory_csv(const std::string& path, const Model& model,
                          const Trajectory& trajectory) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "step";
  for (const auto& name : model.param_names()) out << ',' << name;
  out << ",loglik\n";
  for (const auto& rec : trajectory.records) {
    out << rec.step;
    for (Eigen::Index j = 0; j < rec.theta.size(); ++j) out << ',' << format_double(rec.theta[j]);
    out << ',' << format_double(rec.loglik) << '\n';
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

void write_report_csv(const std::string& path, const ExperimentReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "estimator,N,checkpoint,metric,quantile,value\n";
  auto emit = [&](const ReportRow& r, const char* q, double v) {
    out << r.estimator << ',' << r.data_size << ',' << r.checkpoint << ',' << r.metric << ','
        << q << ',' << format_double(v) << '\n';
  };
  for (const auto& r : report.rows) {
    emit(r, "q05", r.q05);
    emit(r, "q25", r.q25);
    emit(r, "q50", r.q50);
    emit(r, "q75", r.q75);
    emit(r, "q95", r.q95);
    emit(r, "mean", r.mean);
    emit(r, "sd", r.sd);
    if (r.has_band) {
      emit(r, "band-lo", r.band_lo);
      emit(r, "band-hi", r.band_hi);
    }
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

std::string report_to_json(const ExperimentReport& report) {
  return jsupport::report_to(report).dump(2);
}

ExperimentPlan parse_plan_json(const std::string& text) {
  return jsupport::plan_from(jsupport::parse_text(text, "plan"));
}

ExperimentPlan load_plan(const std::string& path) {
  return jsupport::plan_from(jsupport::load_file(path, "plan"));
}

}  // namespace streamem
