#include "streamem/mixture.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace streamem {

namespace {

// Sequential left-to-right sum. Renormalization and its exactness check must
// share one summation order, so Eigen's vectorized sum is avoided here.
double sum_seq(const Eigen::Ref<const Vector>& v) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += v[i];
  return acc;
}

// Divides by the total and pushes the leftover onto the largest entry so the
// sequential sum comes out exactly one. Re-summing after the correction can
// round again and even cycle between 1 +/- 1 ulp, so after a few passes the
// last entry is pinned to 1 - prefix, which makes fl(prefix + fl(1 - prefix))
// equal one exactly for any prefix in [0, 1).
void renormalize_simplex(Eigen::Ref<Vector> w) {
  const double total = sum_seq(w);
  w /= total;
  for (int pass = 0; pass < 4; ++pass) {
    const double resid = 1.0 - sum_seq(w);
    if (resid == 0.0) return;
    Eigen::Index imax = 0;
    w.maxCoeff(&imax);
    w[imax] += resid;
  }
  const double prefix = sum_seq(w.head(w.size() - 1));
  w[w.size() - 1] = 1.0 - prefix;
}

}  // namespace

Vector ComponentFamily::log_density_grad(const Vector&, const Observation&) const {
  throw DomainError(name() + ": log-density gradient is not available for this family");
}

Matrix ComponentFamily::fisher(const Vector&) const {
  throw DomainError(name() + ": fisher information is not available for this family");
}

bool PoissonFamily::valid_parameter(const Vector& beta) const {
  return beta.size() == 1 && std::isfinite(beta[0]) && beta[0] > 0.0;
}

void PoissonFamily::check_observation(const Observation& y) const {
  if (y.size() != 1)
    throw DomainError("poisson: observation has size " + std::to_string(y.size()) +
                      ", expected 1");
  const double v = y[0];
  if (!std::isfinite(v) || v < 0.0 || v != std::floor(v))
    throw DomainError("poisson: observation must be a nonnegative integer, got " +
                      std::to_string(v));
}

Vector PoissonFamily::mle(const Vector& mean_stat) const {
  if (mean_stat.size() != 1 || !std::isfinite(mean_stat[0]))
    throw InadmissibleStatError("poisson: mean statistic malformed or non-finite");
  if (!(mean_stat[0] > 0.0))
    throw InadmissibleStatError(
        "poisson: mean statistic is zero; the maximizer sits on the boundary");
  return mean_stat;
}

double PoissonFamily::log_density(const Vector& beta, const Observation& y) const {
  if (!valid_parameter(beta))
    throw DomainError("poisson: mean must be positive and finite");
  check_observation(y);
  return -beta[0] + y[0] * std::log(beta[0]) - std::lgamma(y[0] + 1.0);
}

Vector PoissonFamily::log_density_grad(const Vector& beta, const Observation& y) const {
  if (!valid_parameter(beta))
    throw DomainError("poisson: mean must be positive and finite");
  check_observation(y);
  Vector g(1);
  g[0] = y[0] / beta[0] - 1.0;
  return g;
}

Matrix PoissonFamily::fisher(const Vector& beta) const {
  if (!valid_parameter(beta))
    throw DomainError("poisson: mean must be positive and finite");
  Matrix info(1, 1);
  info(0, 0) = 1.0 / beta[0];
  return info;
}

bool PoissonFamily::project_interior(Vector& beta, double eps) const {
  if (beta.size() != 1 || !std::isfinite(beta[0]))
    throw DomainError("poisson: cannot project a malformed mean");
  if (beta[0] < eps) {
    beta[0] = eps;
    return true;
  }
  return false;
}

MixtureModel::MixtureModel(std::shared_ptr<const ComponentFamily> family, int components)
    : family_(std::move(family)), m_(components) {
  if (!family_) throw std::invalid_argument("mixture: component family must not be null");
  if (m_ < 1) throw std::invalid_argument("mixture: component count must be >= 1");
  fp_ = family_->param_dim();
  fs_ = family_->stat_dim();
}

std::string MixtureModel::name() const {
  return family_->name() + "-mixture-" + std::to_string(m_);
}

void MixtureModel::check_parameter(const ParameterPoint& theta) const {
  if (theta.size() != param_dim())
    throw DomainError(name() + ": parameter has size " + std::to_string(theta.size()) +
                      ", expected " + std::to_string(param_dim()));
  if (!theta.allFinite()) throw DomainError(name() + ": parameter has non-finite entries");
  double total = 0.0;
  for (int i = 0; i < m_; ++i) {
    if (theta[i] < 0.0)
      throw DomainError(name() + ": weight " + std::to_string(i + 1) + " is negative");
    total += theta[i];
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw DomainError(name() + ": weights sum to " + std::to_string(total) + ", not 1");
  for (int i = 0; i < m_; ++i) {
    if (!family_->valid_parameter(theta.segment(m_ + i * fp_, fp_)))
      throw DomainError(name() + ": component " + std::to_string(i + 1) +
                        " parameter is outside the " + family_->name() + " domain");
  }
}

void MixtureModel::check_interior(const ParameterPoint& theta) const {
  check_parameter(theta);
  for (int i = 0; i < m_; ++i) {
    if (!(theta[i] > 0.0))
      throw DomainError(name() + ": weight " + std::to_string(i + 1) +
                        " sits on the simplex boundary; interior point required");
  }
}

bool MixtureModel::valid_parameter(const ParameterPoint& theta) const {
  try {
    check_parameter(theta);
  } catch (const DomainError&) {
    return false;
  }
  return true;
}

bool MixtureModel::admissible(const SufficientStat& s) const {
  if (s.size() != stat_dim() || !s.allFinite()) return false;
  for (int i = 0; i < m_; ++i) {
    if (!(s[i] >= kMinWeightStat)) return false;
  }
  return true;
}

void MixtureModel::check_observation(const Observation& y) const {
  family_->check_observation(y);
}

Vector MixtureModel::component_log_terms(const ParameterPoint& theta,
                                         const Observation& y) const {
  check_parameter(theta);
  check_observation(y);
  Vector terms(m_);
  for (int i = 0; i < m_; ++i) {
    const double w = theta[i];
    terms[i] = w > 0.0
                   ? std::log(w) + family_->log_density(theta.segment(m_ + i * fp_, fp_), y)
                   : -std::numeric_limits<double>::infinity();
  }
  return terms;
}

Vector MixtureModel::posteriors(const ParameterPoint& theta, const Observation& y) const {
  const Vector terms = component_log_terms(theta, y);
  const double peak = terms.maxCoeff();
  if (!std::isfinite(peak))
    throw DomainError(name() + ": every component has zero density at observation y = " +
                      std::to_string(y[0]));
  // Scalar exp: Eigen's vectorized exp clamps -inf to a denormal, which
  // would leak mass onto zero-weight components.
  Vector p(m_);
  for (int i = 0; i < m_; ++i) p[i] = std::exp(terms[i] - peak);
  p /= p.sum();
  return p;
}

SufficientStat MixtureModel::estep(const ParameterPoint& theta, const Observation& y) const {
  const Vector p = posteriors(theta, y);
  SufficientStat s(stat_dim());
  s.head(m_) = p;
  const Vector base = family_->stat(y);
  for (int i = 0; i < m_; ++i) s.segment(m_ + i * fs_, fs_) = p[i] * base;
  return s;
}

ParameterPoint MixtureModel::mstep(const SufficientStat& s) const {
  if (s.size() != stat_dim() || !s.allFinite())
    throw InadmissibleStatError(name() + ": statistic malformed or non-finite");
  for (int i = 0; i < m_; ++i) {
    if (!(s[i] >= kMinWeightStat))
      throw InadmissibleStatError(name() + ": weight statistic for component " +
                                  std::to_string(i + 1) + " is " + std::to_string(s[i]) +
                                  ", below threshold");
  }
  ParameterPoint theta(param_dim());
  theta.head(m_) = s.head(m_);
  renormalize_simplex(theta.head(m_));
  for (int i = 0; i < m_; ++i) {
    theta.segment(m_ + i * fp_, fp_) = family_->mle(s.segment(m_ + i * fs_, fs_) / s[i]);
  }
  return theta;
}

double MixtureModel::log_likelihood(const ParameterPoint& theta, const Observation& y) const {
  const Vector terms = component_log_terms(theta, y);
  const double peak = terms.maxCoeff();
  if (!std::isfinite(peak))
    throw DomainError(name() + ": every component has zero density at observation y = " +
                      std::to_string(y[0]));
  return peak + std::log((terms.array() - peak).exp().sum());
}

Vector MixtureModel::score(const ParameterPoint& theta, const Observation& y) const {
  if (!has_gradients())
    throw DomainError(name() + ": score is not available for this component family");
  check_interior(theta);
  const Vector p = posteriors(theta, y);
  Vector grad(reduced_dim());
  const double tail = p[m_ - 1] / theta[m_ - 1];
  for (int i = 0; i + 1 < m_; ++i) grad[i] = p[i] / theta[i] - tail;
  for (int i = 0; i < m_; ++i) {
    grad.segment((m_ - 1) + i * fp_, fp_) =
        p[i] * family_->log_density_grad(theta.segment(m_ + i * fp_, fp_), y);
  }
  return grad;
}

Matrix MixtureModel::complete_fisher(const ParameterPoint& theta) const {
  if (!has_gradients())
    throw DomainError(name() + ": complete_fisher is not available for this component family");
  check_interior(theta);
  Matrix info = Matrix::Zero(reduced_dim(), reduced_dim());
  const double tail = 1.0 / theta[m_ - 1];
  if (m_ > 1) {
    info.topLeftCorner(m_ - 1, m_ - 1).setConstant(tail);
    for (int i = 0; i + 1 < m_; ++i) info(i, i) += 1.0 / theta[i];
  }
  for (int i = 0; i < m_; ++i) {
    const int o = (m_ - 1) + i * fp_;
    info.block(o, o, fp_, fp_) =
        theta[i] * family_->fisher(theta.segment(m_ + i * fp_, fp_));
  }
  return info;
}

Vector MixtureModel::to_reduced(const ParameterPoint& theta) const {
  if (theta.size() != param_dim())
    throw DomainError(name() + ": parameter has size " + std::to_string(theta.size()) +
                      ", expected " + std::to_string(param_dim()));
  Vector r(reduced_dim());
  r.head(m_ - 1) = theta.head(m_ - 1);
  r.tail(m_ * fp_) = theta.tail(m_ * fp_);
  return r;
}

ParameterPoint MixtureModel::from_reduced(const Vector& r) const {
  if (r.size() != reduced_dim())
    throw DomainError(name() + ": reduced point has size " + std::to_string(r.size()) +
                      ", expected " + std::to_string(reduced_dim()));
  ParameterPoint theta(param_dim());
  theta.head(m_ - 1) = r.head(m_ - 1);
  theta[m_ - 1] = 1.0 - sum_seq(r.head(m_ - 1));
  theta.tail(m_ * fp_) = r.tail(m_ * fp_);
  return theta;
}

bool MixtureModel::project_interior(ParameterPoint& theta, double eps) const {
  if (theta.size() != param_dim() || !theta.allFinite())
    throw DomainError(name() + ": cannot project a malformed parameter");
  bool moved = false;
  for (int i = 0; i < m_; ++i) {
    const double clamped = std::min(std::max(theta[i], eps), 1.0 - eps);
    if (clamped != theta[i]) {
      theta[i] = clamped;
      moved = true;
    }
  }
  if (moved) renormalize_simplex(theta.head(m_));
  for (int i = 0; i < m_; ++i) {
    Vector beta = theta.segment(m_ + i * fp_, fp_);
    if (family_->project_interior(beta, eps)) {
      theta.segment(m_ + i * fp_, fp_) = beta;
      moved = true;
    }
  }
  return moved;
}

void MixtureModel::renormalize(ParameterPoint& theta) const {
  if (theta.size() != param_dim() || !theta.allFinite())
    throw DomainError(name() + ": cannot renormalize a malformed parameter");
  renormalize_simplex(theta.head(m_));
}

std::vector<std::string> MixtureModel::param_names() const {
  std::vector<std::string> names;
  names.reserve(param_dim());
  for (int i = 1; i <= m_; ++i) names.push_back("omega" + std::to_string(i));
  for (int i = 1; i <= m_; ++i) {
    if (fp_ == 1) {
      names.push_back("beta" + std::to_string(i));
    } else {
      for (int j = 1; j <= fp_; ++j)
        names.push_back("beta" + std::to_string(i) + "_" + std::to_string(j));
    }
  }
  return names;
}

ParameterPoint MixtureModel::pack(const Vector& weights, const Matrix& betas) const {
  if (weights.size() != m_ || betas.rows() != m_ || betas.cols() != fp_)
    throw DomainError(name() + ": pack expects " + std::to_string(m_) + " weights and a " +
                      std::to_string(m_) + " x " + std::to_string(fp_) + " component block");
  ParameterPoint theta(param_dim());
  theta.head(m_) = weights;
  for (int i = 0; i < m_; ++i) theta.segment(m_ + i * fp_, fp_) = betas.row(i).transpose();
  return theta;
}

MixtureModel make_poisson_mixture(int components) {
  return MixtureModel(std::make_shared<const PoissonFamily>(), components);
}

}  // namespace streamem
