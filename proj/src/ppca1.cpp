#include "streamem/ppca1.hpp"

#include <cmath>
#include <stdexcept>

namespace streamem {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
}

Ppca1Model::Ppca1Model(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("ppca1: observation dimension must be >= 1");
}

void Ppca1Model::check_parameter(const ParameterPoint& theta) const {
  if (theta.size() != param_dim())
    throw DomainError("ppca1: parameter has size " + std::to_string(theta.size()) +
                      ", expected " + std::to_string(param_dim()));
  if (!theta.allFinite()) throw DomainError("ppca1: parameter has non-finite entries");
  if (!(theta[dim_] > 0.0))
    throw DomainError("ppca1: noise variance must be positive, got " +
                      std::to_string(theta[dim_]));
}

bool Ppca1Model::valid_parameter(const ParameterPoint& theta) const {
  return theta.size() == param_dim() && theta.allFinite() && theta[dim_] > 0.0;
}

bool Ppca1Model::admissible(const SufficientStat& s) const {
  if (s.size() != stat_dim() || !s.allFinite()) return false;
  const double s2 = s[dim_ + 1];
  if (!(s2 >= kMinSecondMoment)) return false;
  const double s0 = s[0];
  const double cross = s.segment(1, dim_).squaredNorm() / s2;
  return s0 - cross > 0.0;
}

void Ppca1Model::check_observation(const Observation& y) const {
  if (y.size() != dim_)
    throw DomainError("ppca1: observation has size " + std::to_string(y.size()) +
                      ", expected " + std::to_string(dim_));
  if (!y.allFinite()) throw DomainError("ppca1: observation has non-finite entries");
}

SufficientStat Ppca1Model::estep(const ParameterPoint& theta, const Observation& y) const {
  check_parameter(theta);
  check_observation(y);
  const auto u = theta.head(dim_);
  const double lambda = theta[dim_];
  const double g = lambda + u.squaredNorm();
  const double r = u.dot(y) / g;  // E[x | y]
  SufficientStat s(stat_dim());
  s[0] = y.squaredNorm();
  s.segment(1, dim_) = y * r;
  s[dim_ + 1] = lambda / g + r * r;  // E[x^2 | y] = Var(x | y) + E[x | y]^2
  return s;
}

ParameterPoint Ppca1Model::mstep(const SufficientStat& s) const {
  if (s.size() != stat_dim() || !s.allFinite())
    throw InadmissibleStatError("ppca1: statistic malformed or non-finite");
  const double s2 = s[dim_ + 1];
  if (!(s2 >= kMinSecondMoment))
    throw InadmissibleStatError("ppca1: second-moment statistic " + std::to_string(s2) +
                                " below threshold " + std::to_string(kMinSecondMoment));
  const auto s1 = s.segment(1, dim_);
  const double lambda = (s[0] - s1.squaredNorm() / s2) / dim_;
  if (!(lambda > 0.0))
    throw InadmissibleStatError(
        "ppca1: statistic puts the noise variance at the boundary (lambda = " +
        std::to_string(lambda) + ")");
  ParameterPoint theta(param_dim());
  theta.head(dim_) = s1 / s2;
  theta[dim_] = lambda;
  return theta;
}

double Ppca1Model::log_likelihood(const ParameterPoint& theta, const Observation& y) const {
  check_parameter(theta);
  check_observation(y);
  const auto u = theta.head(dim_);
  const double lambda = theta[dim_];
  const double g = lambda + u.squaredNorm();
  const double a = u.dot(y);
  // y' (uu' + lambda I)^{-1} y and log det via the rank-one structure.
  const double quad = (y.squaredNorm() - a * a / g) / lambda;
  const double logdet = (dim_ - 1) * std::log(lambda) + std::log(g);
  return -0.5 * (dim_ * kLog2Pi + logdet + quad);
}

Vector Ppca1Model::score(const ParameterPoint& theta, const Observation& y) const {
  check_parameter(theta);
  check_observation(y);
  const auto u = theta.head(dim_);
  const double lambda = theta[dim_];
  const double g = lambda + u.squaredNorm();
  const double a = u.dot(y);
  const Vector siy = y / lambda - u * (a / (lambda * g));  // Sigma^{-1} y
  const double trace_inv = dim_ / lambda - u.squaredNorm() / (lambda * g);
  Vector grad(param_dim());
  grad.head(dim_) = siy * siy.dot(u) - u / g;  // (Sigma^{-1} y y' Sigma^{-1} - Sigma^{-1}) u
  grad[dim_] = 0.5 * (siy.squaredNorm() - trace_inv);
  return grad;
}

Matrix Ppca1Model::complete_fisher(const ParameterPoint& theta) const {
  check_parameter(theta);
  const double lambda = theta[dim_];
  Matrix info = Matrix::Zero(param_dim(), param_dim());
  info.topLeftCorner(dim_, dim_) = Matrix::Identity(dim_, dim_) / lambda;
  info(dim_, dim_) = dim_ / (2.0 * lambda * lambda);
  return info;
}

ParameterPoint Ppca1Model::from_reduced(const Vector& r) const {
  if (r.size() != param_dim())
    throw DomainError("ppca1: reduced point has size " + std::to_string(r.size()) +
                      ", expected " + std::to_string(param_dim()));
  return r;
}

bool Ppca1Model::project_interior(ParameterPoint& theta, double eps) const {
  if (theta.size() != param_dim() || !theta.allFinite())
    throw DomainError("ppca1: cannot project a malformed parameter");
  if (theta[dim_] < eps) {
    theta[dim_] = eps;
    return true;
  }
  return false;
}

std::vector<std::string> Ppca1Model::param_names() const {
  std::vector<std::string> names;
  names.reserve(param_dim());
  for (int i = 1; i <= dim_; ++i) names.push_back("u" + std::to_string(i));
  names.push_back("lambda");
  return names;
}

ParameterPoint Ppca1Model::pack(const Vector& u, double lambda) const {
  if (u.size() != dim_)
    throw DomainError("ppca1: factor loading has size " + std::to_string(u.size()) +
                      ", expected " + std::to_string(dim_));
  ParameterPoint theta(param_dim());
  theta.head(dim_) = u;
  theta[dim_] = lambda;
  return theta;
}

}  // namespace streamem
