#include "streamem/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace streamem {

Matrix sample_ppca1(const Vector& u, double lambda, Eigen::Index n, std::mt19937_64& rng) {
  if (u.size() < 1 || !u.allFinite())
    throw DomainError("sample_ppca1: factor loading must be a nonempty finite vector");
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw DomainError("sample_ppca1: noise variance must be positive and finite");
  if (n < 0) throw std::invalid_argument("sample_ppca1: draw count must be >= 0");
  const Eigen::Index d = u.size();
  const double sd = std::sqrt(lambda);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(n, d);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double x = normal(rng);
    for (Eigen::Index j = 0; j < d; ++j) out(t, j) = u[j] * x + sd * normal(rng);
  }
  return out;
}

Matrix sample_poisson_mixture(const Vector& weights, const Vector& means, Eigen::Index n,
                              std::mt19937_64& rng) {
  const Eigen::Index m = weights.size();
  if (m < 1 || means.size() != m)
    throw DomainError("sample_poisson_mixture: need matching nonempty weights and means");
  if (!weights.allFinite() || weights.minCoeff() < 0.0 ||
      std::abs(weights.sum() - 1.0) > 1e-9)
    throw DomainError("sample_poisson_mixture: weights must be nonnegative and sum to 1");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(means[i] > 0.0) || !std::isfinite(means[i]))
      throw DomainError("sample_poisson_mixture: means must be positive and finite");
  }
  if (n < 0) throw std::invalid_argument("sample_poisson_mixture: draw count must be >= 0");
  const double total = weights.sum();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix out(n, 1);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double v = unif(rng) * total;
    double acc = 0.0;
    Eigen::Index comp = m - 1;
    for (Eigen::Index i = 0; i < m; ++i) {
      acc += weights[i];
      if (v < acc) {
        comp = i;
        break;
      }
    }
    std::poisson_distribution<long> pois(means[comp]);
    out(t, 0) = static_cast<double>(pois(rng));
  }
  return out;
}

}  // namespace streamem
