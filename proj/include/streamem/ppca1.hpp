#pragma once

#include "streamem/model.hpp"

namespace streamem {

// Single-factor probabilistic PCA: y = u * x + noise, with scalar latent
// x ~ N(0, 1) and isotropic noise N(0, lambda * I_d). Marginally
// y ~ N(0, uu' + lambda I_d).
//
// Packing:
//   ParameterPoint theta = [u(0..d-1); lambda], size d+1
//   SufficientStat s = [s0; s1(0..d-1); s2], size d+2, the conditional
//   expectations of (|y|^2, x*y, x^2) given y.
//
// All likelihood-side operations run in O(d) through the rank-one structure
// of the covariance; no d x d matrix is ever formed.
class Ppca1Model : public Model {
public:
  // Lower bound on the admissible second-moment statistic s2.
  static constexpr double kMinSecondMoment = 1e-12;

  explicit Ppca1Model(int dim);

  std::string name() const override { return "ppca1"; }
  int stat_dim() const override { return dim_ + 2; }
  int param_dim() const override { return dim_ + 1; }
  int obs_dim() const override { return dim_; }
  int dim() const { return dim_; }

  bool valid_parameter(const ParameterPoint& theta) const override;
  bool admissible(const SufficientStat& s) const override;
  void check_observation(const Observation& y) const override;

  SufficientStat estep(const ParameterPoint& theta, const Observation& y) const override;
  ParameterPoint mstep(const SufficientStat& s) const override;
  double log_likelihood(const ParameterPoint& theta, const Observation& y) const override;

  bool has_gradients() const override { return true; }
  int reduced_dim() const override { return dim_ + 1; }
  Vector score(const ParameterPoint& theta, const Observation& y) const override;
  Matrix complete_fisher(const ParameterPoint& theta) const override;
  Vector to_reduced(const ParameterPoint& theta) const override { return theta; }
  ParameterPoint from_reduced(const Vector& r) const override;

  bool project_interior(ParameterPoint& theta, double eps) const override;
  std::vector<std::string> param_names() const override;

  ParameterPoint pack(const Vector& u, double lambda) const;
  Vector factor_loading(const ParameterPoint& theta) const { return theta.head(dim_); }
  double noise_variance(const ParameterPoint& theta) const { return theta[dim_]; }

private:
  void check_parameter(const ParameterPoint& theta) const;
  int dim_;
};

}  // namespace streamem
