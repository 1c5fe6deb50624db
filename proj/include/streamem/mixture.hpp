#pragma once

#include <memory>

#include "streamem/model.hpp"

namespace streamem {

// One exponential-family component of a finite mixture, in mean-value
// parameterization: the weighted M-step of the mixture reduces to
// mle(weighted average of stat(y)).
class ComponentFamily {
public:
  virtual ~ComponentFamily() = default;

  virtual std::string name() const = 0;
  virtual int stat_dim() const = 0;
  virtual int param_dim() const = 0;
  virtual int obs_dim() const = 0;

  virtual bool valid_parameter(const Vector& beta) const = 0;
  virtual void check_observation(const Observation& y) const = 0;

  // Complete-data statistic s(y) of the component family.
  virtual Vector stat(const Observation& y) const = 0;

  // Maximizer of the weighted complete-data log-likelihood given the
  // weighted mean statistic; throws InadmissibleStatError on the boundary.
  virtual Vector mle(const Vector& mean_stat) const = 0;

  virtual double log_density(const Vector& beta, const Observation& y) const = 0;

  virtual bool has_gradients() const { return false; }
  virtual Vector log_density_grad(const Vector& beta, const Observation& y) const;
  // Information of one complete-data draw from the component at beta.
  virtual Matrix fisher(const Vector& beta) const;

  // Clamps beta into the interior; returns true when anything moved.
  virtual bool project_interior(Vector& beta, double eps) const = 0;
};

// Poisson counts with mean beta > 0. stat(y) = y and mle is the identity.
class PoissonFamily : public ComponentFamily {
public:
  std::string name() const override { return "poisson"; }
  int stat_dim() const override { return 1; }
  int param_dim() const override { return 1; }
  int obs_dim() const override { return 1; }

  bool valid_parameter(const Vector& beta) const override;
  void check_observation(const Observation& y) const override;
  Vector stat(const Observation& y) const override { return y; }
  Vector mle(const Vector& mean_stat) const override;
  double log_density(const Vector& beta, const Observation& y) const override;

  bool has_gradients() const override { return true; }
  Vector log_density_grad(const Vector& beta, const Observation& y) const override;
  Matrix fisher(const Vector& beta) const override;
  bool project_interior(Vector& beta, double eps) const override;
};

// Finite mixture of m identical-family components.
//
// Packing (fp = family param_dim, fs = family stat_dim):
//   ParameterPoint theta = [omega(0..m-1); beta_0(fp); ...; beta_{m-1}(fp)]
//   SufficientStat s = [p(0..m-1); p_0 s(y)(fs); ...; p_{m-1} s(y)(fs)]
// where p are the posterior component probabilities.
//
// Reduced parameterization drops the last weight:
//   [omega(0..m-2); beta_0; ...; beta_{m-1}], size (m-1) + m*fp.
class MixtureModel : public Model {
public:
  // Lower bound on the admissible per-component weight statistics.
  static constexpr double kMinWeightStat = 1e-12;

  MixtureModel(std::shared_ptr<const ComponentFamily> family, int components);

  std::string name() const override;
  int stat_dim() const override { return m_ * (1 + fs_); }
  int param_dim() const override { return m_ * (1 + fp_); }
  int obs_dim() const override { return family_->obs_dim(); }
  int components() const { return m_; }
  const ComponentFamily& family() const { return *family_; }

  bool valid_parameter(const ParameterPoint& theta) const override;
  bool admissible(const SufficientStat& s) const override;
  void check_observation(const Observation& y) const override;

  SufficientStat estep(const ParameterPoint& theta, const Observation& y) const override;
  ParameterPoint mstep(const SufficientStat& s) const override;
  double log_likelihood(const ParameterPoint& theta, const Observation& y) const override;

  bool has_gradients() const override { return family_->has_gradients(); }
  int reduced_dim() const override { return (m_ - 1) + m_ * fp_; }
  Vector score(const ParameterPoint& theta, const Observation& y) const override;
  Matrix complete_fisher(const ParameterPoint& theta) const override;
  Vector to_reduced(const ParameterPoint& theta) const override;
  ParameterPoint from_reduced(const Vector& r) const override;

  bool project_interior(ParameterPoint& theta, double eps) const override;
  void renormalize(ParameterPoint& theta) const override;
  std::vector<std::string> param_names() const override;

  // Posterior component probabilities at theta given y; sums to one.
  Vector posteriors(const ParameterPoint& theta, const Observation& y) const;

  ParameterPoint pack(const Vector& weights, const Matrix& betas) const;
  Vector weights(const ParameterPoint& theta) const { return theta.head(m_); }
  Vector component_param(const ParameterPoint& theta, int i) const {
    return theta.segment(m_ + i * fp_, fp_);
  }

private:
  void check_parameter(const ParameterPoint& theta) const;
  void check_interior(const ParameterPoint& theta) const;
  // Per-component log omega_i + log g_i(y); validates inputs.
  Vector component_log_terms(const ParameterPoint& theta, const Observation& y) const;

  std::shared_ptr<const ComponentFamily> family_;
  int m_;
  int fp_;
  int fs_;
};

MixtureModel make_poisson_mixture(int components);

}  // namespace streamem
