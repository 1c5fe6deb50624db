#pragma once

#include <string>
#include <vector>

#include "streamem/types.hpp"

namespace streamem {

// Contract a latent-variable model implements so the estimators can be
// written once against it. The complete-data density must be an exponential
// family in a statistic s(x, y); everything the estimators touch is the
// triple (estep, mstep, log_likelihood) plus domain checks.
//
// A Model instance holds fixed structure only (dimensions, component
// family). It never carries fitted state, so one instance can serve many
// concurrent fits.
class Model {
public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual int stat_dim() const = 0;
  virtual int param_dim() const = 0;
  virtual int obs_dim() const = 0;

  // True when theta is a usable point of the parameter set (boundary
  // included where the likelihood still evaluates).
  virtual bool valid_parameter(const ParameterPoint& theta) const = 0;

  // Membership in the convex statistic region where mstep is well posed,
  // including the positivity thresholds that keep its divisions stable.
  virtual bool admissible(const SufficientStat& s) const = 0;

  // Throws DomainError naming the offending entry.
  virtual void check_observation(const Observation& y) const = 0;

  // Conditional expectation of the complete-data statistic given y at theta.
  virtual SufficientStat estep(const ParameterPoint& theta, const Observation& y) const = 0;

  // Complete-data maximum likelihood map; throws InadmissibleStatError when
  // s is outside the admissible region.
  virtual ParameterPoint mstep(const SufficientStat& s) const = 0;

  // log f_theta(y), the marginal density of one observation.
  virtual double log_likelihood(const ParameterPoint& theta, const Observation& y) const = 0;

  // Gradient support, in the model's reduced (unconstrained-count)
  // parameterization. Models that do not opt in cannot be used with
  // gradient-based updates.
  virtual bool has_gradients() const { return false; }
  virtual int reduced_dim() const { return 0; }

  // d/d(reduced theta) log f_theta(y). Requires theta strictly interior.
  virtual Vector score(const ParameterPoint& theta, const Observation& y) const;

  // Expected complete-data information at theta, reduced coordinates.
  virtual Matrix complete_fisher(const ParameterPoint& theta) const;

  virtual Vector to_reduced(const ParameterPoint& theta) const;
  virtual ParameterPoint from_reduced(const Vector& r) const;

  // Clamps theta into the interior of the constraint set (weights to
  // [eps, 1-eps] then renormalized, positive scalars to >= eps). Returns
  // true when anything moved.
  virtual bool project_interior(ParameterPoint& theta, double eps) const = 0;

  // Scrubs float drift off exact constraints (the weight simplex). No-op
  // for unconstrained models.
  virtual void renormalize(ParameterPoint& /*theta*/) const {}

  // Coordinate labels matching the ParameterPoint packing, used for file
  // headers.
  virtual std::vector<std::string> param_names() const = 0;
};

}  // namespace streamem
