#include "streamem/model.hpp"

namespace streamem {

Vector Model::score(const ParameterPoint&, const Observation&) const {
  throw DomainError(name() + ": score is not available for this model");
}

Matrix Model::complete_fisher(const ParameterPoint&) const {
  throw DomainError(name() + ": complete_fisher is not available for this model");
}

Vector Model::to_reduced(const ParameterPoint&) const {
  throw DomainError(name() + ": reduced parameterization is not available for this model");
}

ParameterPoint Model::from_reduced(const Vector&) const {
  throw DomainError(name() + ": reduced parameterization is not available for this model");
}

}  // namespace streamem
