#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace streamem {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Flat coordinate vectors. Each model documents its packing next to its
// class definition; estimators treat these as opaque points.
using SufficientStat = Vector;
using ParameterPoint = Vector;
using Observation = Vector;

// A parameter or observation outside the model's domain. The message names
// the violated constraint.
class DomainError : public std::domain_error {
public:
  explicit DomainError(const std::string& msg) : std::domain_error(msg) {}
};

// A statistic outside the region where the M-step is well posed. Streaming
// estimators catch exactly this type, keep the previous parameter and go on
// accumulating.
class InadmissibleStatError : public DomainError {
public:
  explicit InadmissibleStatError(const std::string& msg) : DomainError(msg) {}
};

// Bad run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable or malformed data file (CLI exit code 3).
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Breakdown while computing (CLI exit code 4): solver failure, too many
// failed replications, and similar.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace streamem
