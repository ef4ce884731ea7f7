#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace rsr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Model input that fails structural validation.
class ValidationError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Allocation outside the admissible set of the current state
/// (some jump atom would wipe out more than the whole portfolio).
class FeasibilityError : public std::domain_error {
  using std::domain_error::domain_error;
};

/// Numerical failure: iteration cap, singular system, safety-band breach.
class SolverError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File ingest or emit failure.
class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rsr
