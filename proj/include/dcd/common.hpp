#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace dcd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A user-specified agent set does not induce a connected sub-graph.
struct DisconnectedSubnetwork : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct EmptyConstraint : Error {
  using Error::Error;
};

/// An iterative reference solve hit its iteration cap above tolerance.
struct NoConvergence : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace dcd
