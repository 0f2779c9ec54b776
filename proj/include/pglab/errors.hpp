#pragma once

#include <stdexcept>
#include <string>

namespace pglab {

/// Caller passed arguments outside an operation's domain.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A modelling assumption failed at the point of use: non-unique
/// stationary distribution, singular fundamental matrix, and so on.
class AssumptionViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// score() requested for a control with zero probability.
class SingularScoreError : public AssumptionViolation {
 public:
  using AssumptionViolation::AssumptionViolation;
};

/// A non-finite score reached the GPOMDP trace.
class EstimatorPoisonedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model or experiment configuration could not be loaded.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pglab
