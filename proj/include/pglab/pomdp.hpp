#pragma once

// Finite POMDPs: model, validation, and trajectory simulation.

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pglab/linalg.hpp"
#include "pglab/policy.hpp"

namespace pglab {

inline constexpr double kStochasticTolerance = 1e-12;

/// n states, N controls, M observations.
///
/// transitions[u](i, j) = p_ij(u); observation_dist(i, y) = nu_y(i);
/// rewards[i] = r(i). Immutable once validated.
struct PomdpModel {
  Index n_states = 0;
  Index n_controls = 0;
  Index n_observations = 0;
  std::vector<Matrix> transitions;
  Matrix observation_dist;
  Vector rewards;
  std::vector<std::string> state_labels;
  std::vector<std::string> control_labels;

  /// R = max_i |r(i)|.
  double reward_bound() const { return rewards.size() ? rewards.cwiseAbs().maxCoeff() : 0.0; }
};

struct Violation {
  std::string location;  // e.g. "transitions[1] row 0"
  std::string message;
  double residual = 0.0;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {

inline void check_distribution_row(const Eigen::Ref<const Vector>& row, const std::string& where,
                                   ValidationReport& report) {
  if (!row.allFinite()) {
    report.violations.push_back({where, "non-finite entry", std::numeric_limits<double>::infinity()});
    return;
  }
  const double most_negative = row.minCoeff();
  if (most_negative < 0.0) {
    std::ostringstream msg;
    msg << "negative entry " << most_negative;
    report.violations.push_back({where, msg.str(), -most_negative});
  }
  const double residual = std::abs(row.sum() - 1.0);
  if (residual > kStochasticTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "sums to " << row.sum() << ", residual " << residual;
    report.violations.push_back({where, msg.str(), residual});
  }
}

}  // namespace detail

/// Reports every structural defect; never throws and never repairs.
inline ValidationReport validate_model(const PomdpModel& m) {
  ValidationReport report;
  auto add = [&](std::string where, std::string what) {
    report.violations.push_back({std::move(where), std::move(what), 0.0});
  };
  if (m.n_states < 1) add("n_states", "must be positive");
  if (m.n_controls < 1) add("n_controls", "must be positive");
  if (m.n_observations < 1) add("n_observations", "must be positive");
  if (!report.ok()) return report;

  if (static_cast<Index>(m.transitions.size()) != m.n_controls) {
    add("transitions", "expected one matrix per control");
  }
  for (std::size_t u = 0; u < m.transitions.size(); ++u) {
    const Matrix& p = m.transitions[u];
    const std::string name = "transitions[" + std::to_string(u) + "]";
    if (p.rows() != m.n_states || p.cols() != m.n_states) {
      add(name, "expected an n_states x n_states matrix");
      continue;
    }
    for (Index i = 0; i < p.rows(); ++i) {
      detail::check_distribution_row(p.row(i).transpose(), name + " row " + std::to_string(i), report);
    }
  }
  if (m.observation_dist.rows() != m.n_states || m.observation_dist.cols() != m.n_observations) {
    add("observation_dist", "expected an n_states x n_observations matrix");
  } else {
    for (Index i = 0; i < m.n_states; ++i) {
      detail::check_distribution_row(m.observation_dist.row(i).transpose(),
                                     "observation_dist row " + std::to_string(i), report);
    }
  }
  if (m.rewards.size() != m.n_states) {
    add("rewards", "expected one reward per state");
  } else if (!m.rewards.allFinite()) {
    add("rewards", "non-finite reward");
  }
  if (!m.state_labels.empty() && static_cast<Index>(m.state_labels.size()) != m.n_states) {
    add("state_labels", "expected one label per state");
  }
  if (!m.control_labels.empty() && static_cast<Index>(m.control_labels.size()) != m.n_controls) {
    add("control_labels", "expected one label per control");
  }
  return report;
}

/// Throws PreconditionError listing every violation.
inline void require_valid(const PomdpModel& m) {
  const auto report = validate_model(m);
  if (report.ok()) return;
  std::ostringstream msg;
  msg << "invalid model:";
  for (const auto& v : report.violations) msg << "\n  " << v.location << ": " << v.message;
  throw PreconditionError(msg.str());
}

struct StepResult {
  Index observation;
  Index control;
  Index next_state;
  double reward;  // r(next_state)
};

namespace detail {

inline void require_state(const PomdpModel& m, Index i) {
  if (i < 0 || i >= m.n_states) {
    std::ostringstream msg;
    msg << "state index " << i << " outside [0, " << m.n_states << ")";
    throw PreconditionError(msg.str());
  }
}

inline void require_control_dist(const PomdpModel& m, const Eigen::Ref<const Vector>& dist) {
  if (dist.size() != m.n_controls) throw PreconditionError("control distribution has wrong length");
  if (!dist.allFinite() || dist.minCoeff() < 0.0 || std::abs(dist.sum() - 1.0) > 1e-9) {
    throw PreconditionError("control distribution is not a probability vector");
  }
}

inline Index sample_observation(const PomdpModel& m, Index i, RandomStream& rng) {
  return sample_index(m.observation_dist.row(i), rng);
}

inline Index sample_transition(const PomdpModel& m, Index i, Index u, RandomStream& rng) {
  return sample_index(m.transitions[static_cast<std::size_t>(u)].row(i), rng);
}

}  // namespace detail

/// One POMDP step from state i with a fixed control distribution. Draw order
/// is observation, control, next state: three uniforms per step.
inline StepResult step(const PomdpModel& m, const Eigen::Ref<const Vector>& control_dist, Index i,
                       RandomStream& rng) {
  detail::require_state(m, i);
  detail::require_control_dist(m, control_dist);
  const Index y = detail::sample_observation(m, i, rng);
  const Index u = sample_index(control_dist, rng);
  const Index j = detail::sample_transition(m, i, u, rng);
  return {y, u, j, m.rewards[j]};
}

/// Agent-facing view of a running POMDP. The hidden state is only reachable
/// through hidden_state(), which estimators must not call. Draws follow the
/// same order as step().
class PomdpEnvironment {
 public:
  PomdpEnvironment(const PomdpModel& model, Index start_state, RandomStream rng)
      : model_(&model), state_(start_state), rng_(std::move(rng)) {
    detail::require_state(model, start_state);
  }

  Index observe() {
    observation_ = detail::sample_observation(*model_, state_, rng_);
    observed_ = true;
    return observation_;
  }

  struct Outcome {
    Index control;
    double reward;  // r(i_{t+1})
  };

  /// Samples a control from `control_dist`, moves the hidden state, and returns
  /// the reward of the state entered.
  Outcome act(const Eigen::Ref<const Vector>& control_dist) {
    if (!observed_) throw PreconditionError("PomdpEnvironment: act() before observe()");
    observed_ = false;
    const Index u = sample_index(control_dist, rng_);
    state_ = detail::sample_transition(*model_, state_, u, rng_);
    return {u, model_->rewards[state_]};
  }

  Index hidden_state() const { return state_; }

 private:
  const PomdpModel* model_;
  Index state_;
  Index observation_ = -1;
  bool observed_ = false;
  RandomStream rng_;
};

struct TrajectoryStep {
  Index state;        // i_t
  Index observation;  // y_t
  Index control;      // u_t
  double reward;      // r(i_{t+1})
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  Index final_state = 0;  // i_T
  std::uint64_t seed = 0;
};

/// T transitions under mu(theta, .) from `start_state`; a pure function of
/// its arguments.
template <Policy P>
Trajectory simulate(const PomdpModel& m, const P& policy, const Vector& theta, std::int64_t horizon,
                    std::uint64_t seed, Index start_state = 0) {
  if (horizon < 1) throw PreconditionError("simulate: horizon must be at least 1");
  if (policy.n_controls() != m.n_controls || policy.n_observations() != m.n_observations) {
    throw PreconditionError("simulate: policy does not match model dimensions");
  }
  Trajectory traj;
  traj.seed = seed;
  traj.steps.reserve(static_cast<std::size_t>(horizon));
  PomdpEnvironment env(m, start_state, RandomStream(seed));
  Vector mu(m.n_controls);
  for (std::int64_t t = 0; t < horizon; ++t) {
    const Index i = env.hidden_state();
    const Index y = env.observe();
    policy.probs_into(theta, y, mu);
    const auto out = env.act(mu);
    traj.steps.push_back({i, y, out.control, out.reward});
  }
  traj.final_state = env.hidden_state();
  return traj;
}

}  // namespace pglab
