#pragma once

// GPOMDP: a single-sample-path estimate of grad_beta eta.
//
// The estimator keeps an eligibility trace z and a running mean Delta, 2K
// numbers in all. Each step feeds it the score of the control just taken and
// the reward of the state entered:
//
//   z     <- beta z + grad(mu_u)/mu_u
//   Delta <- Delta + (r z - Delta) / (t + 1)
//
// The estimator sees observations, controls and rewards only, never states.

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <vector>

#include "pglab/exact.hpp"
#include "pglab/pomdp.hpp"

namespace pglab {

struct GpomdpState {
  double beta = 0.0;
  std::int64_t t = 0;
  Vector z;      // eligibility trace
  Vector delta;  // running average of r z

  Index storage() const { return z.size() + delta.size(); }
};

inline GpomdpState gpomdp_init(double beta, Index n_params) {
  if (!(beta >= 0.0 && beta < 1.0)) throw PreconditionError("gpomdp_init: beta must lie in [0, 1)");
  if (n_params < 1) throw PreconditionError("gpomdp_init: need at least one parameter");
  return {beta, 0, Vector::Zero(n_params), Vector::Zero(n_params)};
}

/// One step. `reward` is r(i_{t+1}), the reward of the state the control led to.
inline void gpomdp_update(GpomdpState& s, const Eigen::Ref<const Vector>& score, double reward) {
  if (score.size() != s.z.size()) throw PreconditionError("gpomdp_update: score has wrong length");
  if (!score.allFinite()) {
    std::ostringstream msg;
    msg << "gpomdp_update: non-finite score at step " << s.t;
    throw EstimatorPoisonedError(msg.str());
  }
  s.z = s.beta * s.z + score;
  s.delta += (reward * s.z - s.delta) / static_cast<double>(s.t + 1);
  ++s.t;
}

namespace detail {

template <Policy P>
void require_compatible(const PomdpModel& m, const P& policy, const Vector& theta) {
  if (policy.n_controls() != m.n_controls || policy.n_observations() != m.n_observations) {
    throw PreconditionError("gpomdp: policy does not match model dimensions");
  }
  if (theta.size() != policy.n_params()) throw PreconditionError("gpomdp: parameter vector has wrong length");
}

}  // namespace detail

/// Runs the estimator along one sample path and snapshots Delta after each
/// horizon in `horizons` (ascending). Snapshot h equals estimate(..., horizons[h], seed).
template <Policy P>
std::vector<Vector> gpomdp_snapshots(const PomdpModel& m, const P& policy, const Vector& theta, double beta,
                                     const std::vector<std::int64_t>& horizons, std::uint64_t seed,
                                     Index start_state = 0) {
  detail::require_compatible(m, policy, theta);
  if (horizons.empty()) return {};
  if (!std::is_sorted(horizons.begin(), horizons.end()) || horizons.front() < 1) {
    throw PreconditionError("gpomdp: horizons must be ascending and at least 1");
  }
  GpomdpState state = gpomdp_init(beta, policy.n_params());
  PomdpEnvironment env(m, start_state, RandomStream(seed));
  Vector mu(m.n_controls);
  Vector sc(policy.n_params());
  std::vector<Vector> out;
  out.reserve(horizons.size());
  std::size_t next = 0;
  while (next < horizons.size()) {
    const Index y = env.observe();
    policy.probs_into(theta, y, mu);
    const auto step = env.act(mu);
    if constexpr (ScoreFromProbs<P>) {
      policy.score_from_probs(y, step.control, mu, sc);
    } else {
      policy.score_into(theta, y, step.control, sc);
    }
    gpomdp_update(state, sc, step.reward);
    while (next < horizons.size() && state.t == horizons[next]) {
      out.push_back(state.delta);
      ++next;
    }
  }
  return out;
}

/// Delta_T after exactly T steps; deterministic in `seed`.
template <Policy P>
GradientVector gpomdp_estimate(const PomdpModel& m, const P& policy, const Vector& theta, double beta,
                               std::int64_t horizon, std::uint64_t seed, Index start_state = 0) {
  if (horizon < 1) throw PreconditionError("gpomdp_estimate: horizon must be at least 1");
  auto snaps = gpomdp_snapshots(m, policy, theta, beta, {horizon}, seed, start_state);
  return {GradientKind::estimate, std::move(snaps.front())};
}

/// Feeds a recorded trajectory through the estimator.
template <Policy P>
GpomdpState gpomdp_replay(const Trajectory& traj, const P& policy, const Vector& theta, double beta) {
  GpomdpState state = gpomdp_init(beta, policy.n_params());
  Vector sc(policy.n_params());
  for (const auto& s : traj.steps) {
    policy.score_into(theta, s.observation, s.control, sc);
    gpomdp_update(state, sc, s.reward);
  }
  return state;
}

}  // namespace pglab
