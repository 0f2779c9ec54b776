#pragma once

// The three-state, two-action benchmark MDP and its softmax controller.
//
// States A, B, C carry rewards 0, 0, 1. Action a2 moves toward C with
// probability 0.8, so always choosing a2 is optimal with average reward 0.8.
// The MDP is fully observed: observation y = state index.

#include "pglab/pomdp.hpp"

namespace pglab::benchmark {

inline PomdpModel three_state_model() {
  PomdpModel m;
  m.n_states = 3;
  m.n_controls = 2;
  m.n_observations = 3;
  Matrix a1(3, 3), a2(3, 3);
  a1 << 0.0, 0.8, 0.2,
        0.8, 0.0, 0.2,
        0.0, 0.8, 0.2;
  a2 << 0.0, 0.2, 0.8,
        0.2, 0.0, 0.8,
        0.0, 0.2, 0.8;
  m.transitions = {a1, a2};
  m.observation_dist = Matrix::Identity(3, 3);
  m.rewards = Vector(3);
  m.rewards << 0.0, 0.0, 1.0;
  m.state_labels = {"A", "B", "C"};
  m.control_labels = {"a1", "a2"};
  return m;
}

inline FeatureTable three_state_features() {
  Vector a(2), b(2), c(2);
  a << 12.0 / 18.0, 6.0 / 18.0;
  b << 6.0 / 18.0, 12.0 / 18.0;
  c << 5.0 / 18.0, 5.0 / 18.0;
  return FeatureTable({a, b, c});
}

inline SoftmaxLinearPolicy three_state_policy() {
  return SoftmaxLinearPolicy(three_state_features(), 2);
}

/// theta = (1, 1, -1, -1): a suboptimal controller favouring a1.
inline Vector reference_theta() {
  Vector t(4);
  t << 1.0, 1.0, -1.0, -1.0;
  return t;
}

inline constexpr double kOptimalAverageReward = 0.8;

}  // namespace pglab::benchmark
