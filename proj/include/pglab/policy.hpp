#pragma once

// Parameterized randomized policies mu(theta, y).
//
// A policy maps a parameter vector and an observation to a distribution over
// controls and reports the likelihood-ratio score grad(mu_u) / mu_u. Policies
// are memoryless and immutable; every evaluation is a pure function.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pglab/linalg.hpp"

namespace pglab {

template <class P>
concept Policy = requires(const P& p, const Vector& theta, Index y, Index u, Vector& out) {
  { p.n_params() } -> std::convertible_to<Index>;
  { p.n_controls() } -> std::convertible_to<Index>;
  { p.n_observations() } -> std::convertible_to<Index>;
  p.probs_into(theta, y, out);
  p.score_into(theta, y, u, out);
};

namespace detail {

inline void require_finite_theta(const Eigen::Ref<const Vector>& theta) {
  if (!theta.allFinite()) throw PreconditionError("policy: non-finite parameter vector");
}

inline void require_observation(Index y, Index n_observations) {
  if (y < 0 || y >= n_observations) {
    std::ostringstream msg;
    msg << "policy: observation " << y << " outside [0, " << n_observations << ")";
    throw PreconditionError(msg.str());
  }
}

// Max-shifted softmax; `scores` may alias `out`.
inline void softmax_into(const Eigen::Ref<const Vector>& scores, Vector& out) {
  const double top = scores.maxCoeff();
  const Index n = scores.size();
  out.resize(n);
  double total = 0.0;
  for (Index u = 0; u < n; ++u) {
    out[u] = std::exp(scores[u] - top);
    total += out[u];
  }
  out /= total;
}

}  // namespace detail

/// Policies that can form a score from probabilities already computed.
template <class P>
concept ScoreFromProbs = Policy<P> && requires(const P& p, Index y, Index u, const Vector& mu, Vector& out) {
  p.score_from_probs(y, u, mu, out);
};

/// mu(theta, y) as a fresh vector.
template <Policy P>
Vector probs(const P& policy, const Vector& theta, Index y) {
  Vector out(policy.n_controls());
  policy.probs_into(theta, y, out);
  return out;
}

/// grad(mu_u(theta, y)) / mu_u(theta, y) as a fresh vector.
template <Policy P>
Vector score(const P& policy, const Vector& theta, Index y, Index u) {
  Vector out(policy.n_params());
  policy.score_into(theta, y, u, out);
  return out;
}

/// Per-observation feature vectors phi(y), all of one dimension.
class FeatureTable {
 public:
  FeatureTable() = default;

  explicit FeatureTable(std::vector<Vector> rows) : rows_(std::move(rows)) {
    if (rows_.empty()) throw PreconditionError("FeatureTable: no rows");
    const Index dim = rows_.front().size();
    if (dim == 0) throw PreconditionError("FeatureTable: zero-dimensional features");
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      if (rows_[i].size() != dim) {
        std::ostringstream msg;
        msg << "FeatureTable: row " << i << " has dimension " << rows_[i].size() << ", expected " << dim;
        throw PreconditionError(msg.str());
      }
      if (!rows_[i].allFinite()) throw PreconditionError("FeatureTable: non-finite feature value");
    }
  }

  Index size() const { return static_cast<Index>(rows_.size()); }
  Index dim() const { return rows_.empty() ? 0 : rows_.front().size(); }
  const Vector& operator[](Index y) const { return rows_[static_cast<std::size_t>(y)]; }
  const std::vector<Vector>& rows() const { return rows_; }

  double max_abs() const {
    double m = 0.0;
    for (const auto& r : rows_) m = std::max(m, r.cwiseAbs().maxCoeff());
    return m;
  }

 private:
  std::vector<Vector> rows_;
};

/// Softmax over linear scores s_u(y) = w_u . phi(y), one weight vector per
/// control. theta stacks the weight vectors: theta[u * D + d] with D the
/// feature dimension. With two controls and two features this is the
/// four-parameter controller (theta_1, theta_2 | theta_3, theta_4).
///
/// Score of control u:  block v equals (1[u == v] - mu_v) * phi(y).
class SoftmaxLinearPolicy {
 public:
  SoftmaxLinearPolicy(FeatureTable features, Index n_controls)
      : features_(std::move(features)), n_controls_(n_controls) {
    if (n_controls_ < 1) throw PreconditionError("SoftmaxLinearPolicy: need at least one control");
  }

  Index n_params() const { return n_controls_ * features_.dim(); }
  Index n_controls() const { return n_controls_; }
  Index n_observations() const { return features_.size(); }
  const FeatureTable& features() const { return features_; }

  void probs_into(const Vector& theta, Index y, Vector& out) const {
    check(theta, y);
    const Index d = features_.dim();
    const Vector& phi = features_[y];
    out.resize(n_controls_);
    for (Index u = 0; u < n_controls_; ++u) out[u] = theta.segment(u * d, d).dot(phi);
    detail::softmax_into(out, out);
  }

  void score_into(const Vector& theta, Index y, Index u, Vector& out) const {
    Vector mu(n_controls_);
    probs_into(theta, y, mu);
    score_from_probs(y, u, mu, out);
  }

  /// score_into for a caller that already holds mu(theta, y).
  void score_from_probs(Index y, Index u, const Vector& mu, Vector& out) const {
    if (u < 0 || u >= n_controls_) throw PreconditionError("SoftmaxLinearPolicy: control index out of range");
    if (!(mu[u] > 0.0)) throw SingularScoreError("SoftmaxLinearPolicy: score requested for a zero-probability control");
    const Index d = features_.dim();
    const Vector& phi = features_[y];
    out.resize(n_params());
    for (Index v = 0; v < n_controls_; ++v) {
      const double coef = (v == u ? 1.0 : 0.0) - mu[v];
      out.segment(v * d, d) = coef * phi;
    }
  }

  /// sup over theta of |score|: |1[u==v] - mu_v| < 1, so max |phi| bounds it.
  double uniform_score_bound() const { return features_.max_abs(); }

 private:
  void check(const Vector& theta, Index y) const {
    if (theta.size() != n_params()) throw PreconditionError("SoftmaxLinearPolicy: parameter vector has wrong length");
    detail::require_finite_theta(theta);
    detail::require_observation(y, n_observations());
  }

  FeatureTable features_;
  Index n_controls_;
};

/// One free softmax per observation: theta[y * N + u] is the logit of control
/// u under observation y.
class TabularPolicy {
 public:
  TabularPolicy(Index n_observations, Index n_controls)
      : n_observations_(n_observations), n_controls_(n_controls) {
    if (n_observations_ < 1 || n_controls_ < 1) throw PreconditionError("TabularPolicy: empty observation or control set");
  }

  Index n_params() const { return n_observations_ * n_controls_; }
  Index n_controls() const { return n_controls_; }
  Index n_observations() const { return n_observations_; }

  void probs_into(const Vector& theta, Index y, Vector& out) const {
    if (theta.size() != n_params()) throw PreconditionError("TabularPolicy: parameter vector has wrong length");
    detail::require_finite_theta(theta);
    detail::require_observation(y, n_observations_);
    detail::softmax_into(theta.segment(y * n_controls_, n_controls_), out);
  }

  void score_into(const Vector& theta, Index y, Index u, Vector& out) const {
    Vector mu(n_controls_);
    probs_into(theta, y, mu);
    score_from_probs(y, u, mu, out);
  }

  void score_from_probs(Index y, Index u, const Vector& mu, Vector& out) const {
    if (u < 0 || u >= n_controls_) throw PreconditionError("TabularPolicy: control index out of range");
    if (!(mu[u] > 0.0)) throw SingularScoreError("TabularPolicy: score requested for a zero-probability control");
    out = Vector::Zero(n_params());
    out.segment(y * n_controls_, n_controls_) = -mu;
    out[y * n_controls_ + u] += 1.0;
  }

  double uniform_score_bound() const { return 1.0; }

 private:
  Index n_observations_;
  Index n_controls_;
};

/// Largest |score| entry found over the corners, the centre and `samples`
/// uniform points of the box [lo, hi]^K, across all observations and controls.
/// A lower estimate of the bound B for boxes whose extremes are not sampled.
template <Policy P>
double estimate_score_bound(const P& policy, double lo, double hi, int samples, std::uint64_t seed) {
  if (!(lo <= hi)) throw PreconditionError("estimate_score_bound: empty box");
  const Index k = policy.n_params();
  RandomStream rng(seed);
  double bound = 0.0;
  Vector mu(policy.n_controls());
  Vector sc(k);
  auto visit = [&](const Vector& theta) {
    for (Index y = 0; y < policy.n_observations(); ++y) {
      policy.probs_into(theta, y, mu);
      for (Index u = 0; u < policy.n_controls(); ++u) {
        if (!(mu[u] > 0.0)) continue;
        policy.score_into(theta, y, u, sc);
        bound = std::max(bound, sc.cwiseAbs().maxCoeff());
      }
    }
  };
  Vector theta(k);
  if (k <= 16) {
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
      for (Index i = 0; i < k; ++i) theta[i] = (mask >> i) & 1U ? hi : lo;
      visit(theta);
    }
  }
  visit(Vector::Constant(k, 0.5 * (lo + hi)));
  for (int s = 0; s < samples; ++s) {
    for (Index i = 0; i < k; ++i) theta[i] = rng.uniform(lo, hi);
    visit(theta);
  }
  return bound;
}

}  // namespace pglab
