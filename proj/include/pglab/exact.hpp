#pragma once

// Exact analysis of the Markov chain induced by a policy: stationary
// distribution, average and discounted reward, the exact gradient of the
// average reward, its discounted approximation, and mixing diagnostics.
//
// Everything here is a dense-matrix computation intended for small state
// spaces. Linear systems go through LU with partial pivoting; a system is
// treated as singular when its estimated reciprocal condition number drops
// below 1e-12.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pglab/pomdp.hpp"

namespace pglab {

inline constexpr double kMinReciprocalCondition = 1e-12;

/// P(theta) and dP/dtheta_k for k = 0..K-1.
struct InducedChain {
  Matrix transition;
  std::vector<Matrix> gradient;
};

struct StationaryDistribution {
  Vector pi;
  /// ||pi' P - pi'||_1 at the returned solution.
  double balance_residual = 0.0;
};

struct DiscountedValues {
  double beta = 0.0;
  Vector values;  // J_beta
};

enum class GradientKind { exact, approximate, estimate };

inline const char* to_string(GradientKind k) {
  switch (k) {
    case GradientKind::exact: return "exact";
    case GradientKind::approximate: return "approximate";
    case GradientKind::estimate: return "estimate";
  }
  return "?";
}

struct GradientVector {
  GradientKind kind = GradientKind::exact;
  Vector value;
};

struct MixingReport {
  std::vector<double> distance;   // distance[t-1] = d(t)
  std::optional<int> tau_star;    // empty when d(t) > 1/e for all t <= t_max
};

namespace detail {

inline Vector solve_checked(const Matrix& a, const Vector& b, const char* what) {
  Eigen::FullPivLU<Matrix> lu(a);
  const double rc = lu.isInvertible() ? lu.rcond() : 0.0;
  if (!(rc >= kMinReciprocalCondition)) {
    std::ostringstream msg;
    msg << what << ": matrix is singular to working precision (rcond " << rc << ")";
    throw AssumptionViolation(msg.str());
  }
  return lu.solve(b);
}

// P' - I with its last row replaced by ones. Nonsingular exactly when the
// stationary distribution is unique.
inline Matrix bordered_balance_matrix(const Matrix& p) {
  const Index n = p.rows();
  Matrix a = p.transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  return a;
}

inline void require_square_stochastic(const Matrix& p, const char* what) {
  if (p.rows() != p.cols() || p.rows() == 0) throw PreconditionError(std::string(what) + ": expected a non-empty square matrix");
}

}  // namespace detail

template <Policy P>
InducedChain induced_chain(const PomdpModel& m, const P& policy, const Vector& theta) {
  if (policy.n_controls() != m.n_controls || policy.n_observations() != m.n_observations) {
    throw PreconditionError("induced_chain: policy does not match model dimensions");
  }
  const Index n = m.n_states;
  const Index k_params = policy.n_params();
  InducedChain chain;
  chain.transition = Matrix::Zero(n, n);
  chain.gradient.assign(static_cast<std::size_t>(k_params), Matrix::Zero(n, n));
  Vector mu(m.n_controls);
  Vector sc(k_params);
  for (Index y = 0; y < m.n_observations; ++y) {
    policy.probs_into(theta, y, mu);
    for (Index u = 0; u < m.n_controls; ++u) {
      // d mu_u = mu_u * score_u; the limit at mu_u = 0 is zero under a bounded score.
      const bool positive = mu[u] > 0.0;
      if (positive) policy.score_into(theta, y, u, sc);
      const Matrix& pu = m.transitions[static_cast<std::size_t>(u)];
      for (Index i = 0; i < n; ++i) {
        const double nu = m.observation_dist(i, y);
        if (nu == 0.0) continue;
        chain.transition.row(i) += nu * mu[u] * pu.row(i);
        if (!positive) continue;
        for (Index k = 0; k < k_params; ++k) {
          chain.gradient[static_cast<std::size_t>(k)].row(i) += nu * mu[u] * sc[k] * pu.row(i);
        }
      }
    }
  }
  return chain;
}

/// Unique solution of pi' P = pi', sum(pi) = 1, by a direct solve.
inline StationaryDistribution stationary(const Matrix& p) {
  detail::require_square_stochastic(p, "stationary");
  const Index n = p.rows();
  const Matrix a = detail::bordered_balance_matrix(p);
  // Full pivoting so exact rank deficiency is seen even where rcond
  // estimates of a partial-pivot factorisation break down.
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible() || !(lu.rcond() >= kMinReciprocalCondition)) {
    Eigen::FullPivLU<Matrix> full(p.transpose() - Matrix::Identity(n, n));
    full.setThreshold(1e-10);
    std::ostringstream msg;
    msg << "stationary: balance equations do not determine a unique distribution (null space of P' - I has dimension "
        << full.dimensionOfKernel() << ")";
    throw AssumptionViolation(msg.str());
  }
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  StationaryDistribution out;
  out.pi = lu.solve(rhs);
  // Rounding can leave entries a hair below zero.
  for (Index i = 0; i < n; ++i) {
    if (out.pi[i] < 0.0 && out.pi[i] > -1e-12) out.pi[i] = 0.0;
  }
  out.pi /= out.pi.sum();
  out.balance_residual = (out.pi.transpose() * p - out.pi.transpose()).lpNorm<1>();
  return out;
}

struct PowerIterationResult {
  Vector pi;
  int iterations = 0;
  bool converged = false;
};

/// Power iteration on the lazy chain (I + P) / 2, which shares P's
/// stationary distribution and is aperiodic.
inline PowerIterationResult stationary_power_iteration(const Matrix& p, double tol = 1e-13, int max_iterations = 1000000) {
  detail::require_square_stochastic(p, "stationary_power_iteration");
  const Index n = p.rows();
  const Matrix lazy = 0.5 * (p + Matrix::Identity(n, n));
  PowerIterationResult r;
  r.pi = Vector::Constant(n, 1.0 / static_cast<double>(n));
  for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
    Vector next = lazy.transpose() * r.pi;
    next /= next.sum();
    const double change = (next - r.pi).lpNorm<1>();
    r.pi = std::move(next);
    if (change < tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

/// eta = pi' r.
inline double average_reward(const Vector& pi, const Vector& rewards) {
  if (pi.size() != rewards.size()) throw PreconditionError("average_reward: size mismatch");
  return pi.dot(rewards);
}

/// J_beta = (I - beta P)^{-1} r.
inline DiscountedValues discounted_values(const Matrix& p, const Vector& rewards, double beta) {
  detail::require_square_stochastic(p, "discounted_values");
  if (!(beta >= 0.0 && beta < 1.0)) throw PreconditionError("discounted_values: beta must lie in [0, 1)");
  if (rewards.size() != p.rows()) throw PreconditionError("discounted_values: size mismatch");
  const Index n = p.rows();
  return {beta, detail::solve_checked(Matrix::Identity(n, n) - beta * p, rewards, "discounted_values")};
}

/// (grad eta)_k = pi' dP_k [I - P + e pi']^{-1} r.
inline GradientVector exact_gradient(const InducedChain& chain, const Vector& pi, const Vector& rewards) {
  const Index n = chain.transition.rows();
  const Matrix fundamental = Matrix::Identity(n, n) - chain.transition + Vector::Ones(n) * pi.transpose();
  const Vector x = detail::solve_checked(fundamental, rewards, "exact_gradient: I - P + e pi'");
  GradientVector g{GradientKind::exact, Vector(static_cast<Index>(chain.gradient.size()))};
  for (std::size_t k = 0; k < chain.gradient.size(); ++k) {
    g.value[static_cast<Index>(k)] = pi.dot(chain.gradient[k] * x);
  }
  return g;
}

/// (grad_beta eta)_k = pi' dP_k J_beta.
inline GradientVector approx_gradient(const InducedChain& chain, const Vector& pi, const DiscountedValues& j) {
  GradientVector g{GradientKind::approximate, Vector(static_cast<Index>(chain.gradient.size()))};
  for (std::size_t k = 0; k < chain.gradient.size(); ++k) {
    g.value[static_cast<Index>(k)] = pi.dot(chain.gradient[k] * j.values);
  }
  return g;
}

/// d pi / d theta_k, one column per parameter, from differentiating the
/// balance equations: (P' - I) dpi_k = -dP_k' pi with sum(dpi_k) = 0.
inline Matrix stationary_gradient(const InducedChain& chain, const Vector& pi) {
  const Index n = chain.transition.rows();
  const Matrix a = detail::bordered_balance_matrix(chain.transition);
  // Full pivoting so exact rank deficiency is seen even where rcond
  // estimates of a partial-pivot factorisation break down.
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible() || !(lu.rcond() >= kMinReciprocalCondition)) {
    throw AssumptionViolation("stationary_gradient: balance equations are singular");
  }
  Matrix out(n, static_cast<Index>(chain.gradient.size()));
  for (std::size_t k = 0; k < chain.gradient.size(); ++k) {
    Vector rhs = -chain.gradient[k].transpose() * pi;
    rhs[n - 1] = 0.0;
    out.col(static_cast<Index>(k)) = lu.solve(rhs);
  }
  return out;
}

/// || grad eta - [(1 - beta) dpi' J_beta + beta pi' dP J_beta] ||_2.
inline double gradient_decomposition_check(const InducedChain& chain, const Vector& pi, const Vector& rewards,
                                           const DiscountedValues& j) {
  const Vector grad = exact_gradient(chain, pi, rewards).value;
  const Vector approx = approx_gradient(chain, pi, j).value;
  const Matrix dpi = stationary_gradient(chain, pi);
  const Vector rhs = (1.0 - j.beta) * (dpi.transpose() * j.values) + j.beta * approx;
  return (grad - rhs).norm();
}

/// d(t) = max_{i,j} ||p^t(i) - p^t(j)||_1 for t = 1..t_max, and the first t
/// with d(t) <= 1/e.
inline MixingReport mixing_time(const Matrix& p, int t_max) {
  detail::require_square_stochastic(p, "mixing_time");
  if (t_max < 1) throw PreconditionError("mixing_time: t_max must be at least 1");
  const Index n = p.rows();
  const double threshold = std::exp(-1.0);
  MixingReport report;
  report.distance.reserve(static_cast<std::size_t>(t_max));
  Matrix pt = p;
  for (int t = 1; t <= t_max; ++t) {
    double d = 0.0;
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) d = std::max(d, (pt.row(i) - pt.row(j)).lpNorm<1>());
    }
    report.distance.push_back(d);
    if (!report.tau_star && d <= threshold) report.tau_star = t;
    if (t < t_max) pt = pt * p;
  }
  return report;
}

/// ||grad eta - grad_beta eta|| / (tau* (1 - beta)): the quantity bounded by
/// an unspecified constant C(B, R, n). Diagnostic only.
inline double mixing_bias_ratio(const Vector& grad, const Vector& approx, int tau_star, double beta) {
  return (grad - approx).norm() / (static_cast<double>(tau_star) * (1.0 - beta));
}

/// Everything exact about one theta.
struct ExactAnalysis {
  InducedChain chain;
  StationaryDistribution stationary;
  double eta = 0.0;
  GradientVector gradient;
};

template <Policy P>
ExactAnalysis analyze(const PomdpModel& m, const P& policy, const Vector& theta) {
  ExactAnalysis a;
  a.chain = induced_chain(m, policy, theta);
  a.stationary = stationary(a.chain.transition);
  a.eta = average_reward(a.stationary.pi, m.rewards);
  a.gradient = exact_gradient(a.chain, a.stationary.pi, m.rewards);
  return a;
}

template <Policy P>
double exact_average_reward(const PomdpModel& m, const P& policy, const Vector& theta) {
  const auto chain = induced_chain(m, policy, theta);
  return average_reward(stationary(chain.transition).pi, m.rewards);
}

template <Policy P>
GradientVector exact_approx_gradient(const PomdpModel& m, const P& policy, const Vector& theta, double beta) {
  const auto chain = induced_chain(m, policy, theta);
  const auto st = stationary(chain.transition);
  return approx_gradient(chain, st.pi, discounted_values(chain.transition, m.rewards, beta));
}

/// |eta_alpha (1 - alpha) - eta| with eta_alpha = sum_i pi_i J_alpha(i).
template <Policy P>
double discounted_equivalence_check(const PomdpModel& m, const P& policy, const Vector& theta, double alpha) {
  const auto chain = induced_chain(m, policy, theta);
  const auto st = stationary(chain.transition);
  const auto j = discounted_values(chain.transition, m.rewards, alpha);
  const double eta = average_reward(st.pi, m.rewards);
  const double eta_alpha = st.pi.dot(j.values);
  return std::abs(eta_alpha * (1.0 - alpha) - eta);
}

}  // namespace pglab
