#pragma once

// Gradient-only ascent for noisy gradient estimates.
//
// gsearch brackets a maximum along a ray using only the sign of the
// directional derivative GRAD(theta) . direction, then jumps to the zero of
// the secant through the bracket. conjpomdp wraps it in Polak-Ribiere
// conjugate gradient. Neither ever evaluates the objective itself.

#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pglab/linalg.hpp"

namespace pglab {

/// theta -> estimate of grad eta(theta). May be noisy and biased.
using GradOracle = std::function<Vector(const Vector&)>;

struct BracketProbe {
  double step;        // s
  double projection;  // GRAD(theta_0 + s dir) . dir
};

struct LineSearchRecord {
  Vector theta_before;
  Vector direction;
  Vector theta_after;
  std::vector<BracketProbe> probes;
  double s_minus = 0.0, p_minus = 0.0;
  double s_plus = 0.0, p_plus = 0.0;
  double step = 0.0;
  bool interpolated = false;        // secant step (true) or bisection (false)
  std::uint64_t oracle_calls = 0;   // cumulative, after this search
};

struct OptRunLog {
  std::vector<LineSearchRecord> searches;
  std::vector<double> grad_norm_sq;  // ||g||^2 at each loop test
  std::vector<double> gamma;         // Polak-Ribiere coefficients
  std::vector<bool> reset;           // direction reset after each search
  std::uint64_t oracle_calls = 0;
  std::uint64_t simulation_steps = 0;
  std::vector<std::string> warnings;
};

class BracketFailure : public std::runtime_error {
 public:
  BracketFailure(const std::string& what, LineSearchRecord record)
      : std::runtime_error(what), record_(std::move(record)) {}
  const LineSearchRecord& record() const { return record_; }

 private:
  LineSearchRecord record_;
};

struct GsearchOptions {
  int max_bracket_steps = 60;  // doublings or halvings
};

namespace detail {

// Counts calls and charges their simulation cost.
class CountingOracle {
 public:
  CountingOracle(const GradOracle& f, OptRunLog* log, std::uint64_t steps_per_call)
      : f_(f), log_(log), steps_per_call_(steps_per_call) {}

  Vector operator()(const Vector& theta) const {
    Vector g = f_(theta);
    if (g.size() != theta.size()) throw PreconditionError("GradOracle returned a vector of the wrong length");
    if (!g.allFinite()) throw PreconditionError("GradOracle returned a non-finite vector");
    ++calls_;
    if (log_) {
      ++log_->oracle_calls;
      log_->simulation_steps += steps_per_call_;
    }
    return g;
  }

  std::uint64_t calls() const { return calls_; }

 private:
  const GradOracle& f_;
  OptRunLog* log_;
  std::uint64_t steps_per_call_;
  mutable std::uint64_t calls_ = 0;
};

template <class Oracle>
Vector gsearch_impl(const Oracle& grad, const Vector& theta0, const Vector& dir, double s, double eps,
                    const GsearchOptions& opt, LineSearchRecord& rec) {
  rec.theta_before = theta0;
  rec.direction = dir;

  auto probe = [&](double step) {
    const double p = grad(Vector(theta0 + step * dir)).dot(dir);
    rec.probes.push_back({step, p});
    return p;
  };
  auto fail = [&](const char* what) {
    std::ostringstream msg;
    msg << "gsearch: " << what << " did not bracket the maximum within " << opt.max_bracket_steps
        << " steps (last s = " << s << ")";
    throw BracketFailure(msg.str(), rec);
  };

  double p = probe(s);
  if (p < 0.0) {
    // Overshot: halve back toward theta0 until the projection turns non-negative.
    int n = 0;
    do {
      if (n++ == opt.max_bracket_steps) fail("halving");
      rec.s_plus = s;
      rec.p_plus = p;
      s /= 2.0;
      p = probe(s);
    } while (!(p > -eps));
    rec.s_minus = s;
    rec.p_minus = p;
  } else {
    // Still climbing: double until the projection drops below eps. The first
    // pass through the loop records the initial probe as (s_-, p_-).
    int n = 0;
    do {
      if (n++ == opt.max_bracket_steps) fail("doubling");
      rec.s_minus = s;
      rec.p_minus = p;
      s *= 2.0;
      p = probe(s);
    } while (!(p < eps));
    rec.s_plus = s;
    rec.p_plus = p;
  }

  if (rec.p_minus > 0.0 && rec.p_plus < 0.0) {
    s = (rec.s_minus * rec.p_plus - rec.s_plus * rec.p_minus) / (rec.p_plus - rec.p_minus);
    rec.interpolated = true;
  } else {
    s = 0.5 * (rec.s_minus + rec.s_plus);
    rec.interpolated = false;
  }
  rec.step = s;
  rec.theta_after = theta0 + s * dir;
  return rec.theta_after;
}

}  // namespace detail

/// Line search along `direction` from `theta0`, which must satisfy
/// GRAD(theta0) . direction > 0 (not re-checked here). `eps` is the inner
/// product resolution. Throws BracketFailure when a cap is hit.
inline Vector gsearch(const GradOracle& grad, const Vector& theta0, const Vector& direction, double s, double eps,
                      const GsearchOptions& opt = {}, LineSearchRecord* record = nullptr) {
  if (theta0.size() != direction.size()) throw PreconditionError("gsearch: direction has wrong length");
  if (direction.isZero(0.0)) throw PreconditionError("gsearch: zero search direction");
  if (!(s > 0.0)) throw PreconditionError("gsearch: initial step must be positive");
  if (!(eps >= 0.0)) throw PreconditionError("gsearch: resolution must be non-negative");
  LineSearchRecord local;
  LineSearchRecord& rec = record ? *record : local;
  detail::CountingOracle counted(grad, nullptr, 0);
  return detail::gsearch_impl(counted, theta0, direction, s, eps, opt, rec);
}

struct ConjOptions {
  double s0 = 1.0;
  double epsilon = 1e-4;
  /// Resolution handed to gsearch; defaults to epsilon.
  std::optional<double> line_epsilon;
  int max_iterations = 200;
  int max_bracket_steps = 60;
  /// Spend one oracle call per search confirming GRAD(theta) . h > 0.
  bool verify_ascent = true;
  /// Simulation cost charged per oracle call, for step accounting.
  std::uint64_t steps_per_call = 0;
};

enum class ConjStatus { converged, budget_exhausted };

struct ConjResult {
  Vector theta;
  ConjStatus status = ConjStatus::converged;
  OptRunLog log;
};

/// Thrown by conjpomdp for a bracket failure or a lost ascent direction;
/// carries the log up to that point.
class ConjFailure : public std::runtime_error {
 public:
  ConjFailure(const std::string& what, Vector theta, OptRunLog log)
      : std::runtime_error(what), theta_(std::move(theta)), log_(std::move(log)) {}
  const Vector& theta() const { return theta_; }
  const OptRunLog& log() const { return log_; }

 private:
  Vector theta_;
  OptRunLog log_;
};

/// Polak-Ribiere conjugate gradient ascent driven only by GRAD.
///
/// Stops when ||g||^2 < epsilon, or after max_iterations line searches with
/// status budget_exhausted and the last iterate.
inline ConjResult conjpomdp(const GradOracle& grad, const Vector& theta_init, const ConjOptions& opt) {
  if (!(opt.s0 > 0.0)) throw PreconditionError("conjpomdp: s0 must be positive");
  if (!(opt.epsilon > 0.0)) throw PreconditionError("conjpomdp: epsilon must be positive");
  if (!theta_init.allFinite()) throw PreconditionError("conjpomdp: non-finite starting point");
  const double line_eps = opt.line_epsilon.value_or(opt.epsilon);

  ConjResult result;
  OptRunLog& log = result.log;
  detail::CountingOracle counted(grad, &log, opt.steps_per_call);
  Vector theta = theta_init;
  Vector g = counted(theta);
  Vector h = g;
  const GsearchOptions gopt{opt.max_bracket_steps};

  int iteration = 0;
  while (true) {
    const double gg = g.squaredNorm();
    log.grad_norm_sq.push_back(gg);
    if (!(gg >= opt.epsilon)) break;
    if (iteration == opt.max_iterations) {
      result.status = ConjStatus::budget_exhausted;
      log.warnings.push_back("iteration cap reached");
      break;
    }
    ++iteration;

    if (opt.verify_ascent) {
      Vector check = counted(theta);
      if (!(check.dot(h) > 0.0)) {
        log.warnings.push_back("search direction not uphill at iteration " + std::to_string(iteration) +
                               "; resetting h to a fresh estimate");
        h = check;
        check = counted(theta);
        if (!(check.dot(h) > 0.0)) {
          throw ConjFailure("conjpomdp: no uphill direction after reset", theta, log);
        }
      }
    }

    LineSearchRecord rec;
    try {
      theta = detail::gsearch_impl(counted, theta, h, opt.s0, line_eps, gopt, rec);
    } catch (const BracketFailure& e) {
      log.searches.push_back(e.record());
      throw ConjFailure(e.what(), theta, log);
    }
    rec.oracle_calls = log.oracle_calls;
    log.searches.push_back(std::move(rec));

    const Vector delta = counted(theta);
    const double gamma = (delta - g).dot(delta) / gg;
    h = delta + gamma * h;
    const bool reset = h.dot(delta) < 0.0;
    if (reset) h = delta;
    log.gamma.push_back(gamma);
    log.reset.push_back(reset);
    g = delta;
  }
  result.theta = std::move(theta);
  return result;
}

}  // namespace pglab
