#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pglab/benchmark.hpp"
#include "pglab/exact.hpp"
#include "pglab/optimizer.hpp"

using namespace pglab;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Replays a fixed list of responses and ignores theta.
struct Scripted {
  std::vector<Vector> responses;
  std::vector<Vector> queried;
  std::size_t next = 0;

  GradOracle oracle() {
    return [this](const Vector& theta) {
      queried.push_back(theta);
      if (next >= responses.size()) throw std::runtime_error("script exhausted");
      return responses[next++];
    };
  }
};

GradOracle bowl(const Vector& centre) {
  return [centre](const Vector& theta) { return Vector(centre - theta); };
}

// grad f = b - A theta for a fixed SPD A in four dimensions.
struct Quadratic {
  Matrix a;
  Vector b;
  Quadratic() : a(4, 4), b(4) {
    a << 4, 1, 0, 0.5,
         1, 3, 0.2, 0,
         0, 0.2, 2, 0.3,
         0.5, 0, 0.3, 1;
    b << 1, -2, 0.5, 3;
  }
  GradOracle oracle(double scale = 1.0) const {
    return [this, scale](const Vector& theta) { return Vector(scale * (b - a * theta)); };
  }
  Vector argmax() const { return a.ldlt().solve(b); }
};

constexpr double kTight = 1e-14;

}  // namespace

// =============================================================================
// gsearch
// =============================================================================

TEST(Gsearch, ForwardDoublingGoldenTrace) {
  Scripted script{{vec({2, 0}), vec({0.5, 0}), vec({-1, 0})}};
  LineSearchRecord rec;
  const Vector out = gsearch(script.oracle(), vec({0, 0}), vec({1, 0}), 1.0, 0.1, {}, &rec);
  ASSERT_EQ(rec.probes.size(), 3u);
  EXPECT_EQ(rec.probes[0].step, 1.0);
  EXPECT_EQ(rec.probes[1].step, 2.0);
  EXPECT_EQ(rec.probes[2].step, 4.0);
  EXPECT_EQ(script.queried[2], vec({4, 0}));
  EXPECT_EQ(rec.s_minus, 2.0);
  EXPECT_EQ(rec.p_minus, 0.5);
  EXPECT_EQ(rec.s_plus, 4.0);
  EXPECT_EQ(rec.p_plus, -1.0);
  EXPECT_TRUE(rec.interpolated);
  EXPECT_NEAR(rec.step, 8.0 / 3.0, kTight);
  EXPECT_NEAR(out[0], 8.0 / 3.0, kTight);
  EXPECT_EQ(out[1], 0.0);
}

TEST(Gsearch, FirstProbeAloneCanBracket) {
  // The first pass through the doubling loop records the initial probe as (s_-, p_-).
  Scripted script{{vec({3, 0}), vec({-1, 0})}};
  LineSearchRecord rec;
  gsearch(script.oracle(), vec({0, 0}), vec({1, 0}), 0.5, 0.0, {}, &rec);
  EXPECT_EQ(rec.s_minus, 0.5);
  EXPECT_EQ(rec.p_minus, 3.0);
  EXPECT_EQ(rec.s_plus, 1.0);
  EXPECT_NEAR(rec.step, (0.5 * -1.0 - 1.0 * 3.0) / (-1.0 - 3.0), kTight);
}

TEST(Gsearch, HalvingGoldenTrace) {
  // Bowl at the origin from (1, 0) along (-1, 0): p(s) = 1 - s.
  LineSearchRecord rec;
  const Vector out = gsearch(bowl(vec({0, 0})), vec({1, 0}), vec({-1, 0}), 3.0, 1e-9, {}, &rec);
  ASSERT_EQ(rec.probes.size(), 3u);
  EXPECT_EQ(rec.probes[0].step, 3.0);
  EXPECT_EQ(rec.probes[1].step, 1.5);
  EXPECT_EQ(rec.probes[2].step, 0.75);
  EXPECT_EQ(rec.s_plus, 1.5);
  EXPECT_EQ(rec.p_plus, -0.5);
  EXPECT_EQ(rec.s_minus, 0.75);
  EXPECT_EQ(rec.p_minus, 0.25);
  EXPECT_TRUE(rec.interpolated);
  EXPECT_NEAR(rec.step, 1.0, kTight);
  EXPECT_NEAR(out.norm(), 0.0, kTight);
}

TEST(Gsearch, ExactZeroProjectionFallsBackToMidpoint) {
  // p(s) = 1 - s hits 0 exactly at s = 1, which ends the doubling with
  // p_+ = 0. Without p_+ < 0 the secant is skipped and the bracket midpoint
  // (0.5 + 1) / 2 is taken.
  LineSearchRecord rec;
  const Vector out = gsearch(bowl(vec({0, 0})), vec({1, 0}), vec({-1, 0}), 0.25, 1e-9, {}, &rec);
  EXPECT_EQ(rec.s_minus, 0.5);
  EXPECT_EQ(rec.p_minus, 0.5);
  EXPECT_EQ(rec.s_plus, 1.0);
  EXPECT_EQ(rec.p_plus, 0.0);
  EXPECT_FALSE(rec.interpolated);
  EXPECT_EQ(rec.step, 0.75);
  EXPECT_EQ(out, vec({0.25, 0}));
}

TEST(Gsearch, SecantIsExactForLinearGradient) {
  LineSearchRecord rec;
  const Vector out = gsearch(bowl(vec({0, 0})), vec({1, 0}), vec({-1, 0}), 0.3, 1e-9, {}, &rec);
  EXPECT_NEAR(rec.s_minus, 0.6, kTight);
  EXPECT_NEAR(rec.s_plus, 1.2, kTight);
  EXPECT_TRUE(rec.interpolated);
  EXPECT_NEAR(out[0], 0.0, 1e-15);
  EXPECT_EQ(out[1], 0.0);
}

TEST(Gsearch, MidpointWhenHalvingEndsAtZero) {
  LineSearchRecord rec;
  gsearch(bowl(vec({0, 0})), vec({1, 0}), vec({-1, 0}), 4.0, 1e-9, {}, &rec);
  EXPECT_EQ(rec.s_minus, 1.0);
  EXPECT_EQ(rec.p_minus, 0.0);
  EXPECT_EQ(rec.s_plus, 2.0);
  EXPECT_FALSE(rec.interpolated);
  EXPECT_EQ(rec.step, 1.5);
}

TEST(Gsearch, UnboundedAscentHitsDoublingCap) {
  const GradOracle constant = [](const Vector&) { return vec({1, 0}); };
  try {
    gsearch(constant, vec({0, 0}), vec({1, 0}), 1.0, 1e-4);
    FAIL() << "expected BracketFailure";
  } catch (const BracketFailure& e) {
    EXPECT_EQ(e.record().probes.size(), 61u);
    EXPECT_NE(std::string(e.what()).find("doubling"), std::string::npos);
  }
  try {
    gsearch(constant, vec({0, 0}), vec({1, 0}), 1.0, 1e-4, GsearchOptions{5});
    FAIL() << "expected BracketFailure";
  } catch (const BracketFailure& e) {
    EXPECT_EQ(e.record().probes.size(), 6u);
  }
}

TEST(Gsearch, PersistentOvershootHitsHalvingCap) {
  const GradOracle constant = [](const Vector&) { return vec({-1, 0}); };
  try {
    gsearch(constant, vec({0, 0}), vec({1, 0}), 1.0, 1e-4, GsearchOptions{10});
    FAIL() << "expected BracketFailure";
  } catch (const BracketFailure& e) {
    EXPECT_EQ(e.record().probes.size(), 11u);
    EXPECT_NE(std::string(e.what()).find("halving"), std::string::npos);
  }
}

TEST(Gsearch, RejectsBadArguments) {
  const auto g = bowl(vec({0, 0}));
  EXPECT_THROW(gsearch(g, vec({1, 0}), vec({0, 0}), 1.0, 0.0), PreconditionError);
  EXPECT_THROW(gsearch(g, vec({1, 0}), vec({-1, 0}), 0.0, 0.0), PreconditionError);
  EXPECT_THROW(gsearch(g, vec({1, 0}), vec({-1, 0}), 1.0, -1.0), PreconditionError);
  EXPECT_THROW(gsearch(g, vec({1, 0}), vec({-1}), 1.0, 0.0), PreconditionError);
}

TEST(Gsearch, ScaleInvariantWithZeroResolution) {
  const Quadratic q;
  const Vector theta0 = Vector::Zero(4);
  const Vector dir = q.oracle()(theta0);
  LineSearchRecord base;
  gsearch(q.oracle(), theta0, dir, 0.01, 0.0, {}, &base);
  for (double c : {0.25, 8.0, 1e-3, 1e3}) {
    LineSearchRecord rec;
    gsearch(q.oracle(c), theta0, dir, 0.01, 0.0, {}, &rec);
    ASSERT_EQ(rec.probes.size(), base.probes.size()) << "scale " << c;
    for (std::size_t i = 0; i < rec.probes.size(); ++i) {
      EXPECT_EQ(rec.probes[i].step, base.probes[i].step);
      EXPECT_EQ(rec.probes[i].projection > 0, base.probes[i].projection > 0);
    }
    EXPECT_NEAR(rec.step, base.step, 1e-14 * base.step) << "scale " << c;
  }
}

TEST(Gsearch, NoisyBowlLandsNearMaximum) {
  int good = 0;
  for (int seed = 0; seed < 100; ++seed) {
    RandomStream rng(derive_seed(2024, static_cast<std::uint64_t>(seed)));
    const GradOracle noisy = [&rng](const Vector& theta) {
      Vector g = -theta;
      g[0] += rng.uniform(-0.01, 0.01);
      return g;
    };
    try {
      const Vector out = gsearch(noisy, vec({1}), vec({-1}), 0.25, 1e-9);
      if (std::abs(out[0]) <= 0.05) ++good;
    } catch (const BracketFailure&) {
    }
  }
  EXPECT_GE(good, 95);
}

// =============================================================================
// conjpomdp
// =============================================================================

TEST(Conjpomdp, GoldenTrace) {
  Scripted script{{vec({1, 0}),                     // g = h
                   vec({0.5, 0}), vec({-0.5, 0}),   // search 1: double once
                   vec({0.1, 0.2}),                 // Delta
                   vec({0, -1}), vec({0.2, 0.1}),   // search 2: halve once
                   vec({0.05, 0.05})}};             // Delta, ||g||^2 = 0.005
  ConjOptions opt;
  opt.s0 = 1.0;
  opt.epsilon = 0.01;
  opt.verify_ascent = false;
  const auto r = conjpomdp(script.oracle(), vec({0, 0}), opt);
  EXPECT_EQ(r.status, ConjStatus::converged);
  EXPECT_EQ(script.next, script.responses.size());
  ASSERT_EQ(r.log.searches.size(), 2u);

  const auto& s1 = r.log.searches[0];
  EXPECT_EQ(s1.direction, vec({1, 0}));
  EXPECT_EQ(s1.step, 1.5);
  EXPECT_EQ(s1.theta_after, vec({1.5, 0}));
  EXPECT_NEAR(r.log.gamma[0], -0.05, kTight);
  EXPECT_FALSE(r.log.reset[0]);

  const auto& s2 = r.log.searches[1];
  EXPECT_NEAR(s2.direction[0], 0.05, kTight);
  EXPECT_NEAR(s2.direction[1], 0.2, kTight);
  EXPECT_EQ(s2.s_plus, 1.0);
  EXPECT_EQ(s2.s_minus, 0.5);
  EXPECT_NEAR(s2.p_plus, -0.2, kTight);
  EXPECT_NEAR(s2.p_minus, 0.03, kTight);
  EXPECT_NEAR(s2.step, 13.0 / 23.0, kTight);
  EXPECT_NEAR(r.theta[0], 1.5 + 0.05 * 13.0 / 23.0, kTight);
  EXPECT_NEAR(r.theta[1], 0.2 * 13.0 / 23.0, kTight);
  EXPECT_NEAR(r.log.gamma[1], -0.2, kTight);

  ASSERT_EQ(r.log.grad_norm_sq.size(), 3u);
  EXPECT_EQ(r.log.grad_norm_sq[0], 1.0);
  EXPECT_NEAR(r.log.grad_norm_sq[1], 0.05, kTight);
  EXPECT_NEAR(r.log.grad_norm_sq[2], 0.005, kTight);
  EXPECT_EQ(r.log.oracle_calls, 7u);
  EXPECT_EQ(s1.oracle_calls, 3u);
  EXPECT_EQ(s2.oracle_calls, 6u);
}

TEST(Conjpomdp, DirectionResetUsesFreshEstimate) {
  Scripted script{{vec({1, 0}),
                   vec({1, 0}), vec({-1, 0}),
                   vec({-1, 0.1}),                  // gamma = 2.01, h . Delta < 0
                   vec({-1, 0.1}), vec({1, 0}),
                   vec({0, 0})}};
  ConjOptions opt;
  opt.epsilon = 0.01;
  opt.verify_ascent = false;
  const auto r = conjpomdp(script.oracle(), vec({0, 0}), opt);
  ASSERT_EQ(r.log.searches.size(), 2u);
  EXPECT_NEAR(r.log.gamma[0], 2.01, kTight);
  EXPECT_TRUE(r.log.reset[0]);
  EXPECT_EQ(r.log.searches[1].direction, vec({-1, 0.1}));
  EXPECT_FALSE(r.log.reset[1]);
}

TEST(Conjpomdp, VerifyAscentResetsOnceThenFails) {
  {
    Scripted script{{vec({1, 0}),
                     vec({-1, 0}), vec({-1, 0}),    // check fails, h <- fresh, recheck passes
                     vec({-1, 0}), vec({1, 0}),     // search along (-1, 0)
                     vec({0, 0})}};
    ConjOptions opt;
    opt.epsilon = 0.01;
    const auto r = conjpomdp(script.oracle(), vec({0, 0}), opt);
    ASSERT_EQ(r.log.searches.size(), 1u);
    EXPECT_EQ(r.log.searches[0].direction, vec({-1, 0}));
    EXPECT_EQ(r.log.warnings.size(), 1u);
  }
  {
    Scripted script{{vec({1, 0}), vec({-1, 0}), vec({1, 0})}};
    ConjOptions opt;
    opt.epsilon = 0.01;
    EXPECT_THROW(conjpomdp(script.oracle(), vec({0, 0}), opt), ConjFailure);
  }
}

TEST(Conjpomdp, QuadraticConvergesWithinKPlusTwoSearches) {
  const Quadratic q;
  ConjOptions opt;
  opt.epsilon = 1e-12;
  opt.line_epsilon = 0.0;
  opt.verify_ascent = false;
  const auto r = conjpomdp(q.oracle(), Vector::Zero(4), opt);
  EXPECT_EQ(r.status, ConjStatus::converged);
  EXPECT_LE(r.log.searches.size(), 6u);
  EXPECT_LT(r.log.grad_norm_sq.back(), 1e-12);
  EXPECT_LT((r.theta - q.argmax()).norm(), 1e-5);
}

TEST(Conjpomdp, ZeroOracleReturnsImmediately) {
  const GradOracle zero = [](const Vector& t) { return Vector(Vector::Zero(t.size())); };
  const Vector start = vec({0.3, -0.7});
  const auto r = conjpomdp(zero, start, {});
  EXPECT_EQ(r.theta, start);
  EXPECT_TRUE(r.log.searches.empty());
  EXPECT_EQ(r.log.oracle_calls, 1u);
}

TEST(Conjpomdp, IterationCapReturnsLastIterate) {
  const Quadratic q;
  ConjOptions opt;
  opt.epsilon = 1e-30;
  opt.max_iterations = 2;
  opt.steps_per_call = 100;
  const auto r = conjpomdp(q.oracle(), Vector::Zero(4), opt);
  EXPECT_EQ(r.status, ConjStatus::budget_exhausted);
  EXPECT_EQ(r.log.searches.size(), 2u);
  EXPECT_EQ(r.theta, r.log.searches.back().theta_after);
  EXPECT_EQ(r.log.simulation_steps, 100 * r.log.oracle_calls);
}

TEST(Conjpomdp, BracketFailurePropagates) {
  const GradOracle constant = [](const Vector&) { return vec({1, 0}); };
  ConjOptions opt;
  opt.max_bracket_steps = 4;
  try {
    conjpomdp(constant, vec({0, 0}), opt);
    FAIL() << "expected ConjFailure";
  } catch (const ConjFailure& e) {
    ASSERT_EQ(e.log().searches.size(), 1u);
    EXPECT_EQ(e.log().searches[0].probes.size(), 5u);
  }
}

TEST(Conjpomdp, RejectsBadOptions) {
  const Quadratic q;
  ConjOptions opt;
  opt.s0 = 0.0;
  EXPECT_THROW(conjpomdp(q.oracle(), Vector::Zero(4), opt), PreconditionError);
  opt.s0 = 1.0;
  opt.epsilon = 0.0;
  EXPECT_THROW(conjpomdp(q.oracle(), Vector::Zero(4), opt), PreconditionError);
}

TEST(Conjpomdp, ExactGradientNeverLowersAverageReward) {
  const auto model = benchmark::three_state_model();
  const auto policy = benchmark::three_state_policy();
  const GradOracle exact = [&](const Vector& t) { return analyze(model, policy, t).gradient.value; };
  RandomStream rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Vector start(4);
    for (Index k = 0; k < 4; ++k) start[k] = trial == 0 ? benchmark::reference_theta()[k] : rng.uniform(-0.1, 0.1);
    ConjOptions opt;
    opt.s0 = 100.0;
    opt.epsilon = 1e-4;
    const auto r = conjpomdp(exact, start, opt);
    double eta = exact_average_reward(model, policy, start);
    for (const auto& s : r.log.searches) {
      const double next = exact_average_reward(model, policy, s.theta_after);
      EXPECT_GE(next, eta - 1e-9);
      eta = next;
    }
    // From the small starts used in training the optimum is reached; from the
    // reference point the loop may stop on ||g||^2 < epsilon a little short.
    if (trial > 0) EXPECT_GE(eta, 0.799) << "trial " << trial;
    for (std::size_t i = 1; i < r.log.searches.size(); ++i) {
      EXPECT_GE(r.log.searches[i].oracle_calls, r.log.searches[i - 1].oracle_calls);
    }
  }
}
