#pragma once

// Experiment driver for the three benchmark studies.
//
// Config files are JSON (schema_version 1):
//
//   {
//     "schema_version": 1,
//     "kind": "grad-error" | "bias-sweep" | "train",
//     "model": "three_state.json",            // relative to the config file
//     "policy": {"family": "softmax_linear", "features": [[..], ..]}
//             | {"family": "tabular"},
//     "theta_init": {"rule": "fixed", "value": [..]}
//                 | {"rule": "uniform", "half_width": 0.1},
//     "betas": [0.4, 0.95],
//     "horizons": [100, 1000, ...],           // ascending
//     "runs": 100,
//     "master_seed": 1,
//     "start_state": 0,
//     "threads": 0,                           // 0: hardware concurrency
//     "record_timing": false,                 // wall_ms column stays 0 when false
//     "max_failure_fraction": 0.05,
//     "optimizer": {"oracle": "gpomdp" | "exact", "beta": 0, "s0": 100,
//                   "epsilon": 1e-4, "line_epsilon": null,
//                   "max_iterations": 200, "max_bracket_steps": 60,
//                   "steps_per_call": 10000, "verify_ascent": true},
//     "curve_checkpoints": [..]               // train only; cumulative steps
//   }
//
// Series written per experiment kind (the `experiment` CSV column):
//
//   grad-error   grad_error        ||Delta_T - grad eta|| / ||grad eta||, per run
//                grad_error_beta   ||Delta_T - grad_beta eta|| / ||grad_beta eta||, per run
//   bias-sweep   bias_run          grad_error at the last horizon, per run
//                bias_mean         relative error of the across-run mean of Delta_T
//                bias_mean_se      delta-method standard error of bias_mean
//                bias_exact        ||grad eta - grad_beta eta|| / ||grad eta||
//   train        train_final       exact eta of the final controller; t = steps used
//                train_curve       exact eta of the current iterate at each checkpoint
//                train_curve_mean  across-run mean of train_curve
//                train_failed      1 for runs that ended in an optimizer failure
//
// Run i uses the random substream derive_seed(master_seed, i). Records are
// sorted before emission, so output is independent of thread scheduling.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pglab/benchmark.hpp"
#include "pglab/csv.hpp"
#include "pglab/exact.hpp"
#include "pglab/gpomdp.hpp"
#include "pglab/model_io.hpp"
#include "pglab/optimizer.hpp"
#include "pglab/stats.hpp"

namespace pglab {

inline constexpr int kConfigSchemaVersion = 1;

enum class ExperimentKind { grad_error, bias_sweep, train };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::grad_error: return "grad-error";
    case ExperimentKind::bias_sweep: return "bias-sweep";
    case ExperimentKind::train: return "train";
  }
  return "?";
}

using AnyPolicy = std::variant<SoftmaxLinearPolicy, TabularPolicy>;

struct ThetaRule {
  std::optional<Vector> fixed;  // used when set
  double half_width = 0.1;      // otherwise uniform in [-w, w]^K
};

enum class OracleKind { gpomdp, exact };

struct TrainSettings {
  OracleKind oracle = OracleKind::gpomdp;
  double beta = 0.0;
  ConjOptions conj{100.0, 1e-4, std::nullopt, 200, 60, true, 10000};
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::grad_error;
  std::string model_path;
  PomdpModel model;
  AnyPolicy policy = benchmark::three_state_policy();
  ThetaRule theta;
  std::vector<double> betas;
  std::vector<std::int64_t> horizons;
  int runs = 1;
  std::uint64_t master_seed = 1;
  Index start_state = 0;
  unsigned threads = 0;
  bool record_timing = false;
  double max_failure_fraction = 0.05;
  TrainSettings train;
  std::vector<std::int64_t> curve_checkpoints;
};

inline Index n_params(const AnyPolicy& p) {
  return std::visit([](const auto& q) { return q.n_params(); }, p);
}

/// Log-spaced integer checkpoints from lo to hi inclusive.
inline std::vector<std::int64_t> log_spaced(std::int64_t lo, std::int64_t hi, int points) {
  std::vector<std::int64_t> out;
  const double a = std::log10(static_cast<double>(lo));
  const double b = std::log10(static_cast<double>(hi));
  for (int i = 0; i < points; ++i) {
    const double e = points == 1 ? b : a + (b - a) * i / (points - 1);
    const auto v = static_cast<std::int64_t>(std::llround(std::pow(10.0, e)));
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  return out;
}

/// Throws ConfigError when the config is inconsistent.
inline void check_config(const ExperimentConfig& c) {
  require_valid(c.model);
  const auto pn = std::visit([](const auto& q) { return std::pair{q.n_controls(), q.n_observations()}; }, c.policy);
  if (pn.first != c.model.n_controls || pn.second != c.model.n_observations) {
    throw ConfigError("config: policy does not match model dimensions");
  }
  if (c.theta.fixed && c.theta.fixed->size() != n_params(c.policy)) throw ConfigError("config: theta has wrong length");
  if (!(c.theta.half_width >= 0.0)) throw ConfigError("config: half_width must be non-negative");
  if (c.runs < 1) throw ConfigError("config: runs must be at least 1");
  if (c.start_state < 0 || c.start_state >= c.model.n_states) throw ConfigError("config: start_state out of range");
  if (c.kind != ExperimentKind::train) {
    if (c.betas.empty()) throw ConfigError("config: betas must be non-empty");
    if (c.horizons.empty()) throw ConfigError("config: horizons must be non-empty");
    if (!std::is_sorted(c.horizons.begin(), c.horizons.end()) || c.horizons.front() < 1) {
      throw ConfigError("config: horizons must be ascending and positive");
    }
    if (std::adjacent_find(c.horizons.begin(), c.horizons.end()) != c.horizons.end()) {
      throw ConfigError("config: horizons must be distinct");
    }
    for (double b : c.betas) {
      if (!(b >= 0.0 && b < 1.0)) throw ConfigError("config: every beta must lie in [0, 1)");
    }
  } else {
    if (!(c.train.beta >= 0.0 && c.train.beta < 1.0)) throw ConfigError("config: optimizer beta must lie in [0, 1)");
    if (!(c.train.conj.s0 > 0.0) || !(c.train.conj.epsilon > 0.0)) throw ConfigError("config: s0 and epsilon must be positive");
    if (c.train.oracle == OracleKind::gpomdp && c.train.conj.steps_per_call < 1) {
      throw ConfigError("config: steps_per_call must be positive for the gpomdp oracle");
    }
    if (c.curve_checkpoints.empty()) throw ConfigError("config: curve_checkpoints must be non-empty");
  }
}

inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    const int version = j.value("schema_version", 0);
    if (version != kConfigSchemaVersion) throw ConfigError("config: unsupported schema_version " + std::to_string(version));
    ExperimentConfig c;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "grad-error") c.kind = ExperimentKind::grad_error;
    else if (kind == "bias-sweep") c.kind = ExperimentKind::bias_sweep;
    else if (kind == "train") c.kind = ExperimentKind::train;
    else throw ConfigError("config: unknown kind '" + kind + "'");

    std::filesystem::path mp = j.at("model").get<std::string>();
    if (mp.is_relative()) mp = base_dir / mp;
    c.model_path = mp.string();
    c.model = load_model(c.model_path);

    const auto& pol = j.at("policy");
    const std::string family = pol.at("family").get<std::string>();
    if (family == "softmax_linear") {
      std::vector<Vector> rows;
      for (const auto& r : pol.at("features")) rows.push_back(detail::json_vector(r, "policy.features"));
      try {
        c.policy = SoftmaxLinearPolicy(FeatureTable(std::move(rows)), c.model.n_controls);
      } catch (const PreconditionError& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    } else if (family == "tabular") {
      c.policy = TabularPolicy(c.model.n_observations, c.model.n_controls);
    } else {
      throw ConfigError("config: unknown policy family '" + family + "'");
    }

    if (j.contains("theta_init")) {
      const auto& t = j["theta_init"];
      const std::string rule = t.at("rule").get<std::string>();
      if (rule == "fixed") c.theta.fixed = detail::json_vector(t.at("value"), "theta_init.value");
      else if (rule == "uniform") c.theta.half_width = t.at("half_width").get<double>();
      else throw ConfigError("config: unknown theta_init rule '" + rule + "'");
    }
    if (j.contains("betas")) c.betas = j["betas"].get<std::vector<double>>();
    if (j.contains("horizons")) c.horizons = j["horizons"].get<std::vector<std::int64_t>>();
    c.runs = j.value("runs", 1);
    c.master_seed = j.value("master_seed", std::uint64_t{1});
    c.start_state = j.value("start_state", Index{0});
    c.threads = j.value("threads", 0U);
    c.record_timing = j.value("record_timing", false);
    c.max_failure_fraction = j.value("max_failure_fraction", 0.05);
    if (j.contains("optimizer")) {
      const auto& o = j["optimizer"];
      const std::string oracle = o.value("oracle", std::string("gpomdp"));
      if (oracle == "gpomdp") c.train.oracle = OracleKind::gpomdp;
      else if (oracle == "exact") c.train.oracle = OracleKind::exact;
      else throw ConfigError("config: unknown oracle '" + oracle + "'");
      c.train.beta = o.value("beta", 0.0);
      c.train.conj.s0 = o.value("s0", 100.0);
      c.train.conj.epsilon = o.value("epsilon", 1e-4);
      if (o.contains("line_epsilon") && !o["line_epsilon"].is_null()) c.train.conj.line_epsilon = o["line_epsilon"].get<double>();
      c.train.conj.max_iterations = o.value("max_iterations", 200);
      c.train.conj.max_bracket_steps = o.value("max_bracket_steps", 60);
      c.train.conj.steps_per_call = o.value("steps_per_call", std::uint64_t{10000});
      c.train.conj.verify_ascent = o.value("verify_ascent", true);
    }
    if (c.train.oracle == OracleKind::exact) c.train.conj.steps_per_call = 0;
    if (j.contains("curve_checkpoints")) {
      c.curve_checkpoints = j["curve_checkpoints"].get<std::vector<std::int64_t>>();
    } else {
      c.curve_checkpoints = log_spaced(1000, 1000000, 31);
    }
    check_config(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  const auto j = detail::read_json_file(path);
  try {
    return config_from_json(j, std::filesystem::path(path).parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Calls fn(i) for i in [0, n) on up to `threads` workers.
inline void parallel_for(int n, unsigned threads, const std::function<void(int)>& fn) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(n, 1)));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (int i = next++; i < n && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Delta snapshots for run r at every horizon: result[r][h].
inline std::vector<std::vector<Vector>> estimate_across_runs(const PomdpModel& m, const AnyPolicy& policy,
                                                             const Vector& theta, double beta,
                                                             const std::vector<std::int64_t>& horizons, int runs,
                                                             std::uint64_t master_seed, Index start_state = 0,
                                                             unsigned threads = 0,
                                                             std::vector<double>* wall_ms = nullptr) {
  std::vector<std::vector<Vector>> out(static_cast<std::size_t>(runs));
  if (wall_ms) wall_ms->assign(static_cast<std::size_t>(runs), 0.0);
  parallel_for(runs, threads, [&](int r) {
    const auto t0 = std::chrono::steady_clock::now();
    out[static_cast<std::size_t>(r)] = std::visit(
        [&](const auto& p) {
          return gpomdp_snapshots(m, p, theta, beta, horizons, derive_seed(master_seed, static_cast<std::uint64_t>(r)),
                                  start_state);
        },
        policy);
    if (wall_ms) {
      (*wall_ms)[static_cast<std::size_t>(r)] =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
  });
  return out;
}

struct ExperimentResult {
  std::vector<RunRecord> records;
  int runs = 0;
  int failed_runs = 0;
};

namespace detail {

inline Vector fixed_theta(const ExperimentConfig& c) {
  if (!c.theta.fixed) throw ConfigError("config: this experiment needs theta_init.rule = fixed");
  return *c.theta.fixed;
}

inline double relative_error(const Vector& estimate, const Vector& truth) {
  const double scale = truth.norm();
  return scale > 0.0 ? (estimate - truth).norm() / scale : (estimate - truth).norm();
}

}  // namespace detail

inline ExperimentResult run_grad_error(const ExperimentConfig& c) {
  if (c.kind != ExperimentKind::grad_error) throw ConfigError("run_grad_error: config kind is " + std::string(to_string(c.kind)));
  const Vector theta = detail::fixed_theta(c);
  ExperimentResult res;
  res.runs = c.runs;
  std::visit(
      [&](const auto& policy) {
        const auto chain = induced_chain(c.model, policy, theta);
        const auto st = stationary(chain.transition);
        const Vector grad = exact_gradient(chain, st.pi, c.model.rewards).value;
        for (double beta : c.betas) {
          const Vector approx = approx_gradient(chain, st.pi, discounted_values(chain.transition, c.model.rewards, beta)).value;
          std::vector<double> wall;
          const auto snaps = estimate_across_runs(c.model, c.policy, theta, beta, c.horizons, c.runs, c.master_seed,
                                                  c.start_state, c.threads, c.record_timing ? &wall : nullptr);
          for (int r = 0; r < c.runs; ++r) {
            const double ms = c.record_timing ? wall[static_cast<std::size_t>(r)] : 0.0;
            for (std::size_t h = 0; h < c.horizons.size(); ++h) {
              const Vector& d = snaps[static_cast<std::size_t>(r)][h];
              const auto seed = static_cast<std::uint64_t>(r);
              res.records.push_back({"grad_error", seed, beta, c.horizons[h], detail::relative_error(d, grad), ms});
              res.records.push_back({"grad_error_beta", seed, beta, c.horizons[h], detail::relative_error(d, approx), ms});
            }
          }
        }
      },
      c.policy);
  sort_records(res.records);
  return res;
}

inline ExperimentResult run_bias_sweep(const ExperimentConfig& c) {
  if (c.kind != ExperimentKind::bias_sweep) throw ConfigError("run_bias_sweep: config kind is " + std::string(to_string(c.kind)));
  const Vector theta = detail::fixed_theta(c);
  const std::int64_t horizon = c.horizons.back();
  ExperimentResult res;
  res.runs = c.runs;
  std::visit(
      [&](const auto& policy) {
        const auto chain = induced_chain(c.model, policy, theta);
        const auto st = stationary(chain.transition);
        const Vector grad = exact_gradient(chain, st.pi, c.model.rewards).value;
        for (double beta : c.betas) {
          const Vector approx = approx_gradient(chain, st.pi, discounted_values(chain.transition, c.model.rewards, beta)).value;
          res.records.push_back({"bias_exact", std::nullopt, beta, 0, detail::relative_error(approx, grad), 0.0});

          std::vector<double> wall;
          const auto snaps = estimate_across_runs(c.model, c.policy, theta, beta, {horizon}, c.runs, c.master_seed,
                                                  c.start_state, c.threads, c.record_timing ? &wall : nullptr);
          std::vector<Vector> finals;
          for (int r = 0; r < c.runs; ++r) {
            const Vector& d = snaps[static_cast<std::size_t>(r)].front();
            finals.push_back(d);
            const double ms = c.record_timing ? wall[static_cast<std::size_t>(r)] : 0.0;
            res.records.push_back({"bias_run", static_cast<std::uint64_t>(r), beta, horizon, detail::relative_error(d, grad), ms});
          }
          const Vector mean = stats::mean(finals);
          const Vector diff = mean - grad;
          const double bias = diff.norm() / grad.norm();
          // Delta method: d||m - g|| / dm = (m - g) / ||m - g||.
          double se = 0.0;
          if (c.runs > 1 && diff.norm() > 0.0) {
            const Vector u = diff / diff.norm();
            se = std::sqrt(u.dot(stats::covariance(finals) * u) / c.runs) / grad.norm();
          }
          res.records.push_back({"bias_mean", std::nullopt, beta, horizon, bias, 0.0});
          res.records.push_back({"bias_mean_se", std::nullopt, beta, horizon, se, 0.0});
        }
      },
      c.policy);
  sort_records(res.records);
  return res;
}

/// One CONJPOMDP run as recorded by run_train.
struct TrainRun {
  Vector theta_init;
  Vector theta_final;
  bool failed = false;
  std::string failure;
  double final_eta = 0.0;
  std::uint64_t steps = 0;
  std::vector<double> curve;  // exact eta at each checkpoint
  OptRunLog log;
};

template <Policy P>
TrainRun train_once(const ExperimentConfig& c, const P& policy, int run) {
  RandomStream rng = RandomStream::substream(c.master_seed, static_cast<std::uint64_t>(run));
  const Index k = policy.n_params();
  TrainRun out;
  if (c.theta.fixed) {
    out.theta_init = *c.theta.fixed;
  } else {
    out.theta_init.resize(k);
    for (Index i = 0; i < k; ++i) out.theta_init[i] = rng.uniform(-c.theta.half_width, c.theta.half_width);
  }

  GradOracle oracle;
  if (c.train.oracle == OracleKind::gpomdp) {
    oracle = [&](const Vector& theta) {
      return gpomdp_estimate(c.model, policy, theta, c.train.beta,
                             static_cast<std::int64_t>(c.train.conj.steps_per_call), rng.next_u64(), c.start_state)
          .value;
    };
  } else {
    oracle = [&](const Vector& theta) { return analyze(c.model, policy, theta).gradient.value; };
  }

  // Iterate history as (cumulative steps, theta) for the learning curve.
  std::vector<std::pair<std::uint64_t, Vector>> history{{0, out.theta_init}};
  try {
    auto result = conjpomdp(oracle, out.theta_init, c.train.conj);
    out.theta_final = result.theta;
    out.log = std::move(result.log);
    if (result.status == ConjStatus::budget_exhausted) out.log.warnings.push_back("budget exhausted");
  } catch (const ConjFailure& e) {
    out.failed = true;
    out.failure = e.what();
    out.theta_final = e.theta();
    out.log = e.log();
  }
  out.steps = out.log.simulation_steps;
  const auto per_call = c.train.conj.steps_per_call;
  for (const auto& s : out.log.searches) {
    if (s.theta_after.size()) history.emplace_back(s.oracle_calls * per_call, s.theta_after);
  }
  if (!out.failed) out.final_eta = exact_average_reward(c.model, policy, out.theta_final);

  std::vector<double> eta_at(history.size());
  for (std::size_t h = 0; h < history.size(); ++h) eta_at[h] = exact_average_reward(c.model, policy, history[h].second);
  for (auto cp : c.curve_checkpoints) {
    std::size_t idx = 0;
    for (std::size_t h = 0; h < history.size(); ++h) {
      if (history[h].first <= static_cast<std::uint64_t>(cp)) idx = h;
    }
    out.curve.push_back(eta_at[idx]);
  }
  return out;
}

inline ExperimentResult run_train(const ExperimentConfig& c, std::vector<TrainRun>* detail_out = nullptr) {
  if (c.kind != ExperimentKind::train) throw ConfigError("run_train: config kind is " + std::string(to_string(c.kind)));
  ExperimentResult res;
  res.runs = c.runs;
  std::vector<double> wall(static_cast<std::size_t>(c.runs), 0.0);
  std::vector<TrainRun> runs(static_cast<std::size_t>(c.runs));
  parallel_for(c.runs, c.threads, [&](int r) {
    const auto t0 = std::chrono::steady_clock::now();
    runs[static_cast<std::size_t>(r)] = std::visit([&](const auto& p) { return train_once(c, p, r); }, c.policy);
    if (c.record_timing) {
      wall[static_cast<std::size_t>(r)] =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
  });

  const double beta = c.train.beta;
  std::vector<std::vector<double>> curves;
  for (int r = 0; r < c.runs; ++r) {
    const auto& run = runs[static_cast<std::size_t>(r)];
    const auto seed = static_cast<std::uint64_t>(r);
    const auto steps = static_cast<std::int64_t>(run.steps);
    if (run.failed) {
      ++res.failed_runs;
      res.records.push_back({"train_failed", seed, beta, steps, 1.0, wall[static_cast<std::size_t>(r)]});
      continue;
    }
    res.records.push_back({"train_final", seed, beta, steps, run.final_eta, wall[static_cast<std::size_t>(r)]});
    for (std::size_t i = 0; i < c.curve_checkpoints.size(); ++i) {
      res.records.push_back({"train_curve", seed, beta, c.curve_checkpoints[i], run.curve[i], 0.0});
    }
    curves.push_back(run.curve);
  }
  if (!curves.empty()) {
    for (std::size_t i = 0; i < c.curve_checkpoints.size(); ++i) {
      double sum = 0.0;
      for (const auto& cv : curves) sum += cv[i];
      res.records.push_back({"train_curve_mean", std::nullopt, beta, c.curve_checkpoints[i], sum / curves.size(), 0.0});
    }
  }
  sort_records(res.records);
  if (detail_out) *detail_out = std::move(runs);
  return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  switch (c.kind) {
    case ExperimentKind::grad_error: return run_grad_error(c);
    case ExperimentKind::bias_sweep: return run_bias_sweep(c);
    case ExperimentKind::train: return run_train(c);
  }
  throw ConfigError("unknown experiment kind");
}

/// Records of one series, in canonical order.
inline std::vector<RunRecord> select(const std::vector<RunRecord>& records, const std::string& series) {
  std::vector<RunRecord> out;
  for (const auto& r : records) {
    if (r.experiment == series) out.push_back(r);
  }
  return out;
}

}  // namespace pglab
