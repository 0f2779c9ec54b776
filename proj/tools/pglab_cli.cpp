// pglab: command-line driver for the policy-gradient experiments.
//
//   pglab validate   --model FILE | --config FILE
//   pglab analyze    [--config FILE] [--theta a,b,..] [--beta B]... [--t-max N]
//   pglab grad-error --config FILE [--seed S] [--runs N] [--out DIR] [--threads N]
//   pglab bias-sweep --config FILE [...]
//   pglab train      --config FILE [...]
//
// Exit codes: 0 success, 1 configuration error, 2 too many failed runs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pglab/pglab.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRunFailures = 2;

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<unsigned> threads;
  std::string out = ".";
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw pglab::ConfigError("cannot parse number '" + cell + "'");
    }
  }
  return out;
}

nlohmann::json vec_json(const pglab::Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json summarize(const pglab::ExperimentConfig& c, const pglab::ExperimentResult& res) {
  using pglab::stats::mean;
  using pglab::stats::quantile;
  nlohmann::json s;
  s["kind"] = pglab::to_string(c.kind);
  s["model"] = c.model_path;
  s["start_state"] = c.start_state;
  s["master_seed"] = c.master_seed;
  s["runs"] = c.runs;
  s["failed_runs"] = res.failed_runs;

  // Group per-run values by (series, beta, t).
  std::map<std::tuple<std::string, double, std::int64_t>, std::vector<double>> groups;
  for (const auto& r : res.records) groups[{r.experiment, r.beta, r.t_or_steps}].push_back(r.value);

  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [key, values] : groups) {
    const auto& [series, beta, t] = key;
    if (series == "train_curve") continue;
    nlohmann::json row{{"series", series}, {"beta", beta}, {"t_or_steps", t}};
    if (values.size() == 1) {
      row["value"] = values.front();
    } else {
      row["mean"] = mean(values);
      row["median"] = quantile(values, 0.5);
      row["p10"] = quantile(values, 0.1);
      row["p90"] = quantile(values, 0.9);
    }
    rows.push_back(std::move(row));
  }
  if (c.kind == pglab::ExperimentKind::train) {
    std::vector<double> finals, steps;
    for (const auto& r : pglab::select(res.records, "train_final")) {
      finals.push_back(r.value);
      steps.push_back(static_cast<double>(r.t_or_steps));
    }
    s["final_eta_mean"] = mean(finals);
    s["final_eta_p90"] = quantile(finals, 0.9);
    s["final_eta_min"] = finals.empty() ? 0.0 : *std::min_element(finals.begin(), finals.end());
    s["steps_mean"] = mean(steps);
  }
  s["series"] = std::move(rows);
  return s;
}

int run_experiment_command(const RunFlags& flags, pglab::ExperimentKind expected) {
  pglab::ExperimentConfig cfg = pglab::load_config(flags.config);
  if (cfg.kind != expected) {
    throw pglab::ConfigError(flags.config + ": config kind is " + pglab::to_string(cfg.kind) + ", expected " +
                             pglab::to_string(expected));
  }
  if (flags.seed) cfg.master_seed = *flags.seed;
  if (flags.runs) cfg.runs = *flags.runs;
  if (flags.threads) cfg.threads = *flags.threads;
  pglab::check_config(cfg);

  const auto res = pglab::run_experiment(cfg);

  std::filesystem::create_directories(flags.out);
  const std::string stem = (std::filesystem::path(flags.out) / pglab::to_string(cfg.kind)).string();
  pglab::emit_csv(res.records, stem + ".csv");
  const auto summary = summarize(cfg, res);
  {
    std::ofstream f(stem + "_summary.json");
    f << summary.dump(2) << '\n';
    if (!f) throw std::runtime_error("cannot write " + stem + "_summary.json");
  }
  std::cout << summary.dump(2) << '\n';
  std::cerr << "wrote " << stem << ".csv (" << res.records.size() << " records)\n";

  if (res.runs > 0 && static_cast<double>(res.failed_runs) > cfg.max_failure_fraction * res.runs) {
    std::cerr << res.failed_runs << " of " << res.runs << " runs failed\n";
    return kExitRunFailures;
  }
  return kExitOk;
}

int run_validate(const std::string& model_path, const std::string& config_path) {
  if (!config_path.empty()) {
    const auto cfg = pglab::load_config(config_path);
    std::cout << config_path << ": ok (" << pglab::to_string(cfg.kind) << ", model " << cfg.model_path << ")\n";
    return kExitOk;
  }
  if (model_path.empty()) throw pglab::ConfigError("validate: pass --model or --config");
  const auto model = pglab::load_model(model_path);
  const auto report = pglab::validate_model(model);
  if (report.ok()) {
    std::cout << model_path << ": ok\n";
    return kExitOk;
  }
  for (const auto& v : report.violations) std::cout << v.location << ": " << v.message << '\n';
  return kExitConfig;
}

int run_analyze(const std::string& config_path, const std::string& theta_text, const std::vector<double>& betas,
                int t_max) {
  pglab::PomdpModel model = pglab::benchmark::three_state_model();
  pglab::AnyPolicy policy = pglab::benchmark::three_state_policy();
  pglab::Vector theta = pglab::benchmark::reference_theta();
  if (!config_path.empty()) {
    const auto cfg = pglab::load_config(config_path);
    model = cfg.model;
    policy = cfg.policy;
    if (cfg.theta.fixed) theta = *cfg.theta.fixed;
  }
  if (!theta_text.empty()) {
    const auto v = parse_list(theta_text);
    theta = Eigen::Map<const pglab::Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  if (theta.size() != pglab::n_params(policy)) throw pglab::ConfigError("analyze: theta has wrong length");

  nlohmann::json out;
  std::visit(
      [&](const auto& p) {
        const auto a = pglab::analyze(model, p, theta);
        const auto mix = pglab::mixing_time(a.chain.transition, t_max);
        out["theta"] = vec_json(theta);
        out["eta"] = a.eta;
        out["stationary"] = vec_json(a.stationary.pi);
        out["grad_eta"] = vec_json(a.gradient.value);
        out["mixing_distance"] = mix.distance;
        if (mix.tau_star) out["tau_star"] = *mix.tau_star;
        else out["tau_star"] = nullptr;
        nlohmann::json rows = nlohmann::json::array();
        for (double beta : betas) {
          const auto j = pglab::discounted_values(a.chain.transition, model.rewards, beta);
          const auto approx = pglab::approx_gradient(a.chain, a.stationary.pi, j);
          nlohmann::json row{{"beta", beta},
                             {"grad_beta_eta", vec_json(approx.value)},
                             {"relative_bias", (a.gradient.value - approx.value).norm() / a.gradient.value.norm()},
                             {"decomposition_residual",
                              pglab::gradient_decomposition_check(a.chain, a.stationary.pi, model.rewards, j)}};
          if (mix.tau_star) {
            row["bias_mixing_ratio"] = pglab::mixing_bias_ratio(a.gradient.value, approx.value, *mix.tau_star, beta);
          }
          rows.push_back(std::move(row));
        }
        out["discounted"] = std::move(rows);
      },
      policy);
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "Override the master seed");
  cmd->add_option("--runs", flags.runs, "Override the number of runs");
  cmd->add_option("--threads", flags.threads, "Worker threads (0: all cores)");
  cmd->add_option("--out", flags.out, "Output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy-gradient experiments on finite POMDPs"};
  app.require_subcommand(1);

  std::string model_path, config_path;
  auto* validate = app.add_subcommand("validate", "Check a model or config file");
  validate->add_option("--model", model_path, "Model file (JSON)");
  validate->add_option("--config", config_path, "Experiment config (JSON)");

  std::string analyze_config, theta_text;
  std::vector<double> betas{0.0, 0.4, 0.8, 0.95, 0.99};
  int t_max = 50;
  auto* analyze = app.add_subcommand("analyze", "Exact quantities at one theta");
  analyze->add_option("--config", analyze_config, "Config supplying model, policy and theta");
  analyze->add_option("--theta", theta_text, "Comma-separated parameter vector");
  analyze->add_option("--beta", betas, "Discount factors for grad_beta eta")->capture_default_str();
  analyze->add_option("--t-max", t_max, "Horizon for mixing-time powers")->capture_default_str();

  RunFlags grad_flags, bias_flags, train_flags;
  auto* grad = app.add_subcommand("grad-error", "Relative gradient error versus horizon");
  add_run_flags(grad, grad_flags);
  auto* bias = app.add_subcommand("bias-sweep", "Final bias versus discount factor");
  add_run_flags(bias, bias_flags);
  auto* train = app.add_subcommand("train", "CONJPOMDP training runs");
  add_run_flags(train, train_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*validate) return run_validate(model_path, config_path);
    if (*analyze) return run_analyze(analyze_config, theta_text, betas, t_max);
    if (*grad) return run_experiment_command(grad_flags, pglab::ExperimentKind::grad_error);
    if (*bias) return run_experiment_command(bias_flags, pglab::ExperimentKind::bias_sweep);
    if (*train) return run_experiment_command(train_flags, pglab::ExperimentKind::train);
  } catch (const pglab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const pglab::PreconditionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRunFailures;
  }
  return kExitOk;
}
