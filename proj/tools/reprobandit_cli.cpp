// Command-line front end: simulate, repro-test, sweep, design.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reprobandit/io.hpp"
#include "reprobandit/reprobandit.hpp"

using namespace reprobandit;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

// "2d", "1.5d" or a plain number.
double parse_target_g(const std::string& s, int d) {
  if (!s.empty() && s.back() == 'd') {
    const std::string head = s.substr(0, s.size() - 1);
    return (head.empty() ? 1.0 : std::stod(head)) * d;
  }
  return std::stod(s);
}

struct PolicyArgs {
  std::string policy = "alg2";
  std::string env_path;
  std::uint64_t horizon = 100000;
  double rho = 0.5;
  std::optional<double> delta_min;
  double net_eta = 0.0;
  bool even_allocation = false;
  std::optional<std::uint64_t> beta;

  void attach(CLI::App* cmd) {
    cmd->add_option("--policy", policy, "etc, alg1, alg2, alg3 or alg4")->required();
    cmd->add_option("--env", env_path, "environment JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--T", horizon, "horizon")->required()->check(CLI::PositiveNumber);
    cmd->add_option("--rho", rho, "reproducibility budget in (0,1]")->required();
    cmd->add_option("--delta-min", delta_min, "gap handed to explore-then-commit");
    cmd->add_option("--net-eta", net_eta, "net resolution for alg4 (default T^{-1/(4d+2)})");
    cmd->add_flag("--even-allocation", even_allocation, "alg4: split each batch evenly over the core set");
    cmd->add_option("--beta", beta, "override the per-batch blow-up factor");
  }

  ExperimentConfig config() const {
    ExperimentConfig c;
    c.policy = parse_policy(policy);
    c.env = io::environment_from_json(io::load_json(env_path));
    c.env_id = env_path;
    c.horizon = horizon;
    c.rho = rho;
    c.params.known_gap = delta_min;
    c.params.beta_override = beta;
    c.params.alg4.net_eta = net_eta;
    c.params.alg4.even_allocation = even_allocation;
    return c;
  }
};

int simulate(const PolicyArgs& a, std::uint64_t shared, std::uint64_t reward, const std::string& out,
             const std::string& batch_log, bool rewards) {
  ExperimentConfig c = a.config();
  c.params.run.record_rewards = rewards;
  const ExecutionTrace trace = run_policy(c, Seeds{SharedSeed{shared}, RewardSeed{reward}});
  auto os = open_out(out);
  io::write_trace_csv(os, trace);
  if (!batch_log.empty()) open_out(batch_log) << io::batch_log_json(trace).dump(2) << '\n';
  std::cerr << "pseudo-regret " << io::fmt(regret_evaluator(c)(trace)) << ", committed arm " << trace.committed_arm
            << '\n';
  return 0;
}

int repro_policy(const PolicyArgs& a, std::size_t pairs, std::uint64_t shared, std::uint64_t reward,
                 const std::string& out) {
  ExperimentConfig c = a.config();
  c.shared_base = shared;
  c.reward_base = reward;
  c.params.run.record_batches = false;
  const ReproEstimate e = estimate_repro_rate(c, pairs);
  auto os = open_out(out);
  io::write_pairs_csv(os, e);
  const bool ok = e.lower_bound >= 1.0 - c.rho;
  std::cerr << e.identical << '/' << e.pairs << " identical, lower bound " << io::fmt(e.lower_bound) << " vs "
            << io::fmt(1.0 - c.rho) << (ok ? " (certified)" : " (not certified)") << '\n';
  return ok ? 0 : 2;
}

// Paired reproducible means of Bernoulli(p) data.
int repro_mean_primitive(double p, double tau, double rho, double delta, std::size_t calls, std::uint64_t shared,
                         std::uint64_t reward, const std::string& out) {
  const MabEnvironment env({p});
  SqRequest req;
  req.tau = tau;
  req.rho = rho;
  req.delta = delta;
  const std::uint64_t n = required_samples(req);
  std::vector<char> same(calls), hit(calls);
  parallel_for(calls, [&](std::size_t k) {
    double v[2];
    for (int side = 0; side < 2; ++side) {
      MabRewardStream stream(RewardSeed{reward + 2 * k + static_cast<std::uint64_t>(side)});
      SampleStats s;
      for (std::uint64_t t = 0; t < n; ++t) s.add(stream.pull(env, 0));
      v[side] = repro_mean(s, req, SharedSeed{shared + k});
    }
    same[k] = v[0] == v[1];
    hit[k] = std::abs(v[0] - p) <= tau;
  });
  const auto agree = static_cast<std::size_t>(std::count(same.begin(), same.end(), 1));
  const auto acc = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
  auto os = open_out(out);
  os << "tau,rho,delta,agreement_rate,accuracy_rate\n"
     << io::fmt(tau) << ',' << io::fmt(rho) << ',' << io::fmt(delta) << ','
     << io::fmt(static_cast<double>(agree) / calls) << ',' << io::fmt(static_cast<double>(acc) / calls) << '\n';
  const double lb = clopper_pearson_lower(agree, calls);
  const bool ok = lb >= 1.0 - rho;
  std::cerr << n << " samples per call, agreement lower bound " << io::fmt(lb)
            << (ok ? " (certified)" : " (not certified)") << '\n';
  return ok ? 0 : 2;
}

int run_sweep(const std::string& path, const std::string& out, unsigned threads) {
  const auto configs = io::sweep_from_json(io::load_json(path), std::filesystem::path(path).parent_path());
  const auto rows = sweep(configs, threads);
  auto os = open_out(out);
  io::write_regret_csv(os, rows);
  int bad = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      std::cerr << r.policy << " T=" << r.horizon << " rho=" << io::fmt(r.rho) << ": " << r.error << '\n';
      ++bad;
    } else if (r.agreement_lower < 1.0 - r.rho) {
      std::cerr << r.policy << " T=" << r.horizon << " rho=" << io::fmt(r.rho) << ": agreement lower bound "
                << io::fmt(r.agreement_lower) << " below " << io::fmt(1.0 - r.rho) << '\n';
      ++bad;
    }
  }
  return bad == 0 ? 0 : 2;
}

int run_design(const std::string& arms_path, const std::string& target, const std::string& out,
               std::uint64_t seed, std::size_t iters) {
  const io::json j = io::load_json(arms_path);
  const Eigen::MatrixXd arms = io::points_from_json(j.is_object() ? j.at("arms") : j);
  const int d = static_cast<int>(arms.rows());
  const auto fw = g_optimal_design(arms, SharedSeed{seed}, std::nullopt, parse_target_g(target, d), iters);
  io::json doc = io::design_json(fw.design, fw.g);
  doc["iterations"] = fw.iterations;
  doc["converged"] = fw.converged;
  open_out(out) << doc.dump(2) << '\n';
  std::cerr << "g = " << io::fmt(fw.g) << " after " << fw.iterations << " iterations\n";
  return fw.converged ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reproducible bandit simulations"};
  app.require_subcommand(1);

  PolicyArgs sim_args;
  std::uint64_t sim_shared = 1, sim_reward = 1000003;
  std::string sim_out = "trace.csv", sim_log;
  bool sim_rewards = false;
  auto* sim = app.add_subcommand("simulate", "run one execution and write its trace");
  sim_args.attach(sim);
  sim->add_option("--shared-seed", sim_shared, "internal randomness seed");
  sim->add_option("--reward-seed", sim_reward, "reward randomness seed");
  sim->add_option("--out", sim_out, "trace CSV (t, arm, reward)");
  sim->add_option("--batch-log", sim_log, "per-batch JSON log");
  sim->add_flag("--rewards", sim_rewards, "record realized rewards in the trace");

  PolicyArgs rt_args;
  std::string primitive;
  std::size_t rt_pairs = 100;
  std::uint64_t rt_shared = 1, rt_reward = 1000003;
  std::string rt_out = "pairs.csv";
  double pm = 0.3, ptau = 0.1, prho = 0.2, pdelta = 0.01;
  auto* rt = app.add_subcommand("repro-test", "paired executions and agreement certification");
  rt->add_option("--primitive", primitive, "certify a primitive instead of a policy")
      ->check(CLI::IsMember({"mean"}));
  rt->add_option("--policy", rt_args.policy, "etc, alg1, alg2, alg3 or alg4");
  rt->add_option("--env", rt_args.env_path, "environment JSON")->check(CLI::ExistingFile);
  rt->add_option("--T", rt_args.horizon, "horizon")->check(CLI::PositiveNumber);
  rt->add_option("--rho", prho, "reproducibility budget in (0,1]");
  rt->add_option("--delta-min", rt_args.delta_min, "gap handed to explore-then-commit");
  rt->add_option("--net-eta", rt_args.net_eta, "net resolution for alg4");
  rt->add_flag("--even-allocation", rt_args.even_allocation, "alg4: even split over the core set");
  rt->add_option("--beta", rt_args.beta, "override the per-batch blow-up factor");
  rt->add_option("--pairs", rt_pairs, "number of paired executions (or calls)")->check(CLI::Range(30, 100000000));
  rt->add_option("--shared-seed", rt_shared, "seed of pair 0; pair k uses base + k");
  rt->add_option("--reward-seed", rt_reward, "reward seed base");
  rt->add_option("--mean", pm, "Bernoulli mean for --primitive mean")->check(CLI::Range(0.0, 1.0));
  rt->add_option("--tau", ptau, "accuracy for --primitive mean");
  rt->add_option("--delta", pdelta, "failure probability for --primitive mean");
  rt->add_option("--out", rt_out, "output CSV");

  std::string sw_config, sw_out = "regret.csv";
  unsigned sw_threads = 0;
  auto* sw = app.add_subcommand("sweep", "run a table of configurations");
  sw->add_option("--config", sw_config, "sweep JSON")->required()->check(CLI::ExistingFile);
  sw->add_option("--out", sw_out, "regret CSV");
  sw->add_option("--threads", sw_threads, "worker threads (0: all cores)");

  std::string ds_arms, ds_target = "2d", ds_out = "design.json";
  std::uint64_t ds_seed = 1;
  std::size_t ds_iters = 10000;
  auto* ds = app.add_subcommand("design", "G-optimal design over a finite arm set");
  ds->add_option("--arms", ds_arms, "JSON array of arm vectors, or {\"arms\": [...]}")->required()->check(CLI::ExistingFile);
  ds->add_option("--target-g", ds_target, "stop once g reaches this value, e.g. 2d");
  ds->add_option("--out", ds_out, "design JSON");
  ds->add_option("--seed", ds_seed, "initialization seed");
  ds->add_option("--max-iters", ds_iters, "Frank-Wolfe iteration cap");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return simulate(sim_args, sim_shared, sim_reward, sim_out, sim_log, sim_rewards);
    if (rt->parsed()) {
      if (!primitive.empty()) {
        return repro_mean_primitive(pm, ptau, prho, pdelta, rt_pairs, rt_shared, rt_reward, rt_out);
      }
      if (rt_args.env_path.empty()) throw ConfigError("repro-test needs --primitive or --policy with --env");
      rt_args.rho = prho;
      return repro_policy(rt_args, rt_pairs, rt_shared, rt_reward, rt_out);
    }
    if (sw->parsed()) return run_sweep(sw_config, sw_out, sw_threads);
    if (ds->parsed()) return run_design(ds_arms, ds_target, ds_out, ds_seed, ds_iters);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
