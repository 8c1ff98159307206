// Acceptance checks. Prints one PASS/FAIL line per criterion; exits nonzero
// when any selected criterion fails. `--criterion N` runs a single one.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <algorithm>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reprobandit/io.hpp"
#include "reprobandit/reprobandit.hpp"

using namespace reprobandit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

ExperimentConfig mab_config(PolicyId p, std::vector<double> means, std::uint64_t t, double rho) {
  ExperimentConfig c;
  c.policy = p;
  c.env = MabEnvironment(std::move(means));
  c.horizon = t;
  c.rho = rho;
  return c;
}

Eigen::MatrixXd random_unit_arms(int d, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd a(d, k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < d; ++i) a(i, j) = n01(rng);
    a.col(j).normalize();
  }
  return a;
}

// 1. Reproducible mean of Bernoulli(0.3) samples.
Outcome sq_reproducibility() {
  const MabEnvironment env({0.3});
  SqRequest req;
  req.tau = 0.1;
  req.rho = 0.2;
  req.delta = 0.01;
  const std::uint64_t n = required_samples(req);
  const std::size_t calls = 10000;
  std::vector<char> same(calls), miss(calls);
  parallel_for(calls, [&](std::size_t k) {
    double out[2];
    for (int side = 0; side < 2; ++side) {
      MabRewardStream stream(RewardSeed{500000 + 2 * k + static_cast<std::uint64_t>(side)});
      SampleStats s;
      for (std::uint64_t t = 0; t < n; ++t) s.add(stream.pull(env, 0));
      out[side] = repro_mean(s, req, SharedSeed{k + 1});
    }
    same[k] = out[0] == out[1];
    miss[k] = std::abs(out[0] - 0.3) > req.tau;
  });
  const std::size_t agree = static_cast<std::size_t>(std::count(same.begin(), same.end(), 1));
  const std::size_t fails = static_cast<std::size_t>(std::count(miss.begin(), miss.end(), 1));
  const double lb = clopper_pearson_lower(agree, calls);
  const double cap = req.delta * calls + 3.0 * std::sqrt(calls * req.delta * (1.0 - req.delta));
  return {lb >= 0.8 && static_cast<double>(fails) <= cap,
          "n=" + std::to_string(n) + " agreement=" + num(static_cast<double>(agree) / calls) + " lower=" + num(lb) +
              " accuracy_failures=" + std::to_string(fails) + " cap=" + num(cap)};
}

// 2. Monte-Carlo grid crossing frequency against gamma/s.
Outcome grid_crossing() {
  const double s = 0.1;
  const std::size_t trials = 1000000;
  bool ok = true;
  std::string detail;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> base(-1.0, 1.0);
  for (double ratio : {0.1, 0.3, 0.9}) {
    const double gamma = ratio * s;
    std::size_t cross = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      const double off = grid_offset(SharedSeed{t + 1}, SubstreamKey{Purpose::grid_offset, 0, 0}, s);
      const double x = base(rng);
      cross += round_to_grid(x, s, off) != round_to_grid(x + gamma, s, off);
    }
    const double freq = static_cast<double>(cross) / trials;
    const double expect = grid_crossing_probability(gamma, s);
    ok = ok && std::abs(freq - expect) <= 0.005;
    detail += "gamma/s=" + num(ratio) + " freq=" + num(freq) + " ";
  }
  return {ok, detail};
}

// 3. Algorithm 2 paired agreement.
Outcome alg2_reproducibility() {
  auto c = mab_config(PolicyId::alg2, {0.9, 0.6}, 2000000, 0.5);
  const auto e = estimate_repro_rate(c, 100);
  return {e.lower_bound >= 0.5,
          "beta=" + std::to_string(blow_up(2, 0.5)) + " identical=" + std::to_string(e.identical) + "/100 lower=" +
              num(e.lower_bound)};
}

// 4. Algorithm 2 regret: ratio of regret/T and a sanity ceiling.
Outcome alg2_regret() {
  auto c = mab_config(PolicyId::alg2, {0.9, 0.6}, 0, 0.5);
  c.params.run.record_batches = false;
  const auto curve = regret_curve(c, {100000, 1000000}, 50);
  const double r5 = curve.mean_pseudo_regret[0] / 1e5;
  const double r6 = curve.mean_pseudo_regret[1] / 1e6;
  const double beta = static_cast<double>(blow_up(2, 0.5));
  const double delta = 0.3;
  bool under = true;
  for (std::size_t i = 0; i < curve.horizons.size(); ++i) {
    const double t = static_cast<double>(curve.horizons[i]);
    const double ceiling = beta * std::log(2.0 * t * std::log(t)) * (delta + 1.0 / delta) * 50.0;
    under = under && curve.mean_pseudo_regret[i] <= ceiling;
  }
  return {r6 < 0.5 * r5 && under,
          "regret/T at 1e5=" + num(r5) + " at 1e6=" + num(r6) + " ratio=" + num(r6 / r5) +
              " ceiling_ok=" + (under ? "yes" : "no")};
}

// 5. Bad-region occupancy per arm in instrumented Algorithm 2 runs.
Outcome bad_event_locality() {
  auto c = mab_config(PolicyId::alg2, {0.9, 0.6}, 2000000, 0.5);
  const std::size_t runs = 100;
  std::vector<std::size_t> worst(runs, 0);
  parallel_for(runs, [&](std::size_t k) {
    const auto trace = run_policy(c, pair_seeds(c, k, 0));
    for (const auto& [arm, n] : bad_region_batches(trace)) worst[k] = std::max(worst[k], n);
  });
  const std::size_t w = *std::max_element(worst.begin(), worst.end());
  return {w <= 6, "runs=100 max batches in bad region for one arm=" + std::to_string(w)};
}

// 6. Explore-then-commit with a known gap.
Outcome etc_reproducibility() {
  auto c = mab_config(PolicyId::etc, {0.9, 0.1}, 10000, 0.1);
  c.params.known_gap = 0.8;
  const auto e = estimate_repro_rate(c, 500);
  return {e.lower_bound >= 0.9,
          "rounds=" + std::to_string(etc_exploration_rounds(0.1, 0.8)) + " identical=" + std::to_string(e.identical) +
              "/500 lower=" + num(e.lower_bound)};
}

// 7. G-optimal design solver.
Outcome g_optimal() {
  bool ok = true;
  std::string detail;
  double basis_err = 0.0;
  for (int d = 1; d <= 6; ++d) {
    const Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(d, d);
    const auto fw = g_optimal_design(basis, SharedSeed{static_cast<std::uint64_t>(d)}, std::nullopt,
                                     d * (1.0 + 1e-12), 1000000);
    const double err = std::abs(g_value(fw.design, basis) - d);
    basis_err = std::max(basis_err, err);
  }
  ok = ok && basis_err <= 1e-9;
  double worst_g = 0.0, min_kw = INFINITY;
  std::size_t reached = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Eigen::MatrixXd arms = random_unit_arms(4, 50, 100 + s);
    const auto fw = g_optimal_design(arms, SharedSeed{s + 1});
    const double g = g_value(fw.design, arms);
    worst_g = std::max(worst_g, g);
    reached += fw.converged && g <= 8.0;
    min_kw = std::min(min_kw, g - 4.0);
    // Any design, optimal or not, obeys the lower bound.
    min_kw = std::min(min_kw, g_value(ky_initialize(arms, SharedSeed{s + 1}), arms) - 4.0);
  }
  ok = ok && reached == 20 && min_kw >= -1e-9;
  detail = "basis |g-d|max=" + num(basis_err) + " random reached=" + std::to_string(reached) +
           "/20 worst_g=" + num(worst_g) + " min(g-d)=" + num(min_kw);
  return {ok, detail};
}

// 8. Effective support on skewed designs.
Outcome effective_support_check() {
  const int d = 4;
  std::size_t good = 0;
  double worst_g = 0.0, min_w = INFINITY;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Eigen::MatrixXd arms = random_unit_arms(d, 30, 300 + s);
    const auto fw = g_optimal_design(arms, SharedSeed{s + 1}, std::nullopt, 1.9 * d);
    // Add one arm outside the support at weight 1e-3.
    Eigen::Index extra = 0;
    while (std::find(fw.design.indices.begin(), fw.design.indices.end(), static_cast<std::size_t>(extra)) !=
           fw.design.indices.end()) {
      ++extra;
    }
    const std::size_t m = fw.design.size();
    Eigen::MatrixXd sup(d, static_cast<Eigen::Index>(m + 1));
    sup << fw.design.support, arms.col(extra);
    Eigen::VectorXd w(static_cast<Eigen::Index>(m + 1));
    w << fw.design.weights * (1.0 - 1e-3), 1e-3;
    auto idx = fw.design.indices;
    idx.push_back(static_cast<std::size_t>(extra));
    const Design fixed = effective_support(make_design(sup, w, idx));
    const double g = g_value(fixed, arms);
    const double mw = fixed.weights.minCoeff();
    worst_g = std::max(worst_g, g);
    min_w = std::min(min_w, mw);
    good += mw >= effective_support_floor(d) && g <= 4.0 * d;
  }
  return {good == 20, "designs ok=" + std::to_string(good) + "/20 min_weight=" + num(min_w) +
                          " floor=" + num(effective_support_floor(d)) + " worst_g=" + num(worst_g)};
}

// 9. Reproducible least squares on a core set of a unit-ball net.
Outcome repro_lse() {
  const int d = 2;
  const Eigen::Vector2d theta(0.6, -0.5);
  const LinearEnvironment env(theta, ActionSet::unit_ball(d), 1.0);
  const NetSpec net = build_net(env.actions(), 0.25);
  const auto fw = g_optimal_design(net.points, SharedSeed{11});
  const Design core = effective_support(fw.design);
  ReproLseParams p;
  p.rho = 0.3;
  p.delta = 0.05;
  p.tau = 0.2;
  p.variance_proxy = 1.0;
  const std::uint64_t n = repro_lse_samples(p, d, core.size());
  const std::size_t runs = 2000;
  std::vector<char> same(runs);
  std::vector<int> accurate(runs);
  parallel_for(runs, [&](std::size_t k) {
    Eigen::VectorXd est[2];
    for (int side = 0; side < 2; ++side) {
      LinearRewardStream stream(RewardSeed{900000 + 2 * k + static_cast<std::uint64_t>(side)});
      std::vector<SampleStats> stats(core.size());
      for (std::size_t j = 0; j < core.size(); ++j) {
        stats[j] = {n, pull_linear_sum(env, core.support.col(static_cast<Eigen::Index>(j)), n, stream)};
      }
      est[side] = reproducible_lse(core, stats, p, SharedSeed{k + 1}).theta;
      // On the unit ball the worst-case prediction error is the Euclidean error.
      accurate[k] += (est[side] - theta).norm() <= p.tau;
    }
    same[k] = est[0] == est[1];
  });
  const std::size_t agree = static_cast<std::size_t>(std::count(same.begin(), same.end(), 1));
  const double acc = std::accumulate(accurate.begin(), accurate.end(), 0.0) / (2.0 * runs);
  const double lb = clopper_pearson_lower(agree, runs);
  return {acc >= 0.95 && lb >= 0.7, "core=" + std::to_string(core.size()) + " n/arm=" + std::to_string(n) +
                                        " accurate=" + num(acc) + " identical lower=" + num(lb)};
}

// 10. Algorithm 3 on five random arms.
Outcome alg3_check() {
  ExperimentConfig c;
  c.policy = PolicyId::alg3;
  c.env = LinearEnvironment(Eigen::Vector2d(0.7, 0.4), ActionSet::finite(random_unit_arms(2, 5, 17)), 0.3);
  c.rho = 0.5;
  c.horizon = 5000000;
  c.params.run.record_batches = false;
  const auto e = estimate_repro_rate(c, 50);
  const double big = mean_ci(e.pair_regret).mean / 5e6;
  const auto small = regret_curve(c, {500000}, 50);
  const double r_small = small.mean_pseudo_regret[0] / 5e5;
  return {e.lower_bound >= 0.5 && big < r_small,
          "identical=" + std::to_string(e.identical) + "/50 lower=" + num(e.lower_bound) +
              " regret/T at 5e5=" + num(r_small) + " at 5e6=" + num(big)};
}

// 11. Algorithm 4 on the unit ball with the coarse net.
Outcome alg4_check() {
  ExperimentConfig c;
  c.policy = PolicyId::alg4;
  c.env = LinearEnvironment(Eigen::Vector2d(0.6, 0.8), ActionSet::unit_ball(2), 0.3);
  c.rho = 0.5;
  c.horizon = 10000000;
  const auto e = estimate_repro_rate(c, 30);

  ExperimentConfig q = c;
  q.env = LinearEnvironment(Eigen::Vector2d(1.0, 0.0), ActionSet::unit_ball(2), 0.0);
  const auto& qenv = std::get<LinearEnvironment>(q.env);
  const Eigen::MatrixXd pts = policy_points(q);
  const double best_net = (qenv.theta().transpose() * pts).maxCoeff();
  std::size_t same = 0, zero_regret = 0;
  for (std::uint64_t k = 0; k < 30; ++k) {
    const auto r = run_paired(q, k);
    same += r.identical;
    for (const auto* t : {&r.first, &r.second}) {
      zero_regret += qenv.mean_reward(pts.col(t->committed_arm)) == best_net;
    }
  }
  return {e.lower_bound >= 0.5 && same == 30 && zero_regret == 60,
          "net=" + std::to_string(pts.cols()) + " noisy identical=" + std::to_string(e.identical) +
              "/30 lower=" + num(e.lower_bound) + " noiseless identical=" + std::to_string(same) +
              "/30 zero final regret=" + std::to_string(zero_regret) + "/60"};
}

// 12. Sweep determinism.
Outcome sweep_determinism() {
  const auto cfg = io::json::parse(R"({"configs":[
    {"policy":"alg2","env":{"kind":"mab","means":[0.9,0.6]},"env_id":"two","horizons":[100000,300000],"rho":[0.5,0.25],"runs":6},
    {"policy":"etc","env":{"kind":"mab","means":[0.52,0.48]},"env_id":"close","T":5000,"rho":0.5,"runs":10,"known_gap":0.5},
    {"policy":"alg3","env":{"kind":"linear","theta":[0.5,0.1],"actions":{"kind":"finite","points":[[1,0],[0,1],[0.6,0.8]]},"sigma":0.3},"env_id":"lin","T":200000,"rho":0.5,"runs":4},
    {"policy":"alg2","env":{"kind":"mab","means":[0.9,0.6]},"env_id":"short","T":50,"rho":0.5,"runs":4}]})");
  auto render = [&](unsigned threads) {
    std::ostringstream os;
    io::write_regret_csv(os, sweep(io::sweep_from_json(cfg), threads));
    return os.str();
  };
  const std::string a = render(1), b = render(1), c = render(3);
  return {a == b && a == c, "bytes=" + std::to_string(a.size()) + " rerun_equal=" + (a == b ? "yes" : "no") +
                                " threads_equal=" + (a == c ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "run one criterion (1-12)")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"sq-reproducibility", sq_reproducibility},     {"grid-crossing", grid_crossing},
      {"alg2-reproducibility", alg2_reproducibility}, {"alg2-regret", alg2_regret},
      {"bad-event-locality", bad_event_locality},     {"etc-reproducibility", etc_reproducibility},
      {"g-optimal-design", g_optimal},                {"effective-support", effective_support_check},
      {"reproducible-lse", repro_lse},                {"alg3", alg3_check},
      {"alg4", alg4_check},                           {"sweep-determinism", sweep_determinism}};

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<std::size_t>(only) != i + 1) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& ex) {
      o = {false, std::string("error: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s c%02zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
