#ifndef REPROBANDIT_IO_HPP
#define REPROBANDIT_IO_HPP

// JSON configuration parsing and CSV / JSON result writers.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reprobandit/environments.hpp"
#include "reprobandit/errors.hpp"
#include "reprobandit/harness.hpp"
#include "reprobandit/optimal_design.hpp"
#include "reprobandit/trace.hpp"

namespace reprobandit::io {

using nlohmann::json;

inline json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline Eigen::MatrixXd points_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw ConfigError("points must be a nonempty array of vectors");
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd pts(d, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (static_cast<Eigen::Index>(rows[j].size()) != d) throw ConfigError("points of mixed dimension");
    for (Eigen::Index k = 0; k < d; ++k) pts(k, static_cast<Eigen::Index>(j)) = rows[j][static_cast<std::size_t>(k)].get<double>();
  }
  return pts;
}

inline json points_to_json(const Eigen::MatrixXd& pts) {
  json rows = json::array();
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    json row = json::array();
    for (Eigen::Index k = 0; k < pts.rows(); ++k) row.push_back(pts(k, j));
    rows.push_back(row);
  }
  return rows;
}

inline ActionSet action_set_from_json(const json& j) {
  const std::string kind = j.value("kind", "finite");
  if (kind == "finite") return ActionSet::finite(points_from_json(j.at("points")));
  if (kind == "unit_ball") return ActionSet::unit_ball(j.at("dim").get<int>());
  if (kind == "hypercube_vertices") return ActionSet::hypercube_vertices(j.at("dim").get<int>());
  throw ConfigError("unknown action set kind '" + kind + "'");
}

// {"kind":"mab","means":[...],"distribution":"bernoulli"|"uniform"} or
// {"kind":"linear","theta":[...],"actions":{...},"sigma":s}
inline Environment environment_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "mab") {
      const std::string dist = j.value("distribution", "bernoulli");
      RewardDistribution rd = RewardDistribution::bernoulli;
      if (dist == "uniform") {
        rd = RewardDistribution::uniform_around_mean;
      } else if (dist != "bernoulli") {
        throw ConfigError("unknown reward distribution '" + dist + "'");
      }
      return MabEnvironment(j.at("means").get<std::vector<double>>(), rd);
    }
    if (kind == "linear") {
      const auto th = j.at("theta").get<std::vector<double>>();
      Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(th.data(), static_cast<Eigen::Index>(th.size()));
      return LinearEnvironment(theta, action_set_from_json(j.at("actions")), j.value("sigma", 1.0));
    }
    throw ConfigError("unknown environment kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("environment: ") + e.what());
  }
}

// A sweep file holds {"configs":[...]}. Each entry names a policy, an
// environment (inline "env" or "env_file" relative to the sweep file), and
// either "T" or a "horizons" list; "rho" may also be a list. Lists expand in
// order: horizons outer, rho inner.
inline std::vector<ExperimentConfig> sweep_from_json(const json& root, const std::filesystem::path& base_dir = {}) {
  std::vector<ExperimentConfig> out;
  try {
    for (const json& e : root.at("configs")) {
      ExperimentConfig c;
      c.policy = parse_policy(e.at("policy").get<std::string>());
      if (e.contains("env")) {
        c.env = environment_from_json(e.at("env"));
      } else {
        c.env = environment_from_json(load_json(base_dir / e.at("env_file").get<std::string>()));
      }
      c.env_id = e.value("env_id", std::string("env"));
      c.runs = e.value("runs", std::size_t{30});
      c.shared_base = e.value("shared_seed", std::uint64_t{1});
      c.reward_base = e.value("reward_seed", std::uint64_t{1000003});
      if (e.contains("known_gap")) c.params.known_gap = e.at("known_gap").get<double>();
      if (e.contains("beta")) c.params.beta_override = e.at("beta").get<std::uint64_t>();
      c.params.alg4.net_eta = e.value("net_eta", 0.0);
      c.params.alg4.even_allocation = e.value("even_allocation", false);

      std::vector<std::uint64_t> horizons;
      if (e.contains("horizons")) {
        horizons = e.at("horizons").get<std::vector<std::uint64_t>>();
      } else {
        horizons.push_back(e.at("T").get<std::uint64_t>());
      }
      std::vector<double> rhos;
      if (e.at("rho").is_array()) {
        rhos = e.at("rho").get<std::vector<double>>();
      } else {
        rhos.push_back(e.at("rho").get<double>());
      }
      for (std::uint64_t t : horizons) {
        for (double r : rhos) {
          ExperimentConfig x = c;
          x.horizon = t;
          x.rho = r;
          validate(x);
          out.push_back(std::move(x));
        }
      }
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("sweep config: ") + ex.what());
  }
  if (out.empty()) throw ConfigError("sweep config lists no experiments");
  return out;
}

// Shortest text that reads back to the same double.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  double back = 0.0;
  for (int p = 6; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, x);
    std::sscanf(buf, "%lf", &back);
    if (back == x) break;
  }
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

inline void write_trace_csv(std::ostream& os, const ExecutionTrace& trace) {
  os << "t,arm,reward\n";
  const bool with_rewards = trace.rewards.size() == trace.length();
  std::uint64_t t = 0;
  for (const auto& s : trace.segments()) {
    for (std::uint64_t k = 0; k < s.count; ++k, ++t) {
      os << t << ',' << s.arm << ',' << (with_rewards ? fmt(trace.rewards[t]) : std::string()) << '\n';
    }
  }
}

inline json batch_log_json(const ExecutionTrace& trace) {
  json out = json::array();
  for (const auto& b : trace.batches) {
    json j;
    j["batch"] = b.index;
    j["active"] = b.active;
    j["pulls"] = b.pulls;
    auto num = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
    j["radius"] = num(b.radius);
    j["radius_tilde"] = num(b.radius_tilde);
    j["threshold"] = num(b.threshold);
    j["achieved_g"] = num(b.achieved_g);
    j["core_size"] = b.core_size;
    j["arms"] = b.arms;
    j["estimates"] = b.estimates;
    j["eliminated"] = b.eliminated;
    out.push_back(std::move(j));
  }
  return out;
}

inline void write_pairs_csv(std::ostream& os, const ReproEstimate& e) {
  os << "pair_id,identical,first_divergence\n";
  for (std::size_t k = 0; k < e.first_divergence.size(); ++k) {
    const auto& d = e.first_divergence[k];
    os << k << ',' << (d ? 0 : 1) << ',' << (d ? std::to_string(*d) : std::string()) << '\n';
  }
}

inline void write_regret_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "policy,T,rho,mean_regret,ci,env_id,pairs,agreement,agreement_lower,error\n";
  for (const auto& r : rows) {
    os << r.policy << ',' << r.horizon << ',' << fmt(r.rho) << ',' << fmt(r.mean_regret) << ',' << fmt(r.ci) << ','
       << csv_field(r.env_id) << ',' << r.pairs << ',' << fmt(r.agreement) << ',' << fmt(r.agreement_lower) << ','
       << csv_field(r.error) << '\n';
  }
}

inline json design_json(const Design& design, double g) {
  json j;
  j["support"] = points_to_json(design.support);
  j["weights"] = std::vector<double>(design.weights.data(), design.weights.data() + design.weights.size());
  j["indices"] = design.indices;
  j["g"] = g;
  return j;
}

}  // namespace reprobandit::io

#endif
