#pragma once

#include <chrono>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>

#include "mvtd/actor.hpp"
#include "mvtd/critic.hpp"
#include "mvtd/features.hpp"
#include "mvtd/gradients.hpp"
#include "mvtd/io.hpp"
#include "mvtd/linear_system.hpp"
#include "mvtd/mdp.hpp"

namespace mvtd {

inline constexpr const char* kToolVersion = "mvtd 0.1.0";

struct CriticSettings {
  long t = 0;
  long k = 0;
  double beta = 0.0;
  std::optional<double> zeta;
  std::optional<double> h_radius;
  int replications = 0;
  std::optional<double> delta;
  bool override_step_size = false;
};

struct GradientSettings {
  double kappa = 1.0;
  double rho = 0.5;
  double lambda = 0.0;
  double variance_threshold = 0.0;
  CnuForm cnu_form = CnuForm::half;
};

// Fully resolved experiment: the instance (MDP, policy, features, linear
// system with every constant) plus run settings, with all auto values
// materialized into the `resolved` snapshot.
struct ExperimentConfig {
  Mdp mdp;
  TabularPolicy policy;
  std::optional<SoftmaxPolicy> softmax;  // set when policy.type == softmax
  OnPolicyChain chain;
  FeatureSet features;
  CriticSystem system;
  CriticSettings critic;
  std::optional<ActorConfig> actor;
  GradientSettings gradients;
  std::uint64_t seed = 0;
  std::string out_dir;
  int threads = 0;
  json resolved;  // snapshot with auto values materialized
};

namespace detail {

inline Matrix json_to_matrix(const json& rows) {
  if (!rows.is_array() || rows.empty())
    throw ParseError("expected a nested array");
  const int r = static_cast<int>(rows.size());
  const int c = static_cast<int>(rows.at(0).size());
  Matrix m(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(rows.at(i).size()) != c)
      throw ParseError("ragged nested array");
    for (int j = 0; j < c; ++j) m(i, j) = rows.at(i).at(j).get<double>();
  }
  return m;
}

inline Mdp build_mdp(const json& mdp_doc, std::uint64_t base_seed) {
  const std::string kind = mdp_doc.at("kind").get<std::string>();
  if (kind == "file") return load_mdp(mdp_doc.at("path").get<std::string>());
  if (kind == "inline") return mdp_from_json(mdp_doc.at("mdp"));
  if (kind != "generator")
    throw ParseError("mdp.kind must be generator|file|inline");
  const json& gen = mdp_doc.at("generator");
  const std::string type = gen.at("type").get<std::string>();
  if (type == "chain") {
    Mdp m = make_chain_mdp(gen.at("length").get<int>(),
                           gen.at("slip").get<double>(),
                           gen.at("gamma").get<double>());
    if (gen.contains("reward_scale")) {
      const double s = gen.at("reward_scale").get<double>();
      m.rewards *= s;
      m.r_max *= std::abs(s);
    }
    return m;
  }
  if (type == "garnet") {
    Rng rng(gen.value("seed", base_seed));
    return make_garnet_mdp(gen.at("num_states").get<int>(),
                           gen.at("num_actions").get<int>(),
                           gen.at("branching").get<int>(),
                           gen.at("gamma").get<double>(),
                           gen.value("r_max", 1.0), rng);
  }
  throw ParseError("generator.type must be chain|garnet");
}

}  // namespace detail

// Parses and resolves an experiment document. Auto values: critic.beta =
// beta_max (or zeta/c_check when regularized), critic.zeta = 1/sqrt(t-k),
// critic.h_radius = 1.1 ||xi|| / mu, actor schedule per n^{-3/4}, n^{-1/4},
// m = n, k = m/2.
inline ExperimentConfig resolve_experiment(const json& doc) {
  ExperimentConfig cfg;
  try {
    cfg.seed = doc.value("seed", 1ULL);
    cfg.out_dir = doc.value("out", std::string{});
    cfg.threads = doc.value("threads", 0);
    if (cfg.threads == 0)
      if (const char* env = std::getenv("MVTD_THREADS"))
        cfg.threads = std::atoi(env);

    cfg.mdp = detail::build_mdp(doc.at("mdp"), cfg.seed);

    const json pol = doc.value("policy", json{{"type", "uniform"}});
    const std::string pol_type = pol.at("type").get<std::string>();
    if (pol_type == "uniform") {
      cfg.policy = uniform_policy(cfg.mdp);
    } else if (pol_type == "table") {
      cfg.policy.probs = detail::json_to_matrix(pol.at("probs"));
    } else if (pol_type == "softmax") {
      SoftmaxPolicy sp;
      const json& th = pol.at("theta");
      sp.theta = Vector(th.size());
      for (std::size_t i = 0; i < th.size(); ++i)
        sp.theta[i] = th.at(i).get<double>();
      for (const json& x : pol.at("action_features"))
        sp.action_features.push_back(detail::json_to_matrix(x));
      if (static_cast<int>(sp.action_features.size()) != cfg.mdp.num_states)
        throw ParseError("action_features must list one table per state");
      cfg.softmax = sp;
      cfg.policy = sp.probs();
    } else {
      throw ParseError("policy.type must be uniform|table|softmax");
    }

    cfg.chain = induced_chain(cfg.mdp, cfg.policy);

    const json feat = doc.value("features", json{{"type", "identity"}});
    const std::string ft = feat.at("type").get<std::string>();
    if (ft == "identity") {
      cfg.features = identity_features(cfg.chain);
    } else if (ft == "scaled_identity") {
      cfg.features =
          scaled_identity_features(cfg.chain, feat.at("scale").get<double>());
    } else if (ft == "random_orthonormal") {
      Rng rng(feat.value("seed", cfg.seed));
      cfg.features =
          random_orthonormal_features(cfg.chain, feat.at("q").get<int>(), rng);
    } else if (ft == "matrices") {
      cfg.features = build_feature_set(
          detail::json_to_matrix(feat.at("phi_v")),
          detail::json_to_matrix(feat.at("phi_u")), cfg.chain);
    } else {
      throw ParseError(
          "features.type must be identity|scaled_identity|random_orthonormal|"
          "matrices");
    }

    // Critic settings with auto resolution.
    const json crit = doc.value("critic", json::object());
    cfg.critic.t = crit.value("t", 4096L);
    cfg.critic.k = crit.value("k", cfg.critic.t / 2);
    if (cfg.critic.k >= cfg.critic.t)
      throw ConstraintViolation("critic.k must be < critic.t");
    cfg.critic.replications = crit.value("replications", 1);
    if (crit.contains("delta")) cfg.critic.delta = crit.at("delta").get<double>();
    cfg.critic.override_step_size = crit.value("override_step_size", false);

    const bool regularized =
        crit.value("variant", std::string("plain")) == "regularized";
    if (regularized) {
      if (!crit.contains("zeta") || crit.at("zeta") == "auto")
        cfg.critic.zeta =
            1.0 / std::sqrt(static_cast<double>(cfg.critic.t - cfg.critic.k));
      else
        cfg.critic.zeta = crit.at("zeta").get<double>();
    }

    const bool projected = crit.value("projected", false);
    SystemOptions opts;
    opts.zeta = cfg.critic.zeta;
    CriticSystem probe = build_critic_system(cfg.chain, cfg.features,
                                             cfg.mdp.gamma, cfg.mdp.r_max,
                                             opts);
    if (projected) {
      if (!crit.contains("h_radius") || crit.at("h_radius") == "auto")
        cfg.critic.h_radius = 1.1 * probe.xi.norm() / probe.mu;
      else
        cfg.critic.h_radius = crit.at("h_radius").get<double>();
      opts.h_radius = cfg.critic.h_radius;
      probe = build_critic_system(cfg.chain, cfg.features, cfg.mdp.gamma,
                                  cfg.mdp.r_max, opts);
    }
    cfg.system = std::move(probe);

    if (!crit.contains("beta") || crit.at("beta") == "auto")
      cfg.critic.beta = regularized ? *cfg.system.beta_check_max
                                    : cfg.system.beta_max;
    else
      cfg.critic.beta = crit.at("beta").get<double>();

    // Gradient / smoothness settings.
    const json grad = doc.value("gradients", json::object());
    cfg.gradients.kappa = grad.value("kappa", 1.0);
    cfg.gradients.rho = grad.value("rho", 0.5);
    cfg.gradients.lambda = grad.value("lambda", 0.0);
    cfg.gradients.variance_threshold = grad.value("variance_threshold", 0.0);
    cfg.gradients.cnu_form = grad.value("cnu_form", std::string("half")) ==
                                     "plain"
                                 ? CnuForm::plain
                                 : CnuForm::half;

    if (doc.contains("actor")) {
      const json& act = doc.at("actor");
      ActorConfig a;
      a.n = act.at("n").get<long>();
      if (act.contains("alpha") && act.at("alpha") != "auto")
        a.alpha = act.at("alpha").get<double>();
      if (act.contains("p") && act.at("p") != "auto")
        a.p = act.at("p").get<double>();
      if (act.contains("m") && act.at("m") != "auto")
        a.m = act.at("m").get<long>();
      if (act.contains("k") && act.at("k") != "auto")
        a.k = act.at("k").get<long>();
      a.lambda = act.value("lambda", 0.0);
      a.s0 = act.value("s0", 0);
      a.seed = act.value("seed", cfg.seed);
      if (act.contains("beta")) a.critic_beta = act.at("beta").get<double>();
      a.override_step_size = act.value("override_step_size", false);
      a.mu_floor = act.value("mu_floor", 0.0);
      a.recompute_beta_per_iter = act.value("recompute_beta_per_iter", false);
      cfg.actor = resolve_actor_config(a);
      if (!cfg.softmax)
        throw ConstraintViolation("actor runs need policy.type == softmax");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }

  // Materialized snapshot.
  json resolved = doc;
  resolved["seed"] = cfg.seed;
  resolved["tool_version"] = kToolVersion;
  json rc;
  rc["t"] = cfg.critic.t;
  rc["k"] = cfg.critic.k;
  rc["beta"] = cfg.critic.beta;
  if (cfg.critic.zeta) rc["zeta"] = *cfg.critic.zeta;
  if (cfg.critic.h_radius) rc["h_radius"] = *cfg.critic.h_radius;
  rc["replications"] = cfg.critic.replications;
  if (cfg.critic.delta) rc["delta"] = *cfg.critic.delta;
  rc["override_step_size"] = cfg.critic.override_step_size;
  resolved["critic_resolved"] = rc;
  if (cfg.actor) {
    json ra;
    ra["n"] = cfg.actor->n;
    ra["alpha"] = cfg.actor->alpha;
    ra["p"] = cfg.actor->p;
    ra["m"] = cfg.actor->m;
    ra["k"] = cfg.actor->k;
    ra["lambda"] = cfg.actor->lambda;
    resolved["actor_resolved"] = ra;
  }
  cfg.resolved = std::move(resolved);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return resolve_experiment(doc);
}

// --- run manifest -------------------------------------------------------------

struct RunManifest {
  json resolved_config;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  double wall_clock_sec = 0.0;
  std::map<std::string, std::string> file_checksums;  // name -> fnv1a
};

inline void write_manifest(const RunManifest& manifest,
                           const std::string& path) {
  json doc;
  doc["config"] = manifest.resolved_config;
  doc["seed"] = manifest.seed;
  doc["tool_version"] = manifest.tool_version;
  doc["wall_clock_sec"] = manifest.wall_clock_sec;
  doc["files"] = manifest.file_checksums;
  std::ofstream out(path);
  if (!out) throw FileParseError("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
}

class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace mvtd
