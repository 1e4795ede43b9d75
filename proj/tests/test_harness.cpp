#include <gtest/gtest.h>

#include <filesystem>

#include "mvtd/config.hpp"
#include "mvtd/instances.hpp"
#include "mvtd/io.hpp"
#include "mvtd/runners.hpp"

namespace {

using namespace mvtd;
namespace fs = std::filesystem;

json chain_doc() {
  return json{{"kind", "generator"},
              {"generator",
               {{"type", "chain"}, {"length", 5}, {"slip", 0.1},
                {"gamma", 0.5}}}};
}

TEST(MdpFile, RoundTripIsByteIdentical) {
  const Mdp m = instances::chain5();
  const std::string p1 = "/tmp/mvtd_mdp_rt1.json";
  const std::string p2 = "/tmp/mvtd_mdp_rt2.json";
  save_mdp(m, p1);
  const Mdp loaded = load_mdp(p1);
  save_mdp(loaded, p2);
  EXPECT_EQ(read_file(p1), read_file(p2));
  EXPECT_EQ(loaded.num_states, m.num_states);
  EXPECT_EQ(loaded.rewards, m.rewards);
}

TEST(MdpFile, ParseErrorsAreDiagnosed) {
  const std::string path = "/tmp/mvtd_bad_mdp.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  EXPECT_THROW(load_mdp(path), FileParseError);
  {
    std::ofstream out(path);
    out << R"({"num_states": 2})";
  }
  EXPECT_THROW(load_mdp(path), FileParseError);
}

TEST(Config, MinimalConfigEchoesDefaults) {
  const ExperimentConfig cfg =
      resolve_experiment(json{{"seed", 3}, {"mdp", chain_doc()}});
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.mdp.num_states, 5);
  EXPECT_EQ(cfg.features.q, 5);
  // auto beta resolves to beta_max and is logged in the snapshot
  EXPECT_DOUBLE_EQ(cfg.critic.beta, cfg.system.beta_max);
  EXPECT_DOUBLE_EQ(cfg.resolved["critic_resolved"]["beta"].get<double>(),
                   cfg.system.beta_max);
  EXPECT_EQ(cfg.resolved["tool_version"].get<std::string>(), kToolVersion);
}

TEST(Config, TailIndexMustPrecedeHorizon) {
  json doc{{"mdp", chain_doc()},
           {"critic", {{"t", 100L}, {"k", 100L}}}};
  EXPECT_THROW(resolve_experiment(doc), ConstraintViolation);
}

TEST(Config, AutoZetaMatchesTheoremChoice) {
  json doc{{"mdp", chain_doc()},
           {"critic",
            {{"t", 10001L}, {"k", 5001L}, {"variant", "regularized"},
             {"zeta", "auto"}, {"beta", "auto"}}}};
  const ExperimentConfig cfg = resolve_experiment(doc);
  EXPECT_NEAR(*cfg.critic.zeta, 0.014142, 1e-6);
  EXPECT_DOUBLE_EQ(cfg.critic.beta, *cfg.system.beta_check_max);
}

TEST(Config, AutoHRadiusSatisfiesAssumption) {
  json doc{{"mdp", chain_doc()},
           {"critic",
            {{"t", 1024L}, {"k", 512L}, {"projected", true},
             {"h_radius", "auto"}}}};
  const ExperimentConfig cfg = resolve_experiment(doc);
  EXPECT_NEAR(*cfg.critic.h_radius,
              1.1 * cfg.system.xi.norm() / cfg.system.mu, 1e-12);
  EXPECT_GT(*cfg.critic.h_radius, cfg.system.xi.norm() / cfg.system.mu);
}

TEST(Config, BadPolicyTypeRejected) {
  json doc{{"mdp", chain_doc()}, {"policy", {{"type", "greedy"}}}};
  EXPECT_THROW(resolve_experiment(doc), ParseError);
}

TEST(FixedPointReport, OneStateNumbers) {
  json doc{{"seed", 1},
           {"mdp", {{"kind", "inline"},
                    {"mdp", mdp_to_json(instances::one_state())}}}};
  const ExperimentConfig cfg = resolve_experiment(doc);
  const json report = fixed_point_report(cfg);
  EXPECT_NEAR(report["w_bar"][0].get<double>(), 2.0, 1e-9);
  EXPECT_NEAR(report["w_bar"][1].get<double>(), 4.0, 1e-9);
  EXPECT_NEAR(report["mu"].get<double>(), 0.10961, 1e-5);
  EXPECT_NEAR(report["c"].get<double>(), 7.0, 1e-12);
}

TEST(CriticExperiment, CsvSchemaAndDeterminism) {
  json doc{{"seed", 21},
           {"threads", 2},
           {"mdp", chain_doc()},
           {"critic",
            {{"t", 512L}, {"k", 256L}, {"beta", "auto"},
             {"replications", 4}}}};
  const std::string d1 = "/tmp/mvtd_crit_a", d2 = "/tmp/mvtd_crit_b";
  fs::remove_all(d1);
  fs::remove_all(d2);
  const RunManifest m1 = run_critic_experiment(resolve_experiment(doc), d1);
  const RunManifest m2 = run_critic_experiment(resolve_experiment(doc), d2);

  const std::string csv = read_file(d1 + "/critic.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "run_id,t,variant,err_last,err_tail,bound_T1,bound_T2,"
            "projected_flag");
  EXPECT_EQ(m1.file_checksums.at("critic.csv"),
            m2.file_checksums.at("critic.csv"));
  EXPECT_EQ(csv, read_file(d2 + "/critic.csv"));
  // rows: replications x checkpoints (t = 1..512 in powers of two)
  const long rows = std::count(csv.begin(), csv.end(), '\n') - 1;
  EXPECT_EQ(rows, 4 * 10);
}

TEST(CriticExperiment, ThreadCountDoesNotChangeBytes) {
  json doc{{"seed", 22},
           {"mdp", chain_doc()},
           {"critic",
            {{"t", 256L}, {"k", 128L}, {"beta", "auto"},
             {"replications", 6}}}};
  json doc1 = doc;
  doc1["threads"] = 1;
  json doc2 = doc;
  doc2["threads"] = 2;
  const std::string d1 = "/tmp/mvtd_crit_t1", d2 = "/tmp/mvtd_crit_t2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  run_critic_experiment(resolve_experiment(doc1), d1);
  run_critic_experiment(resolve_experiment(doc2), d2);
  EXPECT_EQ(read_file(d1 + "/critic.csv"), read_file(d2 + "/critic.csv"));
}

TEST(ActorExperiment, CsvSchemaMatchesSpec) {
  json doc = {
      {"seed", 23},
      {"mdp", {{"kind", "inline"}, {"mdp", mdp_to_json(instances::ref2())}}},
      {"policy",
       {{"type", "softmax"},
        {"theta", {0.0, 0.0}},
        {"action_features",
         {{{1.0, 0.0}, {0.0, 1.0}},
          {{1.0, 0.0}, {0.0, 1.0}},
          {{1.0, 0.0}, {0.0, 1.0}}}}}},
      {"actor",
       {{"n", 8L}, {"m", 32L}, {"k", 16L}, {"lambda", 0.5}, {"beta", 0.3},
        {"override_step_size", true}}}};
  const std::string dir = "/tmp/mvtd_actor_csv";
  fs::remove_all(dir);
  run_actor_experiment(resolve_experiment(doc), dir);
  const std::string csv = read_file(dir + "/actor.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "iter,theta_0,theta_1,grad_norm_sq_exact,j_hat,u_hat,"
            "critic_err_base,critic_err_pert");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n') - 1, 8);
}

TEST(Manifest, ChecksumsTrackContent) {
  const std::string path = "/tmp/mvtd_checksum_probe";
  {
    std::ofstream out(path);
    out << "a,b\n1,2\n";
  }
  const std::string c1 = file_checksum(path);
  {
    std::ofstream out(path);
    out << "a,b\n1,3\n";
  }
  EXPECT_NE(c1, file_checksum(path));
}

TEST(Errors, CategoriesMapToExitCodes) {
  EXPECT_EQ(static_cast<int>(ParseError("x").category()), 2);
  EXPECT_EQ(static_cast<int>(ConstraintViolation("x").category()), 2);
  EXPECT_EQ(static_cast<int>(StepSizeTooLarge("x").category()), 3);
  EXPECT_EQ(static_cast<int>(NotPositive("x").category()), 3);
  EXPECT_EQ(static_cast<int>(CriticDiverged("x").category()), 3);
}

TEST(Generators, GarnetFromConfigReproducible) {
  json doc{{"seed", 7},
           {"mdp",
            {{"kind", "generator"},
             {"generator",
              {{"type", "garnet"}, {"num_states", 10}, {"num_actions", 3},
               {"branching", 2}, {"gamma", 0.9}, {"seed", 7}}}}}};
  const ExperimentConfig a = resolve_experiment(doc);
  const ExperimentConfig b = resolve_experiment(doc);
  EXPECT_EQ(a.mdp.rewards, b.mdp.rewards);
  for (int act = 0; act < 3; ++act)
    EXPECT_EQ(a.mdp.transitions[act], b.mdp.transitions[act]);
}

}  // namespace
