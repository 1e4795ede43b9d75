// Command-line front end: policy-evaluation fixed points, TD critic and
// SPSA actor experiment runners, gradient checking and the verification
// suites. Exit codes: 0 ok, 2 config error, 3 math-regime violation,
// 4 verification failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mvtd/config.hpp"
#include "mvtd/runners.hpp"
#include "mvtd/verify.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> replications;
  bool override_step_size = false;
};

mvtd::ExperimentConfig load_with_overrides(const CommonFlags& flags) {
  std::ifstream in(flags.config_path);
  if (!in) throw mvtd::ParseError("cannot open config " + flags.config_path);
  mvtd::json doc;
  try {
    in >> doc;
  } catch (const mvtd::json::exception& e) {
    throw mvtd::ParseError(flags.config_path + ": " + e.what());
  }
  if (flags.seed) doc["seed"] = *flags.seed;
  if (!flags.out_dir.empty()) doc["out"] = flags.out_dir;
  if (flags.replications) {
    if (!doc.contains("critic")) doc["critic"] = mvtd::json::object();
    doc["critic"]["replications"] = *flags.replications;
  }
  if (flags.override_step_size) {
    if (!doc.contains("critic")) doc["critic"] = mvtd::json::object();
    doc["critic"]["override_step_size"] = true;
    if (doc.contains("actor")) doc["actor"]["override_step_size"] = true;
  }
  return mvtd::resolve_experiment(doc);
}

std::string out_or_default(const mvtd::ExperimentConfig& cfg,
                           const char* fallback) {
  return cfg.out_dir.empty() ? fallback : cfg.out_dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-variance TD policy evaluation and SPSA actor-critic"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string suite;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", flags.config_path,
                                "experiment config (JSON)");
    if (needs_config) opt->required();
    cmd->add_option("--seed", flags.seed, "override the base seed");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--replications", flags.replications,
                    "override replication count");
    cmd->add_flag("--override-step-size", flags.override_step_size,
                  "run outside the theorem step-size regime");
  };

  CLI::App* cmd_fixed = app.add_subcommand(
      "fixed-point", "print M, xi, w_bar and the theorem constants");
  add_common(cmd_fixed, true);

  CLI::App* cmd_critic = app.add_subcommand(
      "critic", "run TD critic replications and write critic.csv");
  add_common(cmd_critic, true);

  CLI::App* cmd_actor =
      app.add_subcommand("actor", "run MV-SPSA-AC and write actor.csv");
  add_common(cmd_actor, true);

  CLI::App* cmd_grad = app.add_subcommand(
      "grad-check", "exact vs finite-difference gradients and constants");
  add_common(cmd_grad, true);

  CLI::App* cmd_verify =
      app.add_subcommand("verify", "run the acceptance suites");
  add_common(cmd_verify, false);
  cmd_verify->add_option("--suite", suite, "run a single named suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_fixed->parsed()) {
      const mvtd::ExperimentConfig cfg = load_with_overrides(flags);
      const mvtd::json report = mvtd::fixed_point_report(cfg);
      std::cout << report.dump(2) << "\n";
      if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        std::ofstream out(cfg.out_dir + "/fixed_point.json");
        out << report.dump(2) << "\n";
      }
      return 0;
    }
    if (cmd_critic->parsed()) {
      const mvtd::ExperimentConfig cfg = load_with_overrides(flags);
      const mvtd::RunManifest manifest =
          mvtd::run_critic_experiment(cfg, out_or_default(cfg, "critic-out"));
      std::cout << "wrote critic.csv ("
                << manifest.file_checksums.at("critic.csv") << ") in "
                << manifest.wall_clock_sec << "s\n";
      return 0;
    }
    if (cmd_actor->parsed()) {
      const mvtd::ExperimentConfig cfg = load_with_overrides(flags);
      const mvtd::RunManifest manifest =
          mvtd::run_actor_experiment(cfg, out_or_default(cfg, "actor-out"));
      std::cout << "wrote actor.csv ("
                << manifest.file_checksums.at("actor.csv") << ") in "
                << manifest.wall_clock_sec << "s\n";
      return 0;
    }
    if (cmd_grad->parsed()) {
      const mvtd::ExperimentConfig cfg = load_with_overrides(flags);
      std::cout << mvtd::grad_check_report(cfg).dump(2) << "\n";
      return 0;
    }
    if (cmd_verify->parsed()) {
      mvtd::verify::VerifyOptions opts;
      if (!flags.out_dir.empty()) opts.out_dir = flags.out_dir;
      if (flags.seed) opts.seed = *flags.seed;
      if (const char* env = std::getenv("MVTD_THREADS"))
        opts.threads = std::atoi(env);

      std::vector<std::string> names =
          suite.empty() ? mvtd::verify::default_suites()
                        : std::vector<std::string>{suite};
      bool all_pass = true;
      std::printf("%-28s %-6s details\n", "criterion", "status");
      for (const std::string& name : names) {
        const mvtd::verify::CriterionResult res =
            mvtd::verify::run_suite(name, opts);
        all_pass = all_pass && res.pass;
        std::printf("%-28s %-6s %s\n", res.name.c_str(),
                    res.pass ? "PASS" : "FAIL", res.details.c_str());
        std::fflush(stdout);
      }
      return all_pass ? 0 : 4;
    }
  } catch (const mvtd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
