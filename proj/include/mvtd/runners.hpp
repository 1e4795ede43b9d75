#pragma once

#include <filesystem>
#include <string>

#include "mvtd/config.hpp"

namespace mvtd {

// Experiment drivers shared by the CLI subcommands and the verification
// suites. Each writes CSV artifacts plus a manifest into out_dir and is
// byte-deterministic for a fixed resolved config.

inline std::string critic_variant_name(const CriticSettings& s) {
  if (s.zeta && s.h_radius) return "reg_proj";
  if (s.zeta) return "reg";
  if (s.h_radius) return "proj";
  return "plain";
}

inline std::vector<long> pow2_checkpoints(long t_max) {
  std::vector<long> cps;
  for (long t = 1; t <= t_max; t *= 2) cps.push_back(t);
  return cps;
}

// critic.csv schema (bit-exact column order):
// run_id,t,variant,err_last,err_tail,bound_T1,bound_T2,projected_flag
inline RunManifest run_critic_experiment(const ExperimentConfig& cfg,
                                         const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  WallClock clock;

  if ((cfg.critic.t & (cfg.critic.t - 1)) != 0)
    throw ConstraintViolation("critic.t must be a power of two");

  StatConfig stat;
  stat.checkpoints = pow2_checkpoints(cfg.critic.t);
  stat.beta = cfg.critic.beta;
  stat.zeta = cfg.critic.zeta;
  stat.h_radius = cfg.critic.h_radius;
  stat.replications = cfg.critic.replications;
  stat.delta = cfg.critic.delta;
  stat.base_seed = cfg.seed;
  stat.override_step_size = cfg.critic.override_step_size;
  stat.threads = cfg.threads;
  stat.keep_per_replication = true;
  stat.reference = cfg.critic.zeta
                       ? ErrorReference::regularized_fixed_point
                       : ErrorReference::fixed_point;

  const CheckpointStats st = estimate_statistics(
      cfg.mdp, cfg.policy, cfg.chain, cfg.features, cfg.system, stat);

  const std::string variant = critic_variant_name(cfg.critic);
  const Vector w0 = Vector::Zero(2 * cfg.features.q);
  const double init_sq =
      cfg.critic.zeta ? (w0 - *cfg.system.w_bar_reg).squaredNorm()
                      : (w0 - cfg.system.w_bar).squaredNorm();
  const bool in_regime =
      cfg.critic.zeta
          ? cfg.critic.beta <= *cfg.system.beta_check_max * (1 + 1e-12)
          : cfg.critic.beta <= cfg.system.beta_max * (1 + 1e-12);

  const std::string csv_path = out_dir + "/critic.csv";
  CsvWriter csv(csv_path,
                {"run_id", "t", "variant", "err_last", "err_tail", "bound_T1",
                 "bound_T2", "projected_flag"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int rep = 0; rep < stat.replications; ++rep) {
    for (std::size_t cp = 0; cp < st.t.size(); ++cp) {
      BoundParams p;
      p.t = st.t[cp];
      p.k = st.t[cp] / 2;
      p.beta = cfg.critic.beta;
      p.zeta = cfg.critic.zeta;
      p.init_err_sq = init_sq;
      double bound_t1 = nan, bound_t2 = nan;
      if (in_regime && !cfg.critic.zeta) {
        bound_t1 = theorem_bound(Bound::T1_last, cfg.system, p);
        if (p.k >= 1) bound_t2 = theorem_bound(Bound::T2_tail, cfg.system, p);
      } else if (in_regime && cfg.critic.zeta && p.k >= 1) {
        bound_t2 = theorem_bound(Bound::T3_reg, cfg.system, p);
      }
      csv.begin_row();
      csv.field(static_cast<long>(rep))
          .field(st.t[cp])
          .field(variant)
          .field(st.rep_last[rep][cp])
          .field(st.rep_tail[rep][cp])
          .field(bound_t1)
          .field(bound_t2)
          .field(static_cast<long>(st.rep_projected[rep][cp] > 0 ? 1 : 0));
      csv.end_row();
    }
  }

  RunManifest manifest;
  manifest.resolved_config = cfg.resolved;
  manifest.seed = cfg.seed;
  manifest.wall_clock_sec = clock.seconds();
  manifest.file_checksums["critic.csv"] = file_checksum(csv_path);
  write_manifest(manifest, out_dir + "/manifest.json");
  return manifest;
}

// actor.csv schema: iter, theta components, grad_norm_sq_exact, j_hat,
// u_hat, critic_err_base, critic_err_pert
inline RunManifest run_actor_experiment(const ExperimentConfig& cfg,
                                        const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  WallClock clock;
  if (!cfg.actor || !cfg.softmax)
    throw ConstraintViolation("actor experiment needs actor + softmax policy");

  const ActorResult res =
      run_mv_spsa_ac(cfg.mdp, *cfg.softmax, cfg.features, *cfg.actor);

  const int d = cfg.softmax->dim();
  std::vector<std::string> cols = {"iter"};
  for (int i = 0; i < d; ++i) cols.push_back("theta_" + std::to_string(i));
  for (const char* c : {"grad_norm_sq_exact", "j_hat", "u_hat",
                        "critic_err_base", "critic_err_pert"})
    cols.push_back(c);

  const std::string csv_path = out_dir + "/actor.csv";
  CsvWriter csv(csv_path, cols);
  for (const ActorIterationDiag& diag : res.diagnostics) {
    csv.begin_row();
    csv.field(diag.iter);
    for (int i = 0; i < d; ++i) csv.field(diag.theta[i]);
    csv.field(diag.grad_norm_sq_exact)
        .field(diag.j_hat)
        .field(diag.u_hat)
        .field(diag.critic_err_base)
        .field(diag.critic_err_pert);
    csv.end_row();
  }

  RunManifest manifest;
  manifest.resolved_config = cfg.resolved;
  manifest.seed = cfg.seed;
  manifest.wall_clock_sec = clock.seconds();
  manifest.file_checksums["actor.csv"] = file_checksum(csv_path);
  write_manifest(manifest, out_dir + "/manifest.json");
  return manifest;
}

// Structured fixed-point report: M, xi, w_bar, mu, iota, beta_max, sigma^2.
inline json fixed_point_report(const ExperimentConfig& cfg) {
  json doc;
  doc["M"] = matrix_to_json(cfg.system.m_mat);
  doc["xi"] = vector_to_json(cfg.system.xi);
  doc["w_bar"] = vector_to_json(cfg.system.w_bar);
  doc["mu"] = cfg.system.mu;
  doc["iota"] = cfg.system.iota;
  doc["beta_max"] = cfg.system.beta_max;
  doc["sigma_sq"] = cfg.system.sigma_sq;
  doc["c"] = cfg.system.c_const;
  if (cfg.system.zeta) {
    doc["zeta"] = *cfg.system.zeta;
    doc["w_bar_reg"] = vector_to_json(*cfg.system.w_bar_reg);
    doc["c_check"] = *cfg.system.c_check;
    doc["beta_check_max"] = *cfg.system.beta_check_max;
    doc["sigma_check_sq"] = *cfg.system.sigma_check_sq;
  }
  if (cfg.system.h_radius) {
    doc["h_radius"] = *cfg.system.h_radius;
    doc["tau"] = *cfg.system.tau;
    if (cfg.system.tau_check) doc["tau_check"] = *cfg.system.tau_check;
  }
  return doc;
}

// Exact vs finite-difference gradients plus every smoothness constant.
inline json grad_check_report(const ExperimentConfig& cfg) {
  if (!cfg.softmax)
    throw ConstraintViolation("grad-check needs policy.type == softmax");
  const SoftmaxPolicy& pol = *cfg.softmax;
  const int s0 = cfg.actor ? cfg.actor->s0 : 0;
  const double lambda = cfg.gradients.lambda;

  const GradientBundle b = make_gradient_bundle(
      cfg.mdp, pol, s0, lambda, cfg.gradients.variance_threshold);
  const Vector fd_j = finite_difference(
      [&](const Vector& th) { return exact_j_of(cfg.mdp, pol.with_theta(th), s0); },
      pol.theta, 1e-5);
  const Vector fd_u = finite_difference(
      [&](const Vector& th) { return exact_u_of(cfg.mdp, pol.with_theta(th), s0); },
      pol.theta, 1e-5);

  const SoftmaxBounds sb = softmax_feature_bounds(pol.action_features);
  const SmoothnessConstants sc = lipschitz_constants(
      cfg.mdp.r_max, cfg.mdp.gamma, sb.c_psi, sb.l_psi, sb.c_pi,
      cfg.gradients.kappa, cfg.gradients.rho, lambda, cfg.gradients.cnu_form);

  json doc;
  doc["j"] = b.j;
  doc["u"] = b.u;
  doc["lagrangian"] = b.lagrangian;
  doc["grad_j"] = vector_to_json(b.grad_j);
  doc["grad_j_fd"] = vector_to_json(fd_j);
  doc["grad_u"] = vector_to_json(b.grad_u);
  doc["grad_u_fd"] = vector_to_json(fd_u);
  doc["grad_l"] = vector_to_json(b.grad_l);
  doc["rel_err_j"] = (b.grad_j - fd_j).norm() / std::max(1e-12, fd_j.norm());
  doc["rel_err_u"] = (b.grad_u - fd_u).norm() / std::max(1e-12, fd_u.norm());
  json cs;
  cs["c_psi"] = sc.c_psi;
  cs["l_psi"] = sc.l_psi;
  cs["c_pi"] = sc.c_pi;
  cs["kappa"] = sc.kappa;
  cs["rho"] = sc.rho;
  cs["c_nu"] = sc.c_nu;
  cs["l_j"] = sc.l_j;
  cs["l_u"] = sc.l_u;
  cs["l_o"] = sc.l_o;
  cs["k1"] = sc.k1;
  cs["c1"] = sc.c1;
  cs["grad_j_bound"] = sc.grad_j_bound;
  cs["grad_u_bound"] = sc.grad_u_bound;
  doc["constants"] = cs;
  return doc;
}

}  // namespace mvtd
