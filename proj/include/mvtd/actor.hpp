#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mvtd/critic.hpp"
#include "mvtd/errors.hpp"
#include "mvtd/gradients.hpp"
#include "mvtd/linear_system.hpp"
#include "mvtd/mdp.hpp"
#include "mvtd/rng.hpp"

namespace mvtd {

struct Theorem6Schedule {
  double alpha;
  double p;
  long m;
};

// alpha = n^{-3/4}, p = n^{-1/4}, m = n.
inline Theorem6Schedule theorem6_schedule(long n) {
  if (n < 1) throw ConstraintViolation("n must be >= 1");
  const double nd = static_cast<double>(n);
  return {std::pow(nd, -0.75), std::pow(nd, -0.25), n};
}

// Rademacher direction: each coordinate +-1 with probability 1/2.
inline Vector sample_perturbation(int d, Rng& rng) {
  if (d < 1) throw ConstraintViolation("d must be >= 1");
  Vector delta(d);
  for (int i = 0; i < d; ++i) delta[i] = rng.rademacher();
  return delta;
}

// Two-point SPSA estimate: component i is (f_plus - f_base) / (p Delta_i).
inline Vector spsa_gradient(double f_plus, double f_base, double p,
                            const Vector& delta) {
  if (!(p > 0.0)) throw ConstraintViolation("p must be positive");
  Vector g(delta.size());
  const double diff = f_plus - f_base;
  for (int i = 0; i < delta.size(); ++i) g[i] = diff / (p * delta[i]);
  return g;
}

// theta' = theta + alpha (gJ - lambda (gU - 2 Jhat gJ)), ascent on -L.
inline Vector actor_step(const Vector& theta, const Vector& g_j,
                         const Vector& g_u, double j_hat, double lambda,
                         double alpha) {
  if (theta.size() != g_j.size() || theta.size() != g_u.size())
    throw DimensionMismatch("actor step dimensions differ");
  return theta + alpha * (g_j - lambda * (g_u - 2.0 * j_hat * g_j));
}

struct ActorConfig {
  long n = 0;
  double alpha = 0.0;  // <= 0 resolves to the n^{-3/4} schedule
  double p = 0.0;      // <= 0 resolves to n^{-1/4}
  long m = 0;          // <= 0 resolves to n
  long k = -1;         // < 0 resolves to m/2
  double lambda = 0.0;
  int s0 = 0;
  std::uint64_t seed = 0;

  // Critic step-size policy: explicit beta with override, or the
  // conservative global default mu_floor / c, or per-iteration mu(theta)/c.
  std::optional<double> critic_beta;
  bool override_step_size = false;
  double mu_floor = 0.0;
  bool recompute_beta_per_iter = false;
  double divergence_guard = 1e6;
};

inline ActorConfig resolve_actor_config(ActorConfig cfg) {
  if (cfg.n < 1) throw ConstraintViolation("n must be >= 1");
  const Theorem6Schedule sched = theorem6_schedule(cfg.n);
  if (cfg.alpha <= 0.0) cfg.alpha = sched.alpha;
  if (cfg.p <= 0.0) cfg.p = sched.p;
  if (cfg.m <= 0) cfg.m = sched.m;
  if (cfg.k < 0) cfg.k = cfg.m / 2;
  if (cfg.m < 2) throw ConstraintViolation("critic batch size m must be >= 2");
  if (cfg.k >= cfg.m) throw ConstraintViolation("tail index k must be < m");
  if (!cfg.critic_beta && !cfg.recompute_beta_per_iter && cfg.mu_floor <= 0.0)
    throw ConstraintViolation(
        "critic step size needs critic_beta, mu_floor or per-iteration "
        "recomputation");
  return cfg;
}

struct ActorIterationDiag {
  long iter = 0;
  Vector theta;  // iterate produced by this iteration
  double grad_norm_sq_exact = 0.0;
  double j_hat = 0.0;
  double u_hat = 0.0;
  double critic_err_base = 0.0;
  double critic_err_pert = 0.0;
};

struct ActorResult {
  Matrix theta_trace;  // n x d, rows are theta_1 .. theta_n
  Vector theta_r;
  long theta_r_index = 0;  // 0-based row into theta_trace
  std::vector<double> grad_norm_trace;
  std::vector<ActorIterationDiag> diagnostics;
};

namespace detail {

struct PolicyEval {
  TabularPolicy tab;
  OnPolicyChain chain;
  FeatureSet features;
  Vector w_bar;
};

inline PolicyEval evaluate_policy(const Mdp& mdp, const SoftmaxPolicy& pol,
                                  const FeatureSet& features) {
  PolicyEval pe;
  pe.tab = pol.probs();
  pe.chain = induced_chain(mdp, pe.tab);
  // Projection matrices depend on the stationary distribution, so the
  // feature set is rebuilt per policy from the same raw matrices.
  pe.features = build_feature_set(features.phi_v, features.phi_u, pe.chain);
  auto [m, xi] = assemble_system(pe.chain, pe.features, mdp.gamma);
  pe.w_bar = fixed_point(m, xi);
  return pe;
}

}  // namespace detail

// MV-SPSA-AC: per iteration, evaluate the unperturbed and perturbed policies
// with the tail-averaged TD critic, form SPSA gradient estimates and ascend
// on -L. The exact gradient oracle instruments every produced iterate.
inline ActorResult run_mv_spsa_ac(const Mdp& mdp,
                                  const SoftmaxPolicy& initial_policy,
                                  const FeatureSet& features,
                                  const ActorConfig& raw_cfg) {
  const ActorConfig cfg = resolve_actor_config(raw_cfg);
  const int d = initial_policy.dim();

  Rng actor_rng(derive_seed(cfg.seed, 0));
  SoftmaxPolicy policy = initial_policy;

  ActorResult res;
  res.theta_trace = Matrix::Zero(cfg.n, d);
  res.grad_norm_trace.reserve(cfg.n);
  res.diagnostics.reserve(cfg.n);

  const double c_inst = step_size_c(mdp.gamma, mdp.r_max, features.phi_v_max,
                                    features.phi_u_max);

  for (long t = 0; t < cfg.n; ++t) {
    const Vector delta = sample_perturbation(d, actor_rng);

    const auto base = detail::evaluate_policy(mdp, policy, features);
    double beta;
    if (cfg.critic_beta) {
      beta = *cfg.critic_beta;
      if (!cfg.override_step_size) {
        const SpectralConstants sc = spectral_constants(
            assemble_system(base.chain, base.features, mdp.gamma).first);
        if (beta > sc.mu / c_inst * (1.0 + 1e-12))
          throw StepSizeTooLarge("critic beta exceeds mu(theta)/c");
      }
    } else if (cfg.recompute_beta_per_iter) {
      const SpectralConstants sc = spectral_constants(
          assemble_system(base.chain, base.features, mdp.gamma).first);
      beta = sc.mu / c_inst;
    } else {
      beta = cfg.mu_floor / c_inst;
    }

    const SoftmaxPolicy perturbed =
        policy.with_theta(policy.theta + cfg.p * delta);
    const auto pert = detail::evaluate_policy(mdp, perturbed, features);

    CriticRunConfig crit;
    crit.t = cfg.m;
    crit.k = cfg.k;
    crit.beta = beta;
    crit.divergence_guard = cfg.divergence_guard;
    crit.seed = derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(t) + 1);
    const RunResult run_base = run_critic_with_reference(
        mdp, base.tab, base.chain, base.features, base.w_bar, crit);
    crit.seed = derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(t) + 2);
    const RunResult run_pert = run_critic_with_reference(
        mdp, pert.tab, pert.chain, pert.features, pert.w_bar, crit);

    const int q = features.q;
    const Vector fv0 = base.features.fv(cfg.s0);
    const Vector fu0 = base.features.fu(cfg.s0);
    const double j_hat = fv0.dot(run_base.w_tail.head(q));
    const double u_hat = fu0.dot(run_base.w_tail.tail(q));
    const double j_plus = fv0.dot(run_pert.w_tail.head(q));
    const double u_plus = fu0.dot(run_pert.w_tail.tail(q));

    const Vector g_j = spsa_gradient(j_plus, j_hat, cfg.p, delta);
    const Vector g_u = spsa_gradient(u_plus, u_hat, cfg.p, delta);
    policy.theta = actor_step(policy.theta, g_j, g_u, j_hat, cfg.lambda,
                              cfg.alpha);

    res.theta_trace.row(t) = policy.theta.transpose();
    const Vector grad_l =
        grad_lagrangian(exact_j_of(mdp, policy, cfg.s0),
                        exact_grad_j(mdp, policy, cfg.s0),
                        exact_grad_u(mdp, policy, cfg.s0), cfg.lambda);
    res.grad_norm_trace.push_back(grad_l.squaredNorm());

    ActorIterationDiag diag;
    diag.iter = t;
    diag.theta = policy.theta;
    diag.grad_norm_sq_exact = res.grad_norm_trace.back();
    diag.j_hat = j_hat;
    diag.u_hat = u_hat;
    diag.critic_err_base = (run_base.w_tail - base.w_bar).norm();
    diag.critic_err_pert = (run_pert.w_tail - pert.w_bar).norm();
    res.diagnostics.push_back(std::move(diag));
  }

  res.theta_r_index =
      std::min<long>(static_cast<long>(actor_rng.uniform() * cfg.n),
                     cfg.n - 1);
  res.theta_r = res.theta_trace.row(res.theta_r_index).transpose();
  return res;
}

}  // namespace mvtd
