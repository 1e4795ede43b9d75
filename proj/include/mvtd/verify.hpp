#pragma once

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mvtd/config.hpp"
#include "mvtd/instances.hpp"
#include "mvtd/runners.hpp"
#include "mvtd/stats.hpp"

namespace mvtd {
namespace verify {

struct CriterionResult {
  std::string name;
  bool pass = false;
  std::string details;
};

struct VerifyOptions {
  std::string out_dir = "verify-out";
  int threads = 0;
  std::uint64_t seed = 20250801;
};

namespace detail {

struct Bench {
  Mdp mdp;
  TabularPolicy policy;
  OnPolicyChain chain;
  FeatureSet features;
  CriticSystem system;
};

inline Bench bench_for(const Mdp& mdp, SystemOptions opts = {}) {
  Bench b{mdp, uniform_policy(mdp), {}, {}, {}};
  b.chain = induced_chain(b.mdp, b.policy);
  b.features = identity_features(b.chain);
  b.system =
      build_critic_system(b.chain, b.features, mdp.gamma, mdp.r_max, opts);
  return b;
}

inline std::string fmt(double x) {
  std::ostringstream ss;
  ss.precision(5);
  ss << x;
  return ss.str();
}

// Step size for the rate experiments: the grid point beta_max * 2^j with the
// fastest exact mean-square contraction, kept strictly contractive.
inline double rate_step_size(const Bench& b) {
  double best_beta = b.system.beta_max;
  double best_rho = 1.0;
  for (int j = 0; j <= 9; ++j) {
    const double beta = b.system.beta_max * std::pow(2.0, j);
    const double rho = mean_square_contraction(
        b.mdp, b.policy, b.chain, b.features, b.mdp.gamma, beta,
        b.system.m_mat);
    if (rho < best_rho) {
      best_rho = rho;
      best_beta = beta;
    }
  }
  return best_beta;
}

}  // namespace detail

// 1. Fixed-point exactness on the three reference instances, with the
//    hand-derived one-state numbers, in under a second.
inline CriterionResult fixed_point_suite(const VerifyOptions& opts) {
  WallClock clock;
  CriterionResult res{"1 fixed-point", true, ""};
  std::ostringstream details;

  const Mdp mdps[] = {instances::one_state(), instances::two_cycle(),
                      instances::chain5()};
  const char* names[] = {"one_state", "two_cycle", "chain5"};
  for (int i = 0; i < 3; ++i) {
    const auto b = detail::bench_for(mdps[i]);
    const int n = mdps[i].num_states;
    const Vector v = exact_value(b.chain, mdps[i].gamma);
    const Vector u = exact_square_value(b.chain, mdps[i].gamma, v);
    const double err_v = (b.system.w_bar.head(n) - v).cwiseAbs().maxCoeff();
    const double err_u = (b.system.w_bar.tail(n) - u).cwiseAbs().maxCoeff();
    if (err_v > 1e-9 || err_u > 1e-9) res.pass = false;
    details << names[i] << ": |v-V|=" << detail::fmt(err_v)
            << " |u-U|=" << detail::fmt(err_u) << "; ";
  }

  const auto one = detail::bench_for(instances::one_state());
  const double mu_expected = (1.25 - std::sqrt(1.0625)) / 2.0;
  if (std::abs(one.system.w_bar[0] - 2.0) > 1e-9 ||
      std::abs(one.system.w_bar[1] - 4.0) > 1e-9)
    res.pass = false;
  if (std::abs(one.system.mu - mu_expected) > 1e-12) res.pass = false;
  if (std::abs(one.system.c_const - 7.0) > 1e-12) res.pass = false;
  details << "one_state w=(" << detail::fmt(one.system.w_bar[0]) << ","
          << detail::fmt(one.system.w_bar[1])
          << ") mu=" << detail::fmt(one.system.mu)
          << " c=" << detail::fmt(one.system.c_const);

  const double secs = clock.seconds();
  if (secs >= 1.0) res.pass = false;
  details << "; runtime " << detail::fmt(secs) << "s";
  res.details = details.str();
  return res;
}

// 2. Theorem 1/2 bound validity on the chain at beta_max, 200 replications,
//    every power-of-two checkpoint up to 2^16, zero violations.
inline CriterionResult t1_t2_bounds_suite(const VerifyOptions& opts) {
  CriterionResult res{"2 T1/T2 bounds", true, ""};
  const auto b = detail::bench_for(instances::chain5());

  StatConfig cfg;
  cfg.checkpoints = pow2_checkpoints(1L << 16);
  cfg.beta = b.system.beta_max;
  cfg.replications = 200;
  cfg.base_seed = derive_seed(opts.seed, 2);
  cfg.threads = opts.threads;
  const CheckpointStats st = estimate_statistics(b.mdp, b.policy, b.chain,
                                                 b.features, b.system, cfg);

  const double z0_sq = b.system.w_bar.squaredNorm();
  int violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < st.t.size(); ++i) {
    BoundParams p;
    p.t = st.t[i];
    p.k = st.t[i] / 2;
    p.beta = cfg.beta;
    p.init_err_sq = z0_sq;
    const double b1 = theorem_bound(Bound::T1_last, b.system, p);
    if (st.mse_last[i] > b1) ++violations;
    worst_margin = std::min(worst_margin, b1 / st.mse_last[i]);
    if (p.k >= 1 && !std::isnan(st.mse_tail[i])) {
      const double b2 = theorem_bound(Bound::T2_tail, b.system, p);
      if (st.mse_tail[i] > b2) ++violations;
      worst_margin = std::min(worst_margin, b2 / st.mse_tail[i]);
    }
  }
  res.pass = violations == 0;
  res.details = "violations=" + std::to_string(violations) +
                " tightest bound/mse=" + detail::fmt(worst_margin) +
                " beta=" + detail::fmt(cfg.beta);
  return res;
}

// 3. O(1/t) tail-average rate: log-log slope over t in {2^12..2^16}, k=t/2,
//    100 replications, slope in [-1.3, -0.7]. The step size is the fastest
//    exactly-contractive grid point (documented override above beta_max).
inline CriterionResult rate_suite(const VerifyOptions& opts) {
  CriterionResult res{"3 T2 rate", true, ""};
  const auto b = detail::bench_for(instances::chain5());
  const double beta = detail::rate_step_size(b);

  StatConfig cfg;
  cfg.checkpoints = {1L << 12, 1L << 13, 1L << 14, 1L << 15, 1L << 16};
  cfg.beta = beta;
  cfg.replications = 100;
  cfg.base_seed = derive_seed(opts.seed, 3);
  cfg.threads = opts.threads;
  cfg.override_step_size = true;
  const CheckpointStats st = estimate_statistics(b.mdp, b.policy, b.chain,
                                                 b.features, b.system, cfg);

  std::vector<double> ts(st.t.begin(), st.t.end());
  const double slope = loglog_slope(ts, st.mse_tail);
  res.pass = slope >= -1.3 && slope <= -0.7;
  res.details = "slope=" + detail::fmt(slope) + " beta=" + detail::fmt(beta) +
                " mse_tail[last]=" + detail::fmt(st.mse_tail.back());
  return res;
}

// 4. Regularized variant: universal step size zeta/c_check with
//    zeta = 1/sqrt(N); MSE to w_bar decays at the O(1/t) rate on the
//    low-discount chain; the regularization drift inequality holds exactly on
//    5 random systems.
inline CriterionResult regularized_suite(const VerifyOptions& opts) {
  CriterionResult res{"4 T3 regularized", true, ""};
  std::ostringstream details;

  const auto b = detail::bench_for(instances::chain5_low_gamma());
  std::vector<double> ts, mses;
  for (long t : {1L << 14, 1L << 15, 1L << 16, 1L << 17, 1L << 18}) {
    const long n = t / 2;
    const double zeta = 1.0 / std::sqrt(static_cast<double>(n));
    const double c_check = step_size_c_check(
        b.mdp.gamma, b.mdp.r_max, b.features.phi_v_max, b.features.phi_u_max,
        zeta);
    StatConfig cfg;
    cfg.checkpoints = {t};
    cfg.beta = zeta / c_check;  // no spectral input
    cfg.zeta = zeta;
    cfg.replications = 100;
    cfg.base_seed = derive_seed(opts.seed, 400 + t);
    cfg.threads = opts.threads;
    cfg.reference = ErrorReference::fixed_point;
    const CheckpointStats st = estimate_statistics(
        b.mdp, b.policy, b.chain, b.features, b.system, cfg);
    ts.push_back(static_cast<double>(t));
    mses.push_back(st.mse_tail[0]);
  }
  const double slope = loglog_slope(ts, mses);
  if (!(slope >= -1.3 && slope <= -0.7)) res.pass = false;
  details << "slope=" << detail::fmt(slope);

  int drift_violations = 0;
  for (std::uint64_t seed : {101, 102, 103, 104, 105}) {
    Rng rng(seed);
    const Mdp mdp = make_garnet_mdp(6, 2, 3, 0.6, 0.8, rng);
    const auto policy = uniform_policy(mdp);
    const auto chain = induced_chain(mdp, policy);
    const FeatureSet fs = random_orthonormal_features(chain, 3, rng);
    const auto [m, xi] = assemble_system(chain, fs, mdp.gamma);
    const Vector w = fixed_point(m, xi);
    const double iota = spectral_constants(m).iota;
    for (double zeta : {0.1, 0.01, 0.001}) {
      const Vector w_reg = regularized_fixed_point(m, xi, zeta);
      if ((w_reg - w).norm() > drift_bound(zeta, xi.norm(), iota))
        ++drift_violations;
    }
  }
  if (drift_violations != 0) res.pass = false;
  details << " drift_violations=" << drift_violations;
  res.details = details.str();
  return res;
}

// 5. High-probability bounds: 90th percentile of the projected tail-average
//    error under the Theorem 4 bound (and Theorem 5 for the regularized
//    variant against w_bar_reg), t = 2^14, k = 2^13, 500 replications.
inline CriterionResult highprob_suite(const VerifyOptions& opts) {
  CriterionResult res{"5 T4/T5 high-probability", true, ""};
  std::ostringstream details;
  const long t = 1L << 14;
  const long k = 1L << 13;
  const double delta = 0.1;
  const long n = t - k;
  const double zeta = 1.0 / std::sqrt(static_cast<double>(n));

  const auto plain = detail::bench_for(instances::chain5());
  SystemOptions opts_sys;
  opts_sys.zeta = zeta;
  opts_sys.h_radius = 1.1 * plain.system.xi.norm() / plain.system.mu;
  const auto b = detail::bench_for(instances::chain5(), opts_sys);

  {
    StatConfig cfg;
    cfg.checkpoints = {t};
    cfg.beta = b.system.beta_max;
    cfg.h_radius = b.system.h_radius;
    cfg.replications = 500;
    cfg.delta = delta;
    cfg.base_seed = derive_seed(opts.seed, 5);
    cfg.threads = opts.threads;
    const CheckpointStats st = estimate_statistics(
        b.mdp, b.policy, b.chain, b.features, b.system, cfg);
    BoundParams p;
    p.t = t;
    p.k = k;
    p.beta = cfg.beta;
    p.delta = delta;
    p.init_err_norm = b.system.w_bar.norm();
    const double bound = theorem_bound(Bound::T4_highprob, b.system, p);
    if (!(st.quantile_tail[0] <= bound)) res.pass = false;
    details << "T4: q90=" << detail::fmt(st.quantile_tail[0])
            << " bound=" << detail::fmt(bound);
  }
  {
    StatConfig cfg;
    cfg.checkpoints = {t};
    cfg.beta = *b.system.beta_check_max;
    cfg.zeta = zeta;
    cfg.h_radius = b.system.h_radius;
    cfg.replications = 500;
    cfg.delta = delta;
    cfg.base_seed = derive_seed(opts.seed, 55);
    cfg.threads = opts.threads;
    cfg.reference = ErrorReference::regularized_fixed_point;
    const CheckpointStats st = estimate_statistics(
        b.mdp, b.policy, b.chain, b.features, b.system, cfg);
    BoundParams p;
    p.t = t;
    p.k = k;
    p.beta = cfg.beta;
    p.zeta = zeta;
    p.delta = delta;
    p.init_err_norm = b.system.w_bar_reg->norm();
    const double bound = theorem_bound(Bound::T5_reg_highprob, b.system, p);
    if (!(st.quantile_tail[0] <= bound)) res.pass = false;
    details << "; T5: q90=" << detail::fmt(st.quantile_tail[0])
            << " bound=" << detail::fmt(bound);
  }
  res.details = details.str();
  return res;
}

// 6. One-step contraction lemma: lambda_max of the sample mean of
//    (I - beta M_t)'(I - beta M_t) over 1e5 samples at beta_max stays under
//    1 - beta mu + 3 SE on every reference instance.
inline CriterionResult contraction_suite(const VerifyOptions& opts) {
  CriterionResult res{"6 contraction lemma", true, ""};
  std::ostringstream details;
  const Mdp mdps[] = {instances::one_state(), instances::two_cycle(),
                      instances::chain5()};
  const char* names[] = {"one_state", "two_cycle", "chain5"};
  for (int i = 0; i < 3; ++i) {
    const auto b = detail::bench_for(mdps[i]);
    const SampledContraction sc = sampled_contraction(
        b.mdp, b.policy, b.chain, b.features, b.mdp.gamma, b.system.beta_max,
        100000, derive_seed(opts.seed, 600 + i));
    const double limit = 1.0 - b.system.beta_max * b.system.mu + 3.0 * sc.se;
    if (!(sc.lambda_max <= limit)) res.pass = false;
    details << names[i] << ": " << detail::fmt(sc.lambda_max)
            << " <= " << detail::fmt(limit) << "; ";
  }
  res.details = details.str();
  return res;
}

// 7. Gradient oracles vs central finite differences (h = 1e-5, relative
//    error <= 1e-4) on 2-state 2-action softmax instances, 50 random thetas,
//    plus the grad-J and K1 norm bounds.
inline CriterionResult gradients_suite(const VerifyOptions& opts) {
  CriterionResult res{"7 gradient oracles", true, ""};
  const Mdp m = instances::bandit2();
  const double lambda = 0.5;

  double worst_rel = 0.0;
  int norm_violations = 0;
  Rng rng(derive_seed(opts.seed, 7));
  for (int variant = 0; variant < 2; ++variant) {
    SoftmaxPolicy base = instances::bandit2_softmax(Vector::Zero(2));
    if (variant == 1) {
      // random gaussian action features, state-dependent
      for (Matrix& x : base.action_features)
        for (int i = 0; i < x.rows(); ++i)
          for (int j = 0; j < x.cols(); ++j) {
            const double u1 = std::max(rng.uniform(), 1e-300);
            x(i, j) = std::sqrt(-2.0 * std::log(u1)) *
                      std::cos(2.0 * M_PI * rng.uniform());
          }
    }
    const SoftmaxBounds sb = softmax_feature_bounds(base.action_features);
    const SmoothnessConstants sc = lipschitz_constants(
        m.r_max, m.gamma, sb.c_psi, sb.l_psi, sb.c_pi, 1.0, 0.5, lambda);

    for (int trial = 0; trial < 25; ++trial) {
      Vector theta(2);
      theta << 1.5 * (2.0 * rng.uniform() - 1.0),
          1.5 * (2.0 * rng.uniform() - 1.0);
      const SoftmaxPolicy pol = base.with_theta(theta);
      const GradientBundle bun = make_gradient_bundle(m, pol, 0, lambda, 0.0);
      const Vector fd_j = finite_difference(
          [&](const Vector& th) {
            return exact_j_of(m, pol.with_theta(th), 0);
          },
          theta, 1e-5);
      const Vector fd_u = finite_difference(
          [&](const Vector& th) {
            return exact_u_of(m, pol.with_theta(th), 0);
          },
          theta, 1e-5);
      const double rel_j =
          (bun.grad_j - fd_j).norm() / std::max(1e-12, fd_j.norm());
      const double rel_u =
          (bun.grad_u - fd_u).norm() / std::max(1e-12, fd_u.norm());
      worst_rel = std::max({worst_rel, rel_j, rel_u});
      if (bun.grad_j.norm() > sc.grad_j_bound) ++norm_violations;
      if (bun.grad_l.norm() > sc.k1) ++norm_violations;
    }
  }
  res.pass = worst_rel <= 1e-4 && norm_violations == 0;
  res.details = "worst_rel_err=" + detail::fmt(worst_rel) +
                " norm_violations=" + std::to_string(norm_violations);
  return res;
}

// 8. Lagrangian smoothness with instance-computed constants: 1000 random
//    pairs, zero violations.
inline CriterionResult smoothness_suite(const VerifyOptions& opts) {
  CriterionResult res{"8 smoothness", true, ""};
  const Mdp m = instances::ref2();
  const SoftmaxPolicy base = instances::ref2_softmax(Vector::Zero(2));
  const SoftmaxBounds sb = softmax_feature_bounds(base.action_features);
  const double lambda = 0.5;
  const SmoothnessConstants sc = lipschitz_constants(
      m.r_max, m.gamma, sb.c_psi, sb.l_psi, sb.c_pi, 1.0, 0.5, lambda);

  Rng rng(derive_seed(opts.seed, 8));
  int violations = 0;
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Vector t1(2), t2(2);
    for (int i = 0; i < 2; ++i) {
      t1[i] = 2.0 * (2.0 * rng.uniform() - 1.0);
      t2[i] = 2.0 * (2.0 * rng.uniform() - 1.0);
    }
    const GradientBundle b1 =
        make_gradient_bundle(m, base.with_theta(t1), 0, lambda, 0.0);
    const GradientBundle b2 =
        make_gradient_bundle(m, base.with_theta(t2), 0, lambda, 0.0);
    const double lhs = (b1.grad_l - b2.grad_l).norm();
    const double rhs = sc.l_o * (t1 - t2).norm();
    if (lhs > rhs + 1e-12) ++violations;
    if (rhs > 0) worst_ratio = std::max(worst_ratio, lhs / rhs);
  }
  res.pass = violations == 0;
  res.details = "violations=" + std::to_string(violations) +
                " worst lhs/rhs=" + detail::fmt(worst_ratio) +
                " L_o=" + detail::fmt(sc.l_o);
  return res;
}

// 9. SPSA bias structure: with exact-value surrogates at d = 2, the
//    deviation of the all-Delta-averaged estimate from grad J across
//    p in {0.2, 0.1, 0.05}, with successive error ratios asserted to lie in
//    [1.6, 2.4] per the acceptance statement.
inline CriterionResult spsa_bias_suite(const VerifyOptions& opts) {
  CriterionResult res{"9 SPSA bias", true, ""};
  const Mdp m = instances::bandit2();
  const SoftmaxPolicy pol = instances::bandit2_softmax(
      (Vector(2) << 0.4, 0.1).finished());
  const Vector exact = exact_grad_j(m, pol, 0);
  const double j0 = exact_j_of(m, pol, 0);

  const SoftmaxBounds sb = softmax_feature_bounds(pol.action_features);
  const SmoothnessConstants sc = lipschitz_constants(
      m.r_max, m.gamma, sb.c_psi, sb.l_psi, sb.c_pi, 1.0, 0.5, 0.0);

  std::vector<double> errs;
  bool within_h_bound = true;
  for (double p : {0.2, 0.1, 0.05}) {
    Vector mean = Vector::Zero(2);
    for (int mask = 0; mask < 4; ++mask) {
      Vector delta(2);
      delta << (mask & 1 ? 1.0 : -1.0), (mask & 2 ? 1.0 : -1.0);
      const double j_plus =
          exact_j_of(m, pol.with_theta(pol.theta + p * delta), 0);
      mean += spsa_gradient(j_plus, j0, p, delta);
    }
    mean /= 4.0;
    errs.push_back((mean - exact).norm());
    if (errs.back() > std::pow(2.0, 1.5) * sc.l_j * p / 2.0)
      within_h_bound = false;
  }
  const double r1 = errs[0] / errs[1];
  const double r2 = errs[1] / errs[2];
  res.pass = (r1 >= 1.6 && r1 <= 2.4) && (r2 >= 1.6 && r2 <= 2.4);
  res.details = "err={" + detail::fmt(errs[0]) + "," + detail::fmt(errs[1]) +
                "," + detail::fmt(errs[2]) + "} ratios={" + detail::fmt(r1) +
                "," + detail::fmt(r2) + "} first_order_bias_bound_ok=" +
                (within_h_bound ? "yes" : "no");
  return res;
}

namespace detail {

struct ActorSweepResult {
  double mean_grad_norm_sq = 0.0;   // mean over the trace, then over seeds
  double mean_final_variance = 0.0; // exact Lambda(s0) at theta_n
};

inline ActorSweepResult actor_sweep(const Mdp& mdp, const SoftmaxPolicy& pol,
                                    const FeatureSet& fs, long n,
                                    double lambda, int seeds,
                                    std::uint64_t base_seed, int threads) {
  std::vector<double> grad_means(seeds), final_vars(seeds);
  auto run_one = [&](int s) {
    ActorConfig cfg;
    cfg.n = n;
    cfg.lambda = lambda;
    cfg.s0 = 0;
    cfg.seed = derive_seed(base_seed, s);
    cfg.critic_beta = 0.3;
    cfg.override_step_size = true;
    const ActorResult res = run_mv_spsa_ac(mdp, pol, fs, cfg);
    grad_means[s] = mean_of(res.grad_norm_trace);
    const Vector theta_final =
        res.theta_trace.row(res.theta_trace.rows() - 1).transpose();
    const SoftmaxPolicy final_pol = pol.with_theta(theta_final);
    const OnPolicyChain chain = induced_chain(mdp, final_pol.probs());
    const Vector v = exact_value(chain, mdp.gamma);
    const Vector u = exact_square_value(chain, mdp.gamma, v);
    final_vars[s] = u[0] - v[0] * v[0];
  };

  int workers = threads > 0
                    ? threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, seeds));
  std::atomic<int> counter{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      int s;
      while ((s = counter.fetch_add(1)) < seeds) {
        try {
          run_one(s);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  ActorSweepResult out;
  out.mean_grad_norm_sq = mean_of(grad_means);
  out.mean_final_variance = mean_of(final_vars);
  return out;
}

}  // namespace detail

// 10. Actor decay: mean ||grad L(theta_R)||^2 (the exact average over the
//     iterate trace, i.e. the expectation over the uniform draw of R) is
//     non-increasing across n in {256, 1024, 4096} with log-log slope
//     <= -0.15; the decay sweep runs at lambda = 3, where the Lagrangian
//     optimum is far from the uniform initialization so the descent phase
//     dominates the trace. Exact Lambda(s0) at the final iterate is
//     non-increasing across lambda in {0, 0.5, 2}.
inline CriterionResult actor_suite(const VerifyOptions& opts) {
  CriterionResult res{"10 actor decay", true, ""};
  std::ostringstream details;
  const Mdp m = instances::ref2();
  const SoftmaxPolicy pol = instances::ref2_softmax(Vector::Zero(2));
  const OnPolicyChain chain0 = induced_chain(m, uniform_policy(m));
  const FeatureSet fs = identity_features(chain0);
  const int seeds = 20;

  std::vector<double> ns = {256, 1024, 4096};
  std::vector<double> grad_means;
  for (double nd : ns) {
    const auto sweep = detail::actor_sweep(
        m, pol, fs, static_cast<long>(nd), 3.0, seeds,
        derive_seed(opts.seed, 1000 + static_cast<std::uint64_t>(nd)),
        opts.threads);
    grad_means.push_back(sweep.mean_grad_norm_sq);
  }
  const bool non_increasing =
      grad_means[0] >= grad_means[1] && grad_means[1] >= grad_means[2];
  const double slope = loglog_slope(ns, grad_means);
  if (!non_increasing || !(slope <= -0.15)) res.pass = false;
  details << "grad_norm_sq={" << detail::fmt(grad_means[0]) << ","
          << detail::fmt(grad_means[1]) << "," << detail::fmt(grad_means[2])
          << "} slope=" << detail::fmt(slope);

  std::vector<double> lambdas = {0.0, 0.5, 2.0};
  std::vector<double> variances;
  for (double lam : lambdas) {
    const auto sweep = detail::actor_sweep(
        m, pol, fs, 2048, lam, seeds,
        derive_seed(opts.seed, 2000 + static_cast<std::uint64_t>(lam * 10)),
        opts.threads);
    variances.push_back(sweep.mean_final_variance);
  }
  const bool var_monotone =
      variances[0] >= variances[1] && variances[1] >= variances[2];
  if (!var_monotone) res.pass = false;
  details << " Lambda(s0)={" << detail::fmt(variances[0]) << ","
          << detail::fmt(variances[1]) << "," << detail::fmt(variances[2])
          << "}";
  res.details = details.str();
  return res;
}

// 11. Reproducibility: representative configs covering every CSV schema are
//     run twice with the same resolved config; all artifacts byte-identical.
inline CriterionResult reproducibility_suite(const VerifyOptions& opts) {
  namespace fs = std::filesystem;
  CriterionResult res{"11 reproducibility", true, ""};
  std::ostringstream details;
  const std::string root = opts.out_dir + "/repro";
  fs::create_directories(root);

  auto compare_runs = [&](const json& doc, const std::string& name,
                          bool actor) {
    const ExperimentConfig cfg1 = resolve_experiment(doc);
    const ExperimentConfig cfg2 = resolve_experiment(doc);
    const std::string d1 = root + "/" + name + "_a";
    const std::string d2 = root + "/" + name + "_b";
    const RunManifest m1 = actor ? run_actor_experiment(cfg1, d1)
                                 : run_critic_experiment(cfg1, d1);
    const RunManifest m2 = actor ? run_actor_experiment(cfg2, d2)
                                 : run_critic_experiment(cfg2, d2);
    bool same = m1.file_checksums == m2.file_checksums;
    for (const auto& [file, sum] : m1.file_checksums)
      same = same && read_file(d1 + "/" + file) == read_file(d2 + "/" + file);
    if (!same) res.pass = false;
    details << name << (same ? " ok; " : " MISMATCH; ");
  };

  json chain_gen = {{"kind", "generator"},
                    {"generator",
                     {{"type", "chain"}, {"length", 5}, {"slip", 0.1},
                      {"gamma", 0.5}}}};

  compare_runs(json{{"seed", 11},
                    {"threads", opts.threads},
                    {"mdp", chain_gen},
                    {"critic",
                     {{"t", 2048L}, {"k", 1024L}, {"beta", "auto"},
                      {"replications", 8}}}},
               "critic_plain", false);
  compare_runs(json{{"seed", 12},
                    {"threads", opts.threads},
                    {"mdp", chain_gen},
                    {"critic",
                     {{"t", 2048L}, {"k", 1024L}, {"variant", "regularized"},
                      {"zeta", "auto"}, {"beta", "auto"},
                      {"replications", 8}}}},
               "critic_reg", false);
  compare_runs(json{{"seed", 13},
                    {"threads", opts.threads},
                    {"mdp", chain_gen},
                    {"critic",
                     {{"t", 2048L}, {"k", 1024L}, {"beta", "auto"},
                      {"projected", true}, {"h_radius", "auto"},
                      {"replications", 8}, {"delta", 0.1}}}},
               "critic_proj", false);

  {
    const Mdp ref = instances::ref2();
    json actor_doc = {
        {"seed", 14},
        {"threads", 1},
        {"mdp", {{"kind", "inline"}, {"mdp", mdp_to_json(ref)}}},
        {"policy",
         {{"type", "softmax"},
          {"theta", {0.0, 0.0}},
          {"action_features",
           {{{1.0, 0.0}, {0.0, 1.0}},
            {{1.0, 0.0}, {0.0, 1.0}},
            {{1.0, 0.0}, {0.0, 1.0}}}}}},
        {"actor",
         {{"n", 64L}, {"lambda", 0.5}, {"beta", 0.3},
          {"override_step_size", true}}}};
    compare_runs(actor_doc, "actor", true);
  }

  // fixed-point report and MDP file round-trip
  {
    const ExperimentConfig cfg = resolve_experiment(
        json{{"seed", 15}, {"mdp", chain_gen}});
    const std::string r1 = fixed_point_report(cfg).dump(2);
    const std::string r2 = fixed_point_report(cfg).dump(2);
    if (r1 != r2) res.pass = false;
    const std::string p1 = root + "/mdp_roundtrip.json";
    save_mdp(cfg.mdp, p1);
    const Mdp loaded = load_mdp(p1);
    const std::string p2 = root + "/mdp_roundtrip2.json";
    save_mdp(loaded, p2);
    if (read_file(p1) != read_file(p2)) res.pass = false;
    details << "fixed-point+roundtrip "
            << (read_file(p1) == read_file(p2) ? "ok" : "MISMATCH");
  }
  res.details = details.str();
  return res;
}

inline const std::map<std::string, CriterionResult (*)(const VerifyOptions&)>&
suite_table() {
  static const std::map<std::string, CriterionResult (*)(const VerifyOptions&)>
      table = {
          {"fixed-point", fixed_point_suite},
          {"bounds", t1_t2_bounds_suite},
          {"T1", t1_t2_bounds_suite},
          {"rate", rate_suite},
          {"T2", rate_suite},
          {"reg", regularized_suite},
          {"T3", regularized_suite},
          {"highprob", highprob_suite},
          {"T4", highprob_suite},
          {"T5", highprob_suite},
          {"contraction", contraction_suite},
          {"gradients", gradients_suite},
          {"smoothness", smoothness_suite},
          {"spsa-bias", spsa_bias_suite},
          {"actor", actor_suite},
          {"T6", actor_suite},
          {"repro", reproducibility_suite},
      };
  return table;
}

// Canonical execution order for `verify` without --suite.
inline std::vector<std::string> default_suites() {
  return {"fixed-point", "bounds",     "rate",      "reg",
          "highprob",    "contraction", "gradients", "smoothness",
          "spsa-bias",   "actor",      "repro"};
}

inline CriterionResult run_suite(const std::string& name,
                                 const VerifyOptions& opts) {
  const auto& table = suite_table();
  const auto it = table.find(name);
  if (it == table.end())
    throw ConstraintViolation("unknown verify suite: " + name);
  return it->second(opts);
}

}  // namespace verify
}  // namespace mvtd
