#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <limits>
#include <bit>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "mvtd/errors.hpp"
#include "mvtd/features.hpp"
#include "mvtd/linear_system.hpp"
#include "mvtd/mdp.hpp"
#include "mvtd/rng.hpp"
#include "mvtd/stats.hpp"

namespace mvtd {

// Mutable learner state for the TD recursion. Tail sums cover the iterates
// with index k+1 .. t (the iterate produced by update i has index i).
struct CriticState {
  Vector v;
  Vector u;
  long step = 0;
  double beta = 0.0;
  std::optional<double> zeta;
  std::optional<double> h_radius;
  long tail_k = 0;
  Vector tail_sum;
  long tail_count = 0;
  long projected_steps = 0;

  Vector w() const {
    Vector out(v.size() + u.size());
    out << v, u;
    return out;
  }
};

inline CriticState make_critic_state(int q, double beta, long tail_k,
                                     std::optional<double> zeta = {},
                                     std::optional<double> h_radius = {},
                                     const std::optional<Vector>& w0 = {}) {
  CriticState st;
  st.v = Vector::Zero(q);
  st.u = Vector::Zero(q);
  if (w0) {
    if (w0->size() != 2 * q) throw DimensionMismatch("w0 must have size 2q");
    st.v = w0->head(q);
    st.u = w0->tail(q);
  }
  st.beta = beta;
  st.zeta = zeta;
  st.h_radius = h_radius;
  st.tail_k = tail_k;
  st.tail_sum = Vector::Zero(2 * q);
  return st;
}

// Scale w back to the ball ||w|| <= H when it escapes.
inline Vector project(const Vector& w, double h_radius) {
  const double n = w.norm();
  if (n <= h_radius) return w;
  return w * (h_radius / n);
}

namespace detail {

inline void finish_step(CriticState& st) {
  if (st.h_radius) {
    const double n2 = st.v.squaredNorm() + st.u.squaredNorm();
    const double h = *st.h_radius;
    if (n2 > h * h) {
      const double scale = h / std::sqrt(n2);
      st.v *= scale;
      st.u *= scale;
      ++st.projected_steps;
    }
  }
  ++st.step;
  if (st.step > st.tail_k) {
    st.tail_sum.head(st.v.size()) += st.v;
    st.tail_sum.tail(st.u.size()) += st.u;
    ++st.tail_count;
  }
}

}  // namespace detail

// One TD update:
//   delta = r + g v'fv(s') - v'fv(s)
//   eps   = r^2 + 2 g r v'fv(s') + g^2 u'fu(s') - u'fu(s)
//   v += beta delta fv(s),  u += beta eps fu(s)
inline void td_step(CriticState& st, const Transition& tr,
                    const FeatureSet& fs, double gamma) {
  if (st.zeta) throw ConstraintViolation("td_step requires zeta to be unset");
  const Vector fv_s = fs.fv(tr.s), fv_n = fs.fv(tr.s_next);
  const Vector fu_s = fs.fu(tr.s), fu_n = fs.fu(tr.s_next);
  const double vn = st.v.dot(fv_n);
  const double delta = tr.r + gamma * vn - st.v.dot(fv_s);
  const double eps = tr.r * tr.r + 2.0 * gamma * tr.r * vn +
                     gamma * gamma * st.u.dot(fu_n) - st.u.dot(fu_s);
  st.v += st.beta * delta * fv_s;
  st.u += st.beta * eps * fu_s;
  detail::finish_step(st);
}

// Regularized update: the shrink (1 - beta zeta) is applied before the TD
// increment, matching w <- w + beta (r phi - (zeta I + M_t) w).
inline void td_step_regularized(CriticState& st, const Transition& tr,
                                const FeatureSet& fs, double gamma) {
  if (!st.zeta)
    throw ConstraintViolation("td_step_regularized requires zeta");
  const double zeta = *st.zeta;
  const Vector fv_s = fs.fv(tr.s), fv_n = fs.fv(tr.s_next);
  const Vector fu_s = fs.fu(tr.s), fu_n = fs.fu(tr.s_next);
  const double vn = st.v.dot(fv_n);
  const double delta = tr.r + gamma * vn - st.v.dot(fv_s);
  const double eps = tr.r * tr.r + 2.0 * gamma * tr.r * vn +
                     gamma * gamma * st.u.dot(fu_n) - st.u.dot(fu_s);
  st.v = (1.0 - st.beta * zeta) * st.v + st.beta * delta * fv_s;
  st.u = (1.0 - st.beta * zeta) * st.u + st.beta * eps * fu_s;
  detail::finish_step(st);
}

// Matrix form w <- w + beta (r phi_t - M_t w), or with (zeta I + M_t) when
// zeta is set. Used to cross-check the component form.
inline Vector td_step_matrix_form(const Vector& w, const Transition& tr,
                                  const FeatureSet& fs, double gamma,
                                  double beta,
                                  std::optional<double> zeta = {}) {
  const Matrix mt = make_m_t(fs, tr, gamma);
  const Vector phi = make_phi_t(fs, tr);
  Vector h = tr.r * phi - mt * w;
  if (zeta) h -= *zeta * w;
  return w + beta * h;
}

struct CriticRunConfig {
  long t = 0;
  long k = 0;
  double beta = 0.0;
  std::optional<double> zeta;
  std::optional<double> h_radius;
  std::uint64_t seed = 0;
  bool override_step_size = false;
  std::optional<Vector> w0;
  std::vector<long> checkpoints;  // ascending positions for the error trace
  double divergence_guard = 1e6;
};

struct RunResult {
  CriticState w_final;
  Vector w_tail;
  bool tail_empty = false;
  std::vector<long> checkpoints;
  std::vector<double> err_last;  // ||w_i - w_bar|| at each checkpoint
  std::uint64_t seed = 0;
};

namespace detail {

inline void enforce_ceiling(const CriticSystem& sys,
                            const CriticRunConfig& cfg) {
  if (cfg.override_step_size) return;
  if (cfg.zeta) {
    const double c_check = step_size_c_check(sys.gamma, sys.r_max,
                                             sys.phi_v_max, sys.phi_u_max,
                                             *cfg.zeta);
    if (cfg.beta > *cfg.zeta / c_check * (1.0 + 1e-12))
      throw StepSizeTooLarge("beta exceeds zeta/c_check; pass override to run");
  } else if (cfg.beta > sys.beta_max * (1.0 + 1e-12)) {
    throw StepSizeTooLarge("beta exceeds mu/c; pass override to run");
  }
}

}  // namespace detail

// Core loop without step-size policing: used by the actor, whose step-size
// policy is handled at the loop level. w_ref supplies the error-trace
// reference and the divergence guard scale.
inline RunResult run_critic_with_reference(const Mdp& mdp,
                                           const TabularPolicy& policy,
                                           const OnPolicyChain& chain,
                                           const FeatureSet& fs,
                                           const Vector& w_ref,
                                           const CriticRunConfig& cfg) {
  if (cfg.k > cfg.t) throw ConstraintViolation("tail index k must be <= t");

  CriticState st = make_critic_state(fs.q, cfg.beta, cfg.k, cfg.zeta,
                                     cfg.h_radius, cfg.w0);
  Rng rng(cfg.seed);
  const double guard = cfg.divergence_guard * std::max(1.0, w_ref.norm());
  const bool reg = cfg.zeta.has_value();

  RunResult res;
  res.checkpoints = cfg.checkpoints;
  res.err_last.reserve(cfg.checkpoints.size());
  std::size_t next_cp = 0;

  for (long i = 1; i <= cfg.t; ++i) {
    const Transition tr = sample_iid_transition(mdp, policy, chain, rng);
    if (reg)
      td_step_regularized(st, tr, fs, mdp.gamma);
    else
      td_step(st, tr, fs, mdp.gamma);

    if ((i & 0xff) == 0 || i == cfg.t) {
      if (st.v.squaredNorm() + st.u.squaredNorm() > guard * guard)
        throw CriticDiverged("iterate norm exceeded guard at step " +
                             std::to_string(i));
    }
    if (next_cp < cfg.checkpoints.size() && i == cfg.checkpoints[next_cp]) {
      Vector z = st.w() - w_ref;
      res.err_last.push_back(z.norm());
      ++next_cp;
    }
  }

  if (st.tail_count > 0) {
    res.w_tail = st.tail_sum / static_cast<double>(st.tail_count);
  } else {
    res.w_tail = st.w();
    res.tail_empty = true;
  }
  res.seed = cfg.seed;
  res.w_final = std::move(st);
  return res;
}

// Execute t steps of the selected variant over i.i.d. samples, returning the
// tail average over indices k+1 .. t. Enforces the applicable step-size
// ceiling unless the config overrides it.
inline RunResult run_critic(const Mdp& mdp, const TabularPolicy& policy,
                            const OnPolicyChain& chain, const FeatureSet& fs,
                            const CriticSystem& sys,
                            const CriticRunConfig& cfg) {
  detail::enforce_ceiling(sys, cfg);
  return run_critic_with_reference(mdp, policy, chain, fs, sys.w_bar, cfg);
}

// --- Monte-Carlo estimation of the bound left-hand sides -----------------

enum class ErrorReference { fixed_point, regularized_fixed_point };

struct StatConfig {
  std::vector<long> checkpoints;  // ascending powers of two
  double beta = 0.0;
  std::optional<double> zeta;
  std::optional<double> h_radius;
  int replications = 0;
  std::optional<double> delta;
  std::uint64_t base_seed = 0;
  // When set, one seed per replication; duplicates are a configuration
  // error (they would silently collapse the Monte-Carlo spread).
  std::vector<std::uint64_t> explicit_seeds;
  bool override_step_size = false;
  std::optional<Vector> w0;
  ErrorReference reference = ErrorReference::fixed_point;
  int threads = 0;  // 0 = hardware concurrency
  // Retain per-replication error norms (for CSV traces).
  bool keep_per_replication = false;
};

struct CheckpointStats {
  std::vector<long> t;
  // Mean squared error of the last iterate and of the tail average with
  // k = t/2, plus standard errors of those means.
  std::vector<double> mse_last, se_last, mse_tail, se_tail;
  // (1-delta) quantiles of the error norms (NaN when delta is unset).
  std::vector<double> quantile_last, quantile_tail;
  long projected_steps_total = 0;
  // Filled only when keep_per_replication is set: [rep][checkpoint].
  std::vector<std::vector<double>> rep_last, rep_tail;
  std::vector<std::vector<long>> rep_projected;
};

// Runs R independent replications; per-checkpoint tail averages use
// k = t/2 via prefix sums snapshotted at the (power-of-two) checkpoints.
inline CheckpointStats estimate_statistics(const Mdp& mdp,
                                           const TabularPolicy& policy,
                                           const OnPolicyChain& chain,
                                           const FeatureSet& fs,
                                           const CriticSystem& sys,
                                           const StatConfig& cfg) {
  if (cfg.replications < 2)
    throw ConstraintViolation("need at least 2 replications");
  if (cfg.checkpoints.empty())
    throw ConstraintViolation("need at least one checkpoint");
  for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i) {
    const long t = cfg.checkpoints[i];
    if (t < 1 || (t & (t - 1)) != 0)
      throw ConstraintViolation("checkpoints must be powers of two");
    if (i > 0 && t <= cfg.checkpoints[i - 1])
      throw ConstraintViolation("checkpoints must be ascending");
  }
  if (!cfg.explicit_seeds.empty()) {
    if (static_cast<int>(cfg.explicit_seeds.size()) != cfg.replications)
      throw ConstraintViolation("explicit_seeds must match replications");
    auto sorted = cfg.explicit_seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw SeedCollision("duplicate replication seeds");
  }
  Vector ref = sys.w_bar;
  if (cfg.reference == ErrorReference::regularized_fixed_point) {
    if (!sys.w_bar_reg)
      throw ConstraintViolation("system has no regularized fixed point");
    ref = *sys.w_bar_reg;
  }
  {
    CriticRunConfig probe;
    probe.t = 1;
    probe.beta = cfg.beta;
    probe.zeta = cfg.zeta;
    probe.override_step_size = cfg.override_step_size;
    detail::enforce_ceiling(sys, probe);
  }

  const long t_max = cfg.checkpoints.back();
  const int n_cp = static_cast<int>(cfg.checkpoints.size());
  const int reps = cfg.replications;
  const bool reg = cfg.zeta.has_value();
  const double guard = 1e6 * std::max(1.0, sys.w_bar.norm());

  // err[rep][cp] for last-iterate and tail-average norms
  std::vector<std::vector<double>> last_norm(reps), tail_norm(reps);
  std::vector<std::vector<long>> projected_at(reps);
  std::vector<long> projected(reps, 0);

  auto run_rep = [&](int rep) {
    CriticState st = make_critic_state(fs.q, cfg.beta, /*tail_k=*/0, cfg.zeta,
                                       cfg.h_radius, cfg.w0);
    Rng rng(cfg.explicit_seeds.empty()
                ? derive_seed(cfg.base_seed, static_cast<std::uint64_t>(rep))
                : cfg.explicit_seeds[rep]);
    Vector prefix = Vector::Zero(2 * fs.q);
    // Prefix sums snapshotted at every power of two, so that a checkpoint t
    // can form its tail average over (t/2, t] regardless of the checkpoint
    // spacing.
    std::vector<Vector> pow2_prefix;
    last_norm[rep].resize(n_cp);
    tail_norm[rep].assign(n_cp, std::numeric_limits<double>::quiet_NaN());
    projected_at[rep].assign(n_cp, 0);

    int next_cp = 0;
    long next_pow2 = 1;
    for (long i = 1; i <= t_max; ++i) {
      const Transition tr = sample_iid_transition(mdp, policy, chain, rng);
      if (reg)
        td_step_regularized(st, tr, fs, mdp.gamma);
      else
        td_step(st, tr, fs, mdp.gamma);
      prefix.head(fs.q) += st.v;
      prefix.tail(fs.q) += st.u;
      if ((i & 0x3ff) == 0 &&
          st.v.squaredNorm() + st.u.squaredNorm() > guard * guard)
        throw CriticDiverged("replication " + std::to_string(rep) +
                             " diverged at step " + std::to_string(i));
      if (i == next_pow2) {
        pow2_prefix.push_back(prefix);
        next_pow2 *= 2;
      }
      if (next_cp < n_cp && i == cfg.checkpoints[next_cp]) {
        last_norm[rep][next_cp] = (st.w() - ref).norm();
        projected_at[rep][next_cp] = st.projected_steps;
        if (i >= 2) {
          // pow2_prefix[j] holds the prefix sum at step 2^j.
          const int j = static_cast<int>(std::countr_zero(
                            static_cast<unsigned long long>(i))) - 1;
          const long half = i / 2;
          Vector tail =
              (prefix - pow2_prefix[j]) / static_cast<double>(i - half);
          tail_norm[rep][next_cp] = (tail - ref).norm();
        }
        ++next_cp;
      }
    }
    projected[rep] = st.projected_steps;
  };

  int threads = cfg.threads > 0
                    ? cfg.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, reps));
  if (threads == 1) {
    for (int rep = 0; rep < reps; ++rep) run_rep(rep);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> counter{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        int rep;
        while ((rep = counter.fetch_add(1)) < reps) {
          try {
            run_rep(rep);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  CheckpointStats out;
  out.t = cfg.checkpoints;
  for (int cp = 0; cp < n_cp; ++cp) {
    std::vector<double> lsq(reps), tsq, lnorm(reps), tnorm;
    for (int rep = 0; rep < reps; ++rep) {
      lnorm[rep] = last_norm[rep][cp];
      lsq[rep] = lnorm[rep] * lnorm[rep];
      if (!std::isnan(tail_norm[rep][cp])) {
        tnorm.push_back(tail_norm[rep][cp]);
        tsq.push_back(tail_norm[rep][cp] * tail_norm[rep][cp]);
      }
    }
    out.mse_last.push_back(mean_of(lsq));
    out.se_last.push_back(standard_error(lsq));
    out.mse_tail.push_back(tsq.empty()
                               ? std::numeric_limits<double>::quiet_NaN()
                               : mean_of(tsq));
    out.se_tail.push_back(tsq.empty()
                              ? std::numeric_limits<double>::quiet_NaN()
                              : standard_error(tsq));
    if (cfg.delta) {
      out.quantile_last.push_back(order_quantile(lnorm, *cfg.delta));
      out.quantile_tail.push_back(
          tnorm.empty() ? std::numeric_limits<double>::quiet_NaN()
                        : order_quantile(tnorm, *cfg.delta));
    } else {
      out.quantile_last.push_back(std::numeric_limits<double>::quiet_NaN());
      out.quantile_tail.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  for (int rep = 0; rep < reps; ++rep)
    out.projected_steps_total += projected[rep];
  if (cfg.keep_per_replication) {
    out.rep_last = std::move(last_norm);
    out.rep_tail = std::move(tail_norm);
    out.rep_projected = std::move(projected_at);
  }
  return out;
}

}  // namespace mvtd
