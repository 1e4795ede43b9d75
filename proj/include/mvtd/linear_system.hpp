#pragma once

#include <cmath>
#include <optional>
#include <utility>

#include <Eigen/Dense>

#include "mvtd/errors.hpp"
#include "mvtd/features.hpp"
#include "mvtd/mdp.hpp"

namespace mvtd {

struct SpectralConstants {
  double mu = 0.0;          // lambda_min((M + M')/2)
  double iota = 0.0;        // smallest singular value of M
  double lambda_max = 0.0;  // lambda_max((M + M')/2)
};

// Joint mean-variance linear system -M w + xi = 0 together with every
// constant entering the finite-sample bounds.
struct CriticSystem {
  Matrix m_mat;  // 2q x 2q, block lower triangular
  Vector xi;     // 2q
  Vector w_bar;  // M^{-1} xi
  int q = 0;

  double mu = 0.0;
  double iota = 0.0;
  double lambda_max_sym = 0.0;

  double c_const = 0.0;
  double beta_max = 0.0;
  double sigma_sq = 0.0;

  // Instance primitives the theorem constants are built from.
  double gamma = 0.0;
  double r_max = 0.0;
  double phi_v_max = 0.0;
  double phi_u_max = 0.0;

  std::optional<double> zeta;
  std::optional<Vector> w_bar_reg;
  std::optional<double> c_check;
  std::optional<double> beta_check_max;
  std::optional<double> sigma_check_sq;

  std::optional<double> h_radius;
  std::optional<double> tau;
  std::optional<double> tau_check;

  double xi_norm() const { return xi.norm(); }
};

// M and xi assembled from the joint value/square-value blocks:
//   [ Phi_v' D (I - g P) Phi_v              0                      ]
//   [ -2 g Phi_u' D D_R P Phi_v    Phi_u' D (I - g^2 P) Phi_u      ]
// with xi = (Phi_v' D r ; Phi_u' D r~).
inline std::pair<Matrix, Vector> assemble_system(const OnPolicyChain& chain,
                                                 const FeatureSet& fs,
                                                 double gamma) {
  const int n = static_cast<int>(chain.p_pi.rows());
  if (fs.phi_v.rows() != n) throw DimensionMismatch("features vs chain");
  const int q = fs.q;
  const Matrix eye = Matrix::Identity(n, n);
  const auto D = chain.statdist();

  Matrix m = Matrix::Zero(2 * q, 2 * q);
  m.topLeftCorner(q, q) =
      fs.phi_v.transpose() * D * (eye - gamma * chain.p_pi) * fs.phi_v;
  m.bottomLeftCorner(q, q) = -2.0 * gamma * fs.phi_u.transpose() * D *
                             chain.d_r() * chain.p_pi * fs.phi_v;
  m.bottomRightCorner(q, q) =
      fs.phi_u.transpose() * D * (eye - gamma * gamma * chain.p_pi) * fs.phi_u;

  Vector xi(2 * q);
  xi.head(q) = fs.phi_v.transpose() * D * chain.r_vec;
  xi.tail(q) = fs.phi_u.transpose() * D * chain.r_tilde;
  return {std::move(m), std::move(xi)};
}

inline Vector fixed_point(const Matrix& m, const Vector& xi) {
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible()) throw SingularSystem("M is singular");
  return lu.solve(xi);
}

inline Vector regularized_fixed_point(const Matrix& m, const Vector& xi,
                                      double zeta) {
  if (!(zeta > 0.0)) throw ConstraintViolation("zeta must be > 0");
  const Matrix reg =
      m + zeta * Matrix::Identity(m.rows(), m.cols());
  return reg.partialPivLu().solve(xi);
}

inline SpectralConstants spectral_constants(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("M must be square");
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  SpectralConstants sc;
  sc.mu = es.eigenvalues().minCoeff();
  sc.lambda_max = es.eigenvalues().maxCoeff();
  Eigen::JacobiSVD<Matrix> svd(m);
  sc.iota = svd.singularValues().minCoeff();
  if (sc.mu <= 0.0)
    throw NotPositive("lambda_min((M+M')/2) = " + std::to_string(sc.mu) +
                      " <= 0; no admissible step size exists");
  return sc;
}

// --- closed-form constants ---------------------------------------------

inline double step_size_c(double gamma, double r_max, double fv, double fu) {
  const double fv2 = fv * fv, fu2 = fu * fu;
  const double fv4 = fv2 * fv2, fu4 = fu2 * fu2;
  return std::max(4.0 * fv4 + 4.0 * gamma * gamma * r_max * r_max * fu2 * fv2,
                  4.0 * fu4) +
         2.0 * gamma * r_max * (fv2 * fu2 + fu4);
}

// Frobenius bound on ||M|| from the per-block norms.
inline double m_norm_bound(double gamma, double r_max, double fv, double fu) {
  const double fv2 = fv * fv, fu2 = fu * fu;
  const double a = fv2 * fv2 * (1.0 + gamma) * (1.0 + gamma);
  const double b = fu2 * fu2 * (1.0 + gamma * gamma) * (1.0 + gamma * gamma);
  const double c = 4.0 * gamma * gamma * r_max * r_max * fv2 * fu2;
  return std::sqrt(a + b + c);
}

inline double step_size_c_check(double gamma, double r_max, double fv,
                                double fu, double zeta) {
  return zeta * zeta + 2.0 * zeta * m_norm_bound(gamma, r_max, fv, fu) +
         step_size_c(gamma, r_max, fv, fu);
}

inline double reward_noise_term(double r_max, double fv, double fu) {
  return 2.0 * r_max * r_max * (fv * fv + r_max * r_max * fu * fu);
}

inline double iterate_noise_bracket(double gamma, double r_max, double fv,
                                    double fu) {
  const double b = m_norm_bound(gamma, r_max, fv, fu);
  return b * b;
}

inline double sigma_sq_const(double gamma, double r_max, double fv, double fu,
                             double w_bar_norm_sq) {
  return reward_noise_term(r_max, fv, fu) +
         2.0 * iterate_noise_bracket(gamma, r_max, fv, fu) * w_bar_norm_sq;
}

inline double sigma_check_sq_const(double gamma, double r_max, double fv,
                                   double fu, double zeta,
                                   double w_reg_norm_sq) {
  return reward_noise_term(r_max, fv, fu) +
         4.0 * (zeta * zeta + iterate_noise_bracket(gamma, r_max, fv, fu)) *
             w_reg_norm_sq;
}

inline double tau_const(double gamma, double r_max, double fv, double fu,
                        double h_radius) {
  return std::sqrt(reward_noise_term(r_max, fv, fu) +
                   2.0 * iterate_noise_bracket(gamma, r_max, fv, fu) *
                       h_radius * h_radius);
}

inline double tau_check_const(double gamma, double r_max, double fv, double fu,
                              double zeta, double h_radius) {
  return std::sqrt(
      reward_noise_term(r_max, fv, fu) +
      4.0 * (zeta * zeta + iterate_noise_bracket(gamma, r_max, fv, fu)) *
          h_radius * h_radius);
}

// ||M^{-1} xi - (M + zeta I)^{-1} xi|| <= zeta ||xi|| / (iota (zeta + iota)).
inline double drift_bound(double zeta, double xi_norm, double iota) {
  return zeta * xi_norm / (iota * (zeta + iota));
}

struct SystemOptions {
  std::optional<double> zeta;
  std::optional<double> h_radius;  // pass 0.0 < H; must exceed ||xi||/mu
};

inline CriticSystem build_critic_system(const OnPolicyChain& chain,
                                        const FeatureSet& fs, double gamma,
                                        double r_max,
                                        const SystemOptions& opts = {}) {
  CriticSystem sys;
  sys.q = fs.q;
  sys.gamma = gamma;
  sys.r_max = r_max;
  sys.phi_v_max = fs.phi_v_max;
  sys.phi_u_max = fs.phi_u_max;

  std::tie(sys.m_mat, sys.xi) = assemble_system(chain, fs, gamma);
  sys.w_bar = fixed_point(sys.m_mat, sys.xi);
  if ((-sys.m_mat * sys.w_bar + sys.xi).cwiseAbs().maxCoeff() > 1e-10)
    throw SingularSystem("fixed-point residual exceeds 1e-10");

  const SpectralConstants sc = spectral_constants(sys.m_mat);
  sys.mu = sc.mu;
  sys.iota = sc.iota;
  sys.lambda_max_sym = sc.lambda_max;

  sys.c_const = step_size_c(gamma, r_max, fs.phi_v_max, fs.phi_u_max);
  sys.beta_max = sys.mu / sys.c_const;
  sys.sigma_sq = sigma_sq_const(gamma, r_max, fs.phi_v_max, fs.phi_u_max,
                                sys.w_bar.squaredNorm());

  if (opts.zeta) {
    const double zeta = *opts.zeta;
    sys.zeta = zeta;
    sys.w_bar_reg = regularized_fixed_point(sys.m_mat, sys.xi, zeta);
    sys.c_check =
        step_size_c_check(gamma, r_max, fs.phi_v_max, fs.phi_u_max, zeta);
    sys.beta_check_max = zeta / *sys.c_check;
    sys.sigma_check_sq =
        sigma_check_sq_const(gamma, r_max, fs.phi_v_max, fs.phi_u_max, zeta,
                             sys.w_bar_reg->squaredNorm());
  }
  if (opts.h_radius) {
    const double h = *opts.h_radius;
    if (!(h > sys.xi.norm() / sys.mu))
      throw ConstraintViolation("projection radius must exceed ||xi||/mu");
    sys.h_radius = h;
    sys.tau = tau_const(gamma, r_max, fs.phi_v_max, fs.phi_u_max, h);
    if (opts.zeta)
      sys.tau_check = tau_check_const(gamma, r_max, fs.phi_v_max,
                                      fs.phi_u_max, *opts.zeta, h);
  }
  return sys;
}

// --- sampled update matrices --------------------------------------------

// phi_t = (phi_v(s_t) ; r_t phi_u(s_t))
inline Vector make_phi_t(const FeatureSet& fs, const Transition& tr) {
  Vector phi(2 * fs.q);
  phi.head(fs.q) = fs.fv(tr.s);
  phi.tail(fs.q) = tr.r * fs.fu(tr.s);
  return phi;
}

// M_t with blocks A_t, 0 ; C_t, B_t built from one transition.
inline Matrix make_m_t(const FeatureSet& fs, const Transition& tr,
                       double gamma) {
  const int q = fs.q;
  const Vector fv_s = fs.fv(tr.s), fv_n = fs.fv(tr.s_next);
  const Vector fu_s = fs.fu(tr.s), fu_n = fs.fu(tr.s_next);
  Matrix m = Matrix::Zero(2 * q, 2 * q);
  m.topLeftCorner(q, q) =
      fv_s * fv_s.transpose() - gamma * fv_s * fv_n.transpose();
  m.bottomLeftCorner(q, q) = -2.0 * gamma * tr.r * fu_s * fv_n.transpose();
  m.bottomRightCorner(q, q) =
      fu_s * fu_s.transpose() - gamma * gamma * fu_s * fu_n.transpose();
  return m;
}

// Exact E[M_t' M_t] under the i.i.d. observation model, summed over
// chi(s) pi(a|s) P^pi(s, s') with the reward action independent of s'.
inline Matrix expected_mtm(const Mdp& mdp, const TabularPolicy& policy,
                           const OnPolicyChain& chain, const FeatureSet& fs,
                           double gamma) {
  const int n = mdp.num_states;
  Matrix acc = Matrix::Zero(2 * fs.q, 2 * fs.q);
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < mdp.num_actions; ++a) {
      const double pa = chain.chi[s] * policy.probs(s, a);
      if (pa <= 0.0) continue;
      for (int sn = 0; sn < n; ++sn) {
        const double w = pa * chain.p_pi(s, sn);
        if (w <= 0.0) continue;
        Transition tr{s, a, mdp.rewards(s, a), sn};
        const Matrix mt = make_m_t(fs, tr, gamma);
        acc += w * (mt.transpose() * mt);
      }
    }
  return acc;
}

// lambda_max of E[(I - beta M_t)'(I - beta M_t)], evaluated exactly; the
// mean-square contraction factor of one TD step.
inline double mean_square_contraction(const Mdp& mdp,
                                      const TabularPolicy& policy,
                                      const OnPolicyChain& chain,
                                      const FeatureSet& fs, double gamma,
                                      double beta, const Matrix& m_mat) {
  const Matrix emtm = expected_mtm(mdp, policy, chain, fs, gamma);
  const Matrix sym = m_mat + m_mat.transpose();
  const Matrix q = Matrix::Identity(m_mat.rows(), m_mat.cols()) -
                   beta * sym + beta * beta * emtm;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (q + q.transpose()));
  return es.eigenvalues().maxCoeff();
}

struct SampledContraction {
  double lambda_max = 0.0;  // lambda_max of the sample mean of Q_t
  double se = 0.0;          // delta-method standard error along the top
                            // eigenvector
  double exact_lambda_max = 0.0;  // lambda_max of E[Q_t], computed exactly
};

// Sample mean of Q_t = (I - beta M_t)'(I - beta M_t) over n i.i.d.
// transitions, with the standard error of the top Rayleigh quotient.
inline SampledContraction sampled_contraction(
    const Mdp& mdp, const TabularPolicy& policy, const OnPolicyChain& chain,
    const FeatureSet& fs, double gamma, double beta, long n,
    std::uint64_t seed) {
  const int dim = 2 * fs.q;
  const Matrix eye = Matrix::Identity(dim, dim);
  Matrix mean = Matrix::Zero(dim, dim);
  {
    Rng rng(seed);
    for (long i = 0; i < n; ++i) {
      const Transition tr = sample_iid_transition(mdp, policy, chain, rng);
      const Matrix step = eye - beta * make_m_t(fs, tr, gamma);
      mean += step.transpose() * step;
    }
    mean /= static_cast<double>(n);
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (mean + mean.transpose()));
  SampledContraction out;
  out.lambda_max = es.eigenvalues().maxCoeff();
  int top;
  es.eigenvalues().maxCoeff(&top);
  const Vector v = es.eigenvectors().col(top);

  // Second pass over the same stream for the Rayleigh-quotient spread.
  double mean_r = 0.0, sq_r = 0.0;
  {
    Rng rng(seed);
    for (long i = 0; i < n; ++i) {
      const Transition tr = sample_iid_transition(mdp, policy, chain, rng);
      const Vector step_v = v - beta * (make_m_t(fs, tr, gamma) * v);
      const double r = step_v.squaredNorm();
      mean_r += r;
      sq_r += r * r;
    }
  }
  mean_r /= n;
  const double var = std::max(0.0, (sq_r / n - mean_r * mean_r)) *
                     (static_cast<double>(n) / (n - 1));
  out.se = std::sqrt(var / n);

  const Matrix emtm = expected_mtm(mdp, policy, chain, fs, gamma);
  auto [m_mat, xi] = assemble_system(chain, fs, gamma);
  const Matrix exact_q = eye - beta * (m_mat + m_mat.transpose()) +
                         beta * beta * emtm;
  Eigen::SelfAdjointEigenSolver<Matrix> es2(
      0.5 * (exact_q + exact_q.transpose()));
  out.exact_lambda_max = es2.eigenvalues().maxCoeff();
  return out;
}

// --- theorem bound evaluators --------------------------------------------

enum class Bound { T1_last, T2_tail, T3_reg, T4_highprob, T5_reg_highprob };

// The regularized tail-average bound circulates in two forms: one with rate
// mu and coefficients 5 plus an iota^4 drift term (measured against w_bar),
// and one with rate 2 mu + zeta and coefficients 10 (against w_bar_reg).
// Both are implemented; callers pick.
enum class Theorem3Form { mu_rate, shifted_rate };

struct BoundParams {
  long t = 0;
  long k = 0;
  double beta = 0.0;
  std::optional<double> zeta;
  std::optional<double> delta;
  double init_err_sq = 0.0;    // E||z_0||^2 (T1-T3)
  double init_err_norm = 0.0;  // E||z_0||   (T4-T5)
  Theorem3Form t3_form = Theorem3Form::mu_rate;
};

inline double theorem_bound(Bound which, const CriticSystem& sys,
                            const BoundParams& p) {
  const double mu = sys.mu;
  const double eps = 1e-12;
  const double N = static_cast<double>(p.t - p.k);
  switch (which) {
    case Bound::T1_last: {
      if (p.beta > sys.beta_max * (1.0 + eps))
        throw StepSizeTooLarge("beta exceeds mu/c");
      return 2.0 * std::exp(-p.beta * mu * p.t) * p.init_err_sq +
             2.0 * p.beta * sys.sigma_sq / mu;
    }
    case Bound::T2_tail: {
      if (p.beta > sys.beta_max * (1.0 + eps))
        throw StepSizeTooLarge("beta exceeds mu/c");
      if (N <= 0) throw ConstraintViolation("need k < t");
      return 10.0 * std::exp(-p.k * p.beta * mu) /
                 (p.beta * p.beta * mu * mu * N * N) * p.init_err_sq +
             10.0 * sys.sigma_sq / (mu * mu * N);
    }
    case Bound::T3_reg: {
      if (!p.zeta) throw ConstraintViolation("T3 requires zeta");
      if (N <= 0) throw ConstraintViolation("need k < t");
      const double zeta = *p.zeta;
      const double c_check = step_size_c_check(sys.gamma, sys.r_max,
                                               sys.phi_v_max, sys.phi_u_max,
                                               zeta);
      if (p.beta > zeta / c_check * (1.0 + eps))
        throw StepSizeTooLarge("beta exceeds zeta/c_check");
      const Vector w_reg = regularized_fixed_point(sys.m_mat, sys.xi, zeta);
      const double sigma_check_sq =
          sigma_check_sq_const(sys.gamma, sys.r_max, sys.phi_v_max,
                               sys.phi_u_max, zeta, w_reg.squaredNorm());
      if (p.t3_form == Theorem3Form::mu_rate) {
        const double iota4 = sys.iota * sys.iota * sys.iota * sys.iota;
        return 5.0 * std::exp(-p.k * p.beta * mu) /
                   (p.beta * p.beta * mu * mu * N * N) * p.init_err_sq +
               5.0 * sigma_check_sq / (mu * mu * N) +
               2.0 * reward_noise_term(sys.r_max, sys.phi_v_max,
                                       sys.phi_u_max) /
                   (iota4 * N);
      }
      const double rate = 2.0 * mu + zeta;
      return 10.0 * std::exp(-p.k * p.beta * rate) /
                 (p.beta * p.beta * rate * rate * N * N) * p.init_err_sq +
             10.0 * sigma_check_sq / (rate * rate * N);
    }
    case Bound::T4_highprob: {
      if (p.beta > sys.beta_max * (1.0 + eps))
        throw StepSizeTooLarge("beta exceeds mu/c");
      if (!sys.h_radius || !sys.tau)
        throw MissingProjectionRadius("T4 requires a projection radius");
      if (!p.delta) throw ConstraintViolation("T4 requires delta");
      if (N <= 0) throw ConstraintViolation("need k < t");
      const double tau = *sys.tau;
      return 2.0 * tau / (mu * std::sqrt(N)) *
                 std::sqrt(std::log(1.0 / *p.delta)) +
             4.0 * std::exp(-p.k * p.beta * mu) / (p.beta * mu * N) *
                 p.init_err_norm +
             4.0 * tau / (mu * std::sqrt(N));
    }
    case Bound::T5_reg_highprob: {
      if (!p.zeta) throw ConstraintViolation("T5 requires zeta");
      if (!sys.h_radius)
        throw MissingProjectionRadius("T5 requires a projection radius");
      if (!p.delta) throw ConstraintViolation("T5 requires delta");
      if (N <= 0) throw ConstraintViolation("need k < t");
      const double zeta = *p.zeta;
      const double c_check = step_size_c_check(sys.gamma, sys.r_max,
                                               sys.phi_v_max, sys.phi_u_max,
                                               zeta);
      if (p.beta > zeta / c_check * (1.0 + eps))
        throw StepSizeTooLarge("beta exceeds zeta/c_check");
      const double tau_check =
          tau_check_const(sys.gamma, sys.r_max, sys.phi_v_max, sys.phi_u_max,
                          zeta, *sys.h_radius);
      const double rate = 2.0 * mu + zeta;
      return 2.0 * tau_check / (rate * std::sqrt(N)) *
                 std::sqrt(std::log(1.0 / *p.delta)) +
             4.0 * std::exp(-p.k * p.beta * rate) / (p.beta * rate * N) *
                 p.init_err_norm +
             4.0 * tau_check / (rate * std::sqrt(N));
    }
  }
  throw ConstraintViolation("unknown bound selector");
}

}  // namespace mvtd
