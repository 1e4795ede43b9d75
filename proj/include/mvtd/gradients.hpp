#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "mvtd/errors.hpp"
#include "mvtd/mdp.hpp"

namespace mvtd {

// Softmax policy pi_theta(a|s) proportional to exp(theta' x(s,a)) over a
// table of action features x(s,a) in R^d.
struct SoftmaxPolicy {
  Vector theta;
  std::vector<Matrix> action_features;  // per state: |A| x d

  int dim() const { return static_cast<int>(theta.size()); }
  int num_states() const { return static_cast<int>(action_features.size()); }
  int num_actions() const {
    return static_cast<int>(action_features.front().rows());
  }

  TabularPolicy probs() const {
    const int n = num_states(), na = num_actions();
    TabularPolicy tab;
    tab.probs = Matrix::Zero(n, na);
    for (int s = 0; s < n; ++s) {
      Vector logits = action_features[s] * theta;
      const double m = logits.maxCoeff();
      Vector e = (logits.array() - m).exp();
      tab.probs.row(s) = (e / e.sum()).transpose();
    }
    return tab;
  }

  SoftmaxPolicy with_theta(const Vector& new_theta) const {
    SoftmaxPolicy out = *this;
    out.theta = new_theta;
    return out;
  }
};

// psi_theta(s,a) = grad log pi_theta(a|s) = x(s,a) - sum_b pi(b|s) x(s,b)
inline Vector score(const SoftmaxPolicy& policy, int s, int a) {
  const Matrix& x = policy.action_features[s];
  Vector logits = x * policy.theta;
  const double m = logits.maxCoeff();
  Vector p = (logits.array() - m).exp();
  p /= p.sum();
  return x.row(a).transpose() - x.transpose() * p;
}

// gamma-discounted state visitation from s0, normalized:
// nu = (1 - disc) (I - disc P')^{-1} e_{s0}
inline Vector discounted_visitation(const Matrix& p_pi, double disc, int s0) {
  const int n = static_cast<int>(p_pi.rows());
  const Matrix A = Matrix::Identity(n, n) - disc * p_pi.transpose();
  Vector e = Vector::Zero(n);
  e[s0] = 1.0 - disc;
  return A.partialPivLu().solve(e);
}

// Action-value Q(s,a) = r(s,a) + g sum_{s'} P(s'|s,a) V(s').
inline Matrix action_values(const Mdp& mdp, const Vector& v) {
  Matrix q(mdp.num_states, mdp.num_actions);
  for (int a = 0; a < mdp.num_actions; ++a)
    q.col(a) = mdp.rewards.col(a) + mdp.gamma * mdp.transitions[a] * v;
  return q;
}

// W(s,a) = r^2 + 2 g r sum P V + g^2 sum P U, the action-value of the
// square-value function.
inline Matrix square_action_values(const Mdp& mdp, const Vector& v,
                                   const Vector& u) {
  Matrix w(mdp.num_states, mdp.num_actions);
  for (int a = 0; a < mdp.num_actions; ++a) {
    const Vector pv = mdp.transitions[a] * v;
    const Vector pu = mdp.transitions[a] * u;
    w.col(a) = mdp.rewards.col(a).array().square().matrix() +
               2.0 * mdp.gamma * mdp.rewards.col(a).cwiseProduct(pv) +
               mdp.gamma * mdp.gamma * pu;
  }
  return w;
}

namespace detail {

// g(s) = sum_a pi(a|s) psi(s,a) Q(s,a), stacked as an |S| x d matrix.
inline Matrix score_weighted_table(const SoftmaxPolicy& policy,
                                   const TabularPolicy& tab,
                                   const Matrix& values) {
  const int n = policy.num_states(), d = policy.dim();
  Matrix g = Matrix::Zero(n, d);
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < policy.num_actions(); ++a)
      g.row(s) +=
          tab.probs(s, a) * values(s, a) * score(policy, s, a).transpose();
  return g;
}

}  // namespace detail

// Policy-gradient oracle: grad J(theta) = (1/(1-g)) sum_s nu(s) g(s) with
// the gamma-discounted visitation nu from s0.
inline Vector exact_grad_j(const Mdp& mdp, const SoftmaxPolicy& policy,
                           int s0) {
  const TabularPolicy tab = policy.probs();
  const OnPolicyChain chain = induced_chain(mdp, tab);
  const Vector v = exact_value(chain, mdp.gamma);
  const Matrix q = action_values(mdp, v);
  const Matrix g = detail::score_weighted_table(policy, tab, q);
  const Vector nu = discounted_visitation(chain.p_pi, mdp.gamma, s0);
  return g.transpose() * nu / (1.0 - mdp.gamma);
}

// grad V(s) for every start state s, via one linear solve:
// grad V = (I - g P^pi)^{-1} G with G(s) = sum_a pi psi Q.
inline Matrix exact_grad_v_all(const Mdp& mdp, const SoftmaxPolicy& policy) {
  const TabularPolicy tab = policy.probs();
  const OnPolicyChain chain = induced_chain(mdp, tab);
  const Vector v = exact_value(chain, mdp.gamma);
  const Matrix q = action_values(mdp, v);
  const Matrix g = detail::score_weighted_table(policy, tab, q);
  const int n = mdp.num_states;
  const Matrix A = Matrix::Identity(n, n) - mdp.gamma * chain.p_pi;
  return A.partialPivLu().solve(g);
}

// Square-value policy gradient: with nu~ the gamma^2-discounted state-action
// visitation from s0,
//   grad U = 1/(1-g^2) [ sum_{s,a} nu~(s,a) psi(s,a) W(s,a)
//            + 2g sum_{s,a,s'} nu~(s,a) r(s,a) P(s'|s,a) grad V(s') ].
inline Vector exact_grad_u(const Mdp& mdp, const SoftmaxPolicy& policy,
                           int s0) {
  const TabularPolicy tab = policy.probs();
  const OnPolicyChain chain = induced_chain(mdp, tab);
  const Vector v = exact_value(chain, mdp.gamma);
  const Vector u = exact_square_value(chain, mdp.gamma, v);
  const Matrix w = square_action_values(mdp, v, u);
  const Matrix grad_v = exact_grad_v_all(mdp, policy);

  const double g2 = mdp.gamma * mdp.gamma;
  const Vector nu = discounted_visitation(chain.p_pi, g2, s0);

  const int d = policy.dim();
  Vector t1 = Vector::Zero(d), t2 = Vector::Zero(d);
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      const double weight = nu[s] * tab.probs(s, a);
      if (weight == 0.0) continue;
      t1 += weight * w(s, a) * score(policy, s, a);
      const Vector pv_grad =
          grad_v.transpose() * mdp.transitions[a].row(s).transpose();
      t2 += weight * mdp.rewards(s, a) * pv_grad;
    }
  }
  return (t1 + 2.0 * mdp.gamma * t2) / (1.0 - g2);
}

// grad L = -grad J + lambda (grad U - 2 J grad J)
inline Vector grad_lagrangian(double j, const Vector& grad_j,
                              const Vector& grad_u, double lambda) {
  if (grad_j.size() != grad_u.size())
    throw DimensionMismatch("gradient dimensions differ");
  return -grad_j + lambda * (grad_u - 2.0 * j * grad_j);
}

struct GradientBundle {
  double j = 0.0;
  double u = 0.0;
  Vector grad_j;
  Vector grad_u;
  Vector grad_l;
  double lambda = 0.0;
  double variance_threshold = 0.0;  // enters L only as a constant offset
  double lagrangian = 0.0;          // -J + lambda (U - J^2 - c)
};

inline GradientBundle make_gradient_bundle(const Mdp& mdp,
                                           const SoftmaxPolicy& policy,
                                           int s0, double lambda, double c) {
  const TabularPolicy tab = policy.probs();
  const OnPolicyChain chain = induced_chain(mdp, tab);
  const Vector v = exact_value(chain, mdp.gamma);
  const Vector u = exact_square_value(chain, mdp.gamma, v);
  GradientBundle b;
  b.j = v[s0];
  b.u = u[s0];
  b.grad_j = exact_grad_j(mdp, policy, s0);
  b.grad_u = exact_grad_u(mdp, policy, s0);
  b.lambda = lambda;
  b.variance_threshold = c;
  b.grad_l = grad_lagrangian(b.j, b.grad_j, b.grad_u, lambda);
  b.lagrangian = -b.j + lambda * (b.u - b.j * b.j - c);
  return b;
}

// --- smoothness constants -------------------------------------------------

struct SmoothnessConstants {
  double c_psi = 0.0;
  double l_psi = 0.0;
  double c_pi = 0.0;
  double kappa = 0.0;
  double rho = 0.0;
  double c_nu = 0.0;
  double l_j = 0.0;
  double l_u = 0.0;
  double l_o = 0.0;
  double k1 = 0.0;
  double c1 = 0.0;            // Lagrangian range, 2R/(1-g) (1 + lambda R/(1-g))
  double grad_j_bound = 0.0;  // R C_psi / (1-g)^2
  double grad_u_bound = 0.0;
};

// Two published forms of C_nu exist; the `half` flag selects the one with
// the 1/2 prefactor (default), the other drops it.
enum class CnuForm { half, plain };

inline SmoothnessConstants lipschitz_constants(double r_max, double gamma,
                                               double c_psi, double l_psi,
                                               double c_pi, double kappa,
                                               double rho, double lambda,
                                               CnuForm form = CnuForm::half) {
  if (!(rho > 0.0 && rho < 1.0))
    throw InvalidMixingConstants("rho must lie in (0,1)");
  if (!(kappa > 0.0)) throw InvalidMixingConstants("kappa must be positive");
  if (!(r_max > 0.0))
    throw InvalidMixingConstants("r_max must be positive (L_U divides by it)");

  SmoothnessConstants sc;
  sc.c_psi = c_psi;
  sc.l_psi = l_psi;
  sc.c_pi = c_pi;
  sc.kappa = kappa;
  sc.rho = rho;

  const double log_term = std::ceil(std::log(1.0 / kappa) / std::log(rho));
  const double prefactor = form == CnuForm::half ? 0.5 : 1.0;
  sc.c_nu = prefactor * c_pi * (1.0 + log_term + 1.0 / (1.0 - rho));

  const double og = 1.0 - gamma;
  const double og2 = 1.0 - gamma * gamma;
  sc.l_j = r_max / og * (4.0 * sc.c_nu * c_psi + l_psi);
  sc.l_u = 1.0 / og2 *
           (r_max * r_max / (og * og) *
                (l_psi + 4.0 * c_psi * sc.c_nu * (1.0 + gamma / r_max)) +
            2.0 * sc.l_j);
  const double gj = r_max * c_psi / (og * og);
  sc.l_o = sc.l_j * (1.0 + 2.0 * lambda * r_max / (og * og) +
                     2.0 * lambda * gj * gj) +
           lambda * sc.l_u;
  sc.grad_j_bound = gj;
  sc.grad_u_bound = c_psi * r_max / (og2 * og * og) +
                    2.0 * gamma * r_max * c_psi / (og2 * og * og);
  sc.k1 = gj + 2.0 * lambda * r_max * c_psi / (og * og * og) +
          lambda * sc.grad_u_bound;
  sc.c1 = 2.0 * r_max / og * (1.0 + lambda * r_max / og);
  return sc;
}

// Closed-form score bounds for softmax policies over action features:
// with X = max ||x(s,a)||, C_psi = 2X, L_psi = 2X^2 and C_pi = X
// (total variation with the 1/2 convention).
struct SoftmaxBounds {
  double c_psi;
  double l_psi;
  double c_pi;
};

inline SoftmaxBounds softmax_feature_bounds(
    const std::vector<Matrix>& action_features) {
  double x_max = 0.0;
  for (const Matrix& x : action_features)
    x_max = std::max(x_max, x.rowwise().norm().maxCoeff());
  return {2.0 * x_max, 2.0 * x_max * x_max, x_max};
}

// Central finite differences, (f(theta + h e_i) - f(theta - h e_i)) / (2h).
inline Vector finite_difference(const std::function<double(const Vector&)>& f,
                                const Vector& theta, double h) {
  if (!(h > 0.0)) throw ConstraintViolation("h must be positive");
  Vector g(theta.size());
  Vector probe = theta;
  for (int i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    const double fp = f(probe);
    probe[i] = theta[i] - h;
    const double fm = f(probe);
    probe[i] = theta[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Exact J(theta) = V(s0) and U(theta) = U(s0) for finite-difference oracles.
inline double exact_j_of(const Mdp& mdp, const SoftmaxPolicy& policy, int s0) {
  const OnPolicyChain chain = induced_chain(mdp, policy.probs());
  return exact_value(chain, mdp.gamma)[s0];
}

inline double exact_u_of(const Mdp& mdp, const SoftmaxPolicy& policy, int s0) {
  const OnPolicyChain chain = induced_chain(mdp, policy.probs());
  const Vector v = exact_value(chain, mdp.gamma);
  return exact_square_value(chain, mdp.gamma, v)[s0];
}

}  // namespace mvtd
