#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "mvtd/errors.hpp"
#include "mvtd/rng.hpp"

namespace mvtd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Finite MDP. transitions[a](s, s') is the probability of moving to s'
// when action a is taken in state s; rewards(s, a) is deterministic given
// the state-action pair, with |r(s,a)| <= r_max.
struct Mdp {
  int num_states = 0;
  int num_actions = 0;
  std::vector<Matrix> transitions;  // one |S|x|S| matrix per action
  Matrix rewards;                   // |S|x|A|
  double gamma = 0.0;
  double r_max = std::numeric_limits<double>::quiet_NaN();
};

struct TabularPolicy {
  Matrix probs;  // |S|x|A|, rows sum to 1
};

// Quantities induced by a fixed policy: the on-policy transition matrix,
// its stationary distribution and the reward vectors entering the joint
// value/square-value linear system.
struct OnPolicyChain {
  Matrix p_pi;     // |S|x|S|
  Vector chi;      // stationary distribution, entrywise > 0
  Vector r_vec;    // r(s) = sum_a pi(a|s) r(s,a)
  Vector r_tilde;  // r~(s) = sum_a pi(a|s) r(s,a)^2

  Eigen::DiagonalMatrix<double, Eigen::Dynamic> statdist() const {
    return chi.asDiagonal();
  }
  Eigen::DiagonalMatrix<double, Eigen::Dynamic> d_r() const {
    return r_vec.asDiagonal();
  }
};

struct Transition {
  int s = 0;
  int a = 0;
  double r = 0.0;
  int s_next = 0;
};

inline Mdp validate_mdp(Mdp raw) {
  if (raw.num_states < 1 || raw.num_actions < 1)
    throw DimensionMismatch("num_states and num_actions must be positive");
  if (static_cast<int>(raw.transitions.size()) != raw.num_actions)
    throw DimensionMismatch("transitions must hold one matrix per action");
  if (raw.rewards.rows() != raw.num_states ||
      raw.rewards.cols() != raw.num_actions)
    throw DimensionMismatch("rewards table has wrong shape");
  if (!(raw.gamma > 0.0 && raw.gamma < 1.0))
    throw GammaOutOfRange("gamma must lie in (0,1), got " +
                          std::to_string(raw.gamma));
  for (int a = 0; a < raw.num_actions; ++a) {
    const Matrix& P = raw.transitions[a];
    if (P.rows() != raw.num_states || P.cols() != raw.num_states)
      throw DimensionMismatch("transition matrix has wrong shape");
    for (int s = 0; s < raw.num_states; ++s) {
      if (P.row(s).minCoeff() < 0.0)
        throw NegativeProbability("P(.|s=" + std::to_string(s) +
                                  ",a=" + std::to_string(a) + ")");
      const double row_sum = P.row(s).sum();
      if (std::abs(row_sum - 1.0) > 1e-9)
        throw NonStochasticRow("row sum " + std::to_string(row_sum) +
                               " at (s=" + std::to_string(s) +
                               ",a=" + std::to_string(a) + ")");
    }
  }
  const double max_abs_r = raw.rewards.cwiseAbs().maxCoeff();
  if (std::isnan(raw.r_max)) {
    raw.r_max = max_abs_r;
  } else if (raw.r_max + 1e-12 < max_abs_r) {
    throw ConstraintViolation("r_max smaller than max |r(s,a)|");
  }
  return raw;
}

// P^pi, stationary distribution and reward vectors for a fixed policy.
// chi solves chi' P^pi = chi' with sum(chi)=1, via a least-squares solve of
// the augmented system [(P^pi)' - I; 1'] x = [0; 1].
inline OnPolicyChain induced_chain(const Mdp& mdp, const TabularPolicy& policy) {
  const int n = mdp.num_states;
  if (policy.probs.rows() != n || policy.probs.cols() != mdp.num_actions)
    throw DimensionMismatch("policy table has wrong shape");
  for (int s = 0; s < n; ++s) {
    if (policy.probs.row(s).minCoeff() < 0.0)
      throw NegativeProbability("pi(.|s=" + std::to_string(s) + ")");
    if (std::abs(policy.probs.row(s).sum() - 1.0) > 1e-9)
      throw NonStochasticRow("policy row " + std::to_string(s));
  }

  OnPolicyChain chain;
  chain.p_pi = Matrix::Zero(n, n);
  for (int a = 0; a < mdp.num_actions; ++a)
    chain.p_pi += policy.probs.col(a).asDiagonal() * mdp.transitions[a];

  Matrix aug(n + 1, n);
  aug.topRows(n) = chain.p_pi.transpose() - Matrix::Identity(n, n);
  aug.bottomRows(1).setOnes();
  Vector rhs = Vector::Zero(n + 1);
  rhs[n] = 1.0;
  Vector chi = aug.colPivHouseholderQr().solve(rhs);

  if (chi.minCoeff() < 1e-12)
    throw NotIrreducible("stationary distribution is not strictly positive");
  chi /= chi.sum();
  if ((chain.p_pi.transpose() * chi - chi).cwiseAbs().maxCoeff() > 1e-10)
    throw NotIrreducible("no stationary solution to requested accuracy");
  chain.chi = chi;

  chain.r_vec = (policy.probs.array() * mdp.rewards.array()).rowwise().sum();
  chain.r_tilde =
      (policy.probs.array() * mdp.rewards.array().square()).rowwise().sum();
  return chain;
}

// V = (I - gamma P^pi)^{-1} r, the fixed point of T1(V) = r + gamma P^pi V.
inline Vector exact_value(const OnPolicyChain& chain, double gamma) {
  const int n = static_cast<int>(chain.p_pi.rows());
  const Matrix A = Matrix::Identity(n, n) - gamma * chain.p_pi;
  Vector v = A.partialPivLu().solve(chain.r_vec);
  if ((v - chain.r_vec - gamma * chain.p_pi * v).cwiseAbs().maxCoeff() > 1e-10)
    throw SingularSystem("Bellman residual too large for T1 solve");
  return v;
}

// U = (I - gamma^2 P^pi)^{-1}(r~ + 2 gamma D_R P^pi V), the fixed point of
// T2(U) = r~ + 2 gamma D_R P^pi V + gamma^2 P^pi U.
inline Vector exact_square_value(const OnPolicyChain& chain, double gamma,
                                 const Vector& v) {
  const int n = static_cast<int>(chain.p_pi.rows());
  const Matrix A = Matrix::Identity(n, n) - gamma * gamma * chain.p_pi;
  const Vector b = chain.r_tilde + 2.0 * gamma * (chain.d_r() * (chain.p_pi * v));
  Vector u = A.partialPivLu().solve(b);
  if ((u - b - gamma * gamma * chain.p_pi * u).cwiseAbs().maxCoeff() > 1e-10)
    throw SingularSystem("Bellman residual too large for T2 solve");
  return u;
}

// Return variance Lambda = U - V.^2, clipped at zero; entries below -1e-10
// indicate an inconsistent (V, U) pair.
inline Vector variance_of(const Vector& v, const Vector& u) {
  Vector lam = u - v.cwiseProduct(v);
  if (lam.minCoeff() < -1e-10)
    throw ConstraintViolation("square-value below squared value");
  return lam.cwiseMax(0.0);
}

// One observation of the i.i.d. model: (s, s') ~ chi(s) P^pi(s, s'), with the
// reward action a ~ pi(.|s) drawn independently of s'. The decoupling is what
// makes E[M_t] equal the assembled M: conditioning s' on the reward action
// would correlate the C_t block with r_t whenever rewards and transitions
// both vary with the action.
inline Transition sample_iid_transition(const Mdp& mdp,
                                        const TabularPolicy& policy,
                                        const OnPolicyChain& chain, Rng& rng) {
  Transition tr;
  tr.s = rng.categorical(chain.chi);
  tr.a = rng.categorical_row(policy.probs, tr.s);
  tr.s_next = rng.categorical_row(chain.p_pi, tr.s);
  tr.r = mdp.rewards(tr.s, tr.a);
  return tr;
}

inline TabularPolicy uniform_policy(const Mdp& mdp) {
  TabularPolicy pi;
  pi.probs = Matrix::Constant(mdp.num_states, mdp.num_actions,
                              1.0 / mdp.num_actions);
  return pi;
}

// Chain MDP: action 0 moves left, action 1 moves right, positions clamp at
// the ends; the move direction flips with probability `slip`. Rewards grow
// towards the right end for the "right" action and are a small negative
// constant for "left".
inline Mdp make_chain_mdp(int length, double slip, double gamma) {
  if (length < 1) throw ConstraintViolation("chain length must be >= 1");
  if (slip < 0.0 || slip > 1.0)
    throw ConstraintViolation("slip must lie in [0,1]");
  Mdp m;
  m.num_states = length;
  m.num_actions = 2;
  m.gamma = gamma;
  m.transitions.assign(2, Matrix::Zero(length, length));
  m.rewards = Matrix::Zero(length, 2);
  for (int s = 0; s < length; ++s) {
    const int left = std::max(s - 1, 0);
    const int right = std::min(s + 1, length - 1);
    m.transitions[0](s, left) += 1.0 - slip;
    m.transitions[0](s, right) += slip;
    m.transitions[1](s, right) += 1.0 - slip;
    m.transitions[1](s, left) += slip;
    m.rewards(s, 0) = -0.2;
    m.rewards(s, 1) = length > 1 ? static_cast<double>(s) / (length - 1) : 1.0;
  }
  m.r_max = 1.0;
  return validate_mdp(std::move(m));
}

// Garnet MDP: for every (s,a), `branching` distinct successor states get
// uniformly-normalized random probabilities; rewards are uniform in
// [-r_max, r_max]. Irreducibility is checked under the uniform policy.
inline Mdp make_garnet_mdp(int num_states, int num_actions, int branching,
                           double gamma, double r_max, Rng& rng) {
  if (branching < 1 || branching > num_states)
    throw ConstraintViolation("branching must lie in [1, num_states]");
  Mdp m;
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.gamma = gamma;
  m.r_max = r_max;
  m.transitions.assign(num_actions, Matrix::Zero(num_states, num_states));
  m.rewards = Matrix::Zero(num_states, num_actions);
  std::vector<int> perm(num_states);
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      for (int i = 0; i < num_states; ++i) perm[i] = i;
      // Fisher-Yates prefix of size `branching`
      for (int i = 0; i < branching; ++i) {
        const int j =
            i + static_cast<int>(rng.uniform() * (num_states - i));
        std::swap(perm[i], perm[std::min(j, num_states - 1)]);
      }
      Vector w(branching);
      for (int i = 0; i < branching; ++i) w[i] = rng.uniform() + 1e-6;
      w /= w.sum();
      for (int i = 0; i < branching; ++i)
        m.transitions[a](s, perm[i]) = w[i];
      m.rewards(s, a) = (2.0 * rng.uniform() - 1.0) * r_max;
    }
  }
  Mdp out = validate_mdp(std::move(m));
  induced_chain(out, uniform_policy(out));  // throws NotIrreducible if not
  return out;
}

}  // namespace mvtd
