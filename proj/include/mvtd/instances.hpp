#pragma once

#include "mvtd/gradients.hpp"
#include "mvtd/mdp.hpp"

namespace mvtd {
namespace instances {

// 1 state, 1 action, r = 1, gamma = 0.5. V = 2, U = 4; with identity
// features M = [[0.5, 0], [-1, 0.75]], xi = (1, 1).
inline Mdp one_state() {
  Mdp m;
  m.num_states = 1;
  m.num_actions = 1;
  m.transitions = {Matrix::Ones(1, 1)};
  m.rewards = Matrix::Ones(1, 1);
  m.gamma = 0.5;
  m.r_max = 1.0;
  return validate_mdp(std::move(m));
}

// Deterministic 2-cycle with rewards (1, 0), gamma = 0.5.
// V = (4/3, 2/3), U = (16/9, 4/9), both returns deterministic.
inline Mdp two_cycle() {
  Mdp m;
  m.num_states = 2;
  m.num_actions = 1;
  Matrix p(2, 2);
  p << 0, 1, 1, 0;
  m.transitions = {p};
  m.rewards = Matrix::Zero(2, 1);
  m.rewards(0, 0) = 1.0;
  m.gamma = 0.5;
  m.r_max = 1.0;
  return validate_mdp(std::move(m));
}

// The 5-state chain used throughout the verification suites.
inline Mdp chain5() { return make_chain_mdp(5, 0.1, 0.5); }

// Low-discount copy of the chain for the universal-step-size experiments,
// where the bias-forgetting exponent mu sqrt(N) / c_check must be large
// enough within the measured horizon.
inline Mdp chain5_low_gamma() { return make_chain_mdp(5, 0.1, 0.15); }

// Reference actor instance: a win/loss gamble with state-only rewards
// (hub 0.1, win +1, loss -1). Action 0 ("safe") stays at the hub; action 1
// ("risky") moves to the win state with probability 0.65 and to the loss
// state otherwise, then both outcome states fall back to the hub. The risky
// action has the higher mean and a much higher return variance, and the
// Lagrangian optima for lambda in {0, 0.5, 2} sit at clearly separated
// risky-probabilities with Lambda(s0) near {0.47, 0.16, 0.0}. The critic is
// mean-square stable at beta = 0.3 for every policy in this family.
inline Mdp ref2() {
  Mdp m;
  m.num_states = 3;
  m.num_actions = 2;
  Matrix p_safe(3, 3), p_risky(3, 3);
  p_safe << 1.0, 0.0, 0.0,
            1.0, 0.0, 0.0,
            1.0, 0.0, 0.0;
  p_risky << 0.0, 0.65, 0.35,
             1.0, 0.0, 0.0,
             1.0, 0.0, 0.0;
  m.transitions = {p_safe, p_risky};
  m.rewards = Matrix::Zero(3, 2);
  m.rewards.row(0).setConstant(0.1);
  m.rewards.row(1).setConstant(1.0);
  m.rewards.row(2).setConstant(-1.0);
  m.gamma = 0.65;
  m.r_max = 1.0;
  return validate_mdp(std::move(m));
}

// Softmax policy over ref2 with shared one-hot action features, d = 2.
inline SoftmaxPolicy ref2_softmax(const Vector& theta) {
  SoftmaxPolicy pol;
  pol.theta = theta;
  Matrix x = Matrix::Identity(2, 2);  // x(s, a) = e_a for every state
  pol.action_features = {x, x, x};
  return pol;
}

// 2-state bandit-like instance: action 1 strictly dominates in mean.
// Rewards are state-only (0.1 at the hub, 1.0 at the target).
inline Mdp bandit2() {
  Mdp m;
  m.num_states = 2;
  m.num_actions = 2;
  Matrix p_safe(2, 2), p_go(2, 2);
  p_safe << 1.0, 0.0, 1.0, 0.0;
  p_go << 0.35, 0.65, 1.0, 0.0;
  m.transitions = {p_safe, p_go};
  m.rewards = Matrix::Zero(2, 2);
  m.rewards.row(0).setConstant(0.1);
  m.rewards.row(1).setConstant(1.0);
  m.gamma = 0.6;
  m.r_max = 1.0;
  return validate_mdp(std::move(m));
}

inline SoftmaxPolicy bandit2_softmax(const Vector& theta) {
  SoftmaxPolicy pol;
  pol.theta = theta;
  Matrix x = Matrix::Identity(2, 2);
  pol.action_features = {x, x};
  return pol;
}

}  // namespace instances
}  // namespace mvtd
