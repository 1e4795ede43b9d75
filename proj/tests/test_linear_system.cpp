#include <gtest/gtest.h>

#include "mvtd/instances.hpp"
#include "mvtd/linear_system.hpp"

namespace {

using namespace mvtd;

struct TestSystem {
  Mdp mdp;
  TabularPolicy policy;
  OnPolicyChain chain;
  FeatureSet features;
};

TestSystem make_system(const Mdp& mdp) {
  TestSystem s{mdp, uniform_policy(mdp), {}, {}};
  s.chain = induced_chain(s.mdp, s.policy);
  s.features = identity_features(s.chain);
  return s;
}

// Closed-form minimum eigenvalue of the 1-state symmetric part
// [[0.5, -0.5], [-0.5, 0.75]]: (1.25 - sqrt(1.0625)) / 2.
constexpr double kOneStateMu = (1.25 - 1.0307764064044151) / 2.0;

TEST(AssembleSystem, OneStateHandAssembled) {
  const TestSystem s = make_system(instances::one_state());
  const auto [m, xi] = assemble_system(s.chain, s.features, s.mdp.gamma);
  Matrix expected(2, 2);
  expected << 0.5, 0.0, -1.0, 0.75;
  EXPECT_LT((m - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(xi[0], 1.0, 1e-12);
  EXPECT_NEAR(xi[1], 1.0, 1e-12);
}

TEST(AssembleSystem, ZeroRewardsGiveZeroXiAndFixedPoint) {
  Mdp m = instances::chain5();
  m.rewards.setZero();
  const TestSystem s = make_system(m);
  const auto [mm, xi] = assemble_system(s.chain, s.features, m.gamma);
  EXPECT_LT(xi.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT(fixed_point(mm, xi).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AssembleSystem, TopRightBlockExactlyZero) {
  const TestSystem s = make_system(instances::chain5());
  const auto [m, xi] = assemble_system(s.chain, s.features, s.mdp.gamma);
  EXPECT_EQ(m.topRightCorner(5, 5), Matrix::Zero(5, 5));
}

// M equals the Monte-Carlo average of sampled M_t, per entry within 3 SE.
TEST(AssembleSystem, MatchesSampleMeanOracle) {
  const TestSystem s = make_system(instances::chain5());
  const auto [m, xi] = assemble_system(s.chain, s.features, s.mdp.gamma);
  const int dim = static_cast<int>(m.rows());

  const long n = 1000000;
  Rng rng(2024);
  Matrix sum = Matrix::Zero(dim, dim), sumsq = Matrix::Zero(dim, dim);
  for (long i = 0; i < n; ++i) {
    const Transition tr = sample_iid_transition(s.mdp, s.policy, s.chain, rng);
    const Matrix mt = make_m_t(s.features, tr, s.mdp.gamma);
    sum += mt;
    sumsq += mt.cwiseProduct(mt);
  }
  const Matrix mean = sum / n;
  int violations = 0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      const double var =
          std::max(0.0, sumsq(i, j) / n - mean(i, j) * mean(i, j));
      const double se = std::sqrt(var / n);
      if (std::abs(mean(i, j) - m(i, j)) > 3.0 * se + 1e-12) ++violations;
    }
  // 3-sigma per entry over 100 entries: allow a couple of statistical misses.
  EXPECT_LE(violations, 2);
}

TEST(FixedPoint, SingularSystemRejected) {
  EXPECT_THROW(fixed_point(Matrix::Zero(2, 2), Vector::Ones(2)),
               SingularSystem);
}

TEST(FixedPoint, OneStateIsTwoFour) {
  const TestSystem s = make_system(instances::one_state());
  const auto [m, xi] = assemble_system(s.chain, s.features, s.mdp.gamma);
  const Vector w = fixed_point(m, xi);
  EXPECT_NEAR(w[0], 2.0, 1e-12);
  EXPECT_NEAR(w[1], 4.0, 1e-12);
}

TEST(FixedPoint, ChainIdentityFeaturesMatchExactOracles) {
  const TestSystem s = make_system(instances::chain5());
  const auto [m, xi] = assemble_system(s.chain, s.features, s.mdp.gamma);
  const Vector w = fixed_point(m, xi);
  const Vector v = exact_value(s.chain, s.mdp.gamma);
  const Vector u = exact_square_value(s.chain, s.mdp.gamma, v);
  EXPECT_LT((w.head(5) - v).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((w.tail(5) - u).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(RegularizedFixedPoint, OneStateQuarterZeta) {
  const TestSystem s = make_system(instances::one_state());
  const auto [m, xi] = assemble_system(s.chain, s.features, s.mdp.gamma);
  const Vector w = regularized_fixed_point(m, xi, 0.25);
  EXPECT_NEAR(w[0], 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(w[1], 7.0 / 3.0, 1e-12);
}

TEST(RegularizedFixedPoint, ContinuousAtZeroZeta) {
  const TestSystem s = make_system(instances::one_state());
  const auto [m, xi] = assemble_system(s.chain, s.features, s.mdp.gamma);
  const Vector w = fixed_point(m, xi);
  const Vector w_reg = regularized_fixed_point(m, xi, 1e-10);
  EXPECT_LT((w - w_reg).norm(), 1e-8);
}

TEST(RegularizedFixedPoint, DriftBoundHoldsOnRandomSystems) {
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
      EXPECT_LE((w_reg - w).norm(), drift_bound(zeta, xi.norm(), iota))
          << "seed " << seed << " zeta " << zeta;
    }
  }
}

TEST(SpectralConstants, OneStateClosedForm) {
  const TestSystem s = make_system(instances::one_state());
  const auto [m, xi] = assemble_system(s.chain, s.features, s.mdp.gamma);
  const SpectralConstants sc = spectral_constants(m);
  EXPECT_NEAR(sc.mu, kOneStateMu, 1e-12);
  EXPECT_GT(sc.iota, 0.0);
}

TEST(SpectralConstants, IdentityMatrix) {
  const SpectralConstants sc = spectral_constants(Matrix::Identity(4, 4));
  EXPECT_DOUBLE_EQ(sc.mu, 1.0);
  EXPECT_DOUBLE_EQ(sc.iota, 1.0);
}

TEST(SpectralConstants, MuNeverExceedsLambdaMax) {
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const Mdp mdp = make_garnet_mdp(5, 2, 2, 0.5, 0.5, rng);
    const auto chain = induced_chain(mdp, uniform_policy(mdp));
    const FeatureSet fs = identity_features(chain);
    const auto [m, xi] = assemble_system(chain, fs, mdp.gamma);
    const SpectralConstants sc = spectral_constants(m);
    EXPECT_LE(sc.mu, sc.lambda_max);
  }
}

TEST(SpectralConstants, NegativeMuRejected) {
  Matrix m(2, 2);
  m << -1.0, 0.0, 0.0, 1.0;
  EXPECT_THROW(spectral_constants(m), NotPositive);
}

TEST(StepSizeCeilings, HandArithmetic) {
  // Phi_v_max = Phi_u_max = R_max = 1, gamma = 0.5:
  // c = max{4 + 1, 4} + 2*0.5*(1 + 1) = 7
  EXPECT_NEAR(step_size_c(0.5, 1.0, 1.0, 1.0), 7.0, 1e-12);
  const TestSystem s = make_system(instances::one_state());
  const CriticSystem sys =
      build_critic_system(s.chain, s.features, s.mdp.gamma, s.mdp.r_max);
  EXPECT_NEAR(sys.beta_max, kOneStateMu / 7.0, 1e-12);
  EXPECT_NEAR(sys.beta_max, 0.01566, 1e-5);
}

TEST(StepSizeCeilings, VanishingDiscount) {
  EXPECT_NEAR(step_size_c(0.0, 1.0, 1.0, 1.0), 4.0, 1e-12);
}

TEST(StepSizeCeilings, UniversalCheckNeedsNoSpectralInput) {
  // c_check = zeta^2 + 2 zeta ||M||-bound + c, assembled purely from
  // (gamma, R_max, feature bounds, zeta).
  const double zeta = 0.1;
  const double expected = zeta * zeta +
                          2.0 * zeta * m_norm_bound(0.5, 1.0, 1.0, 1.0) +
                          7.0;
  EXPECT_NEAR(step_size_c_check(0.5, 1.0, 1.0, 1.0, zeta), expected, 1e-12);
  const double beta_check = zeta / expected;
  EXPECT_GT(beta_check, 0.0);
}

TEST(NoiseConstants, OneStateSigmaSq) {
  const TestSystem s = make_system(instances::one_state());
  const CriticSystem sys =
      build_critic_system(s.chain, s.features, s.mdp.gamma, s.mdp.r_max);
  // ||w_bar||^2 = 4 + 16 = 20; sigma^2 = 4 + 2*(2.25+1.5625+1)*20 = 196.5
  EXPECT_NEAR(sys.w_bar.squaredNorm(), 20.0, 1e-10);
  EXPECT_NEAR(sys.sigma_sq, 196.5, 1e-9);
}

TEST(NoiseConstants, ZeroRewardsGiveZeroSigma) {
  EXPECT_DOUBLE_EQ(sigma_sq_const(0.5, 0.0, 1.0, 1.0, 0.0), 0.0);
}

TEST(NoiseConstants, RegularizedBracketAtZeroZeta) {
  // At zeta = 0 the regularized bracket is exactly twice the plain one
  // (factor 4 vs factor 2).
  const double plain =
      sigma_sq_const(0.5, 1.0, 1.0, 1.0, 1.0) - reward_noise_term(1.0, 1.0, 1.0);
  const double reg = sigma_check_sq_const(0.5, 1.0, 1.0, 1.0, 0.0, 1.0) -
                     reward_noise_term(1.0, 1.0, 1.0);
  EXPECT_NEAR(reg, 2.0 * plain, 1e-12);
}

TEST(NoiseConstants, TauRequiresRadius) {
  const TestSystem s = make_system(instances::one_state());
  const CriticSystem sys =
      build_critic_system(s.chain, s.features, s.mdp.gamma, s.mdp.r_max);
  BoundParams p;
  p.t = 100;
  p.k = 50;
  p.beta = sys.beta_max;
  p.delta = 0.1;
  p.init_err_norm = 1.0;
  EXPECT_THROW(theorem_bound(Bound::T4_highprob, sys, p),
               MissingProjectionRadius);
}

TEST(TheoremBound, T2HandArithmetic) {
  // beta=0.01, mu=0.1, t=2000, k=1000, sigma^2=1, E||z0||^2=1:
  // 10 exp(-1) / (1e-4 * 1e-2 * 1e6) + 10 / (0.01 * 1000) = 10/e + 1.
  CriticSystem sys;
  sys.mu = 0.1;
  sys.sigma_sq = 1.0;
  sys.beta_max = 1.0;  // not binding here
  BoundParams p;
  p.t = 2000;
  p.k = 1000;
  p.beta = 0.01;
  p.init_err_sq = 1.0;
  EXPECT_NEAR(theorem_bound(Bound::T2_tail, sys, p),
              10.0 * std::exp(-1.0) + 1.0, 1e-9);
}

TEST(TheoremBound, T1LimitIsFloorTerm) {
  const TestSystem s = make_system(instances::one_state());
  const CriticSystem sys =
      build_critic_system(s.chain, s.features, s.mdp.gamma, s.mdp.r_max);
  BoundParams p;
  p.t = 100000000;
  p.beta = sys.beta_max;
  p.init_err_sq = 123.0;
  EXPECT_NEAR(theorem_bound(Bound::T1_last, sys, p),
              2.0 * sys.beta_max * sys.sigma_sq / sys.mu, 1e-9);
}

TEST(TheoremBound, T4DeltaOneDropsLogTerm) {
  const TestSystem s = make_system(instances::one_state());
  SystemOptions opts;
  opts.h_radius = 30.0;  // > ||xi||/mu ~ 12.9
  const CriticSystem sys = build_critic_system(s.chain, s.features,
                                               s.mdp.gamma, s.mdp.r_max, opts);
  BoundParams p;
  p.t = 2048;
  p.k = 1024;
  p.beta = sys.beta_max;
  p.delta = 1.0;
  p.init_err_norm = 2.0;
  const double n = 1024.0;
  const double expected =
      4.0 * std::exp(-p.k * p.beta * sys.mu) / (p.beta * sys.mu * n) * 2.0 +
      4.0 * *sys.tau / (sys.mu * std::sqrt(n));
  EXPECT_NEAR(theorem_bound(Bound::T4_highprob, sys, p), expected, 1e-9);
}

TEST(TheoremBound, RejectsOversizedStep) {
  const TestSystem s = make_system(instances::one_state());
  const CriticSystem sys =
      build_critic_system(s.chain, s.features, s.mdp.gamma, s.mdp.r_max);
  BoundParams p;
  p.t = 100;
  p.k = 50;
  p.beta = sys.beta_max * 2.0;
  p.init_err_sq = 1.0;
  EXPECT_THROW(theorem_bound(Bound::T1_last, sys, p), StepSizeTooLarge);
}

TEST(TheoremBound, Theorem3FormsBothEvaluate) {
  const TestSystem s = make_system(instances::one_state());
  SystemOptions opts;
  opts.zeta = 0.1;
  const CriticSystem sys = build_critic_system(s.chain, s.features,
                                               s.mdp.gamma, s.mdp.r_max, opts);
  BoundParams p;
  p.t = 4096;
  p.k = 2048;
  p.zeta = 0.1;
  p.beta = *sys.beta_check_max;
  p.init_err_sq = 1.0;
  p.t3_form = Theorem3Form::mu_rate;
  const double b_mu_rate = theorem_bound(Bound::T3_reg, sys, p);
  p.t3_form = Theorem3Form::shifted_rate;
  const double b_shifted = theorem_bound(Bound::T3_reg, sys, p);
  EXPECT_GT(b_mu_rate, 0.0);
  EXPECT_GT(b_shifted, 0.0);
  EXPECT_NE(b_mu_rate, b_shifted);
}

// Contraction lemma, empirically: lambda_max of the sampled mean of
// (I - beta M_t)'(I - beta M_t) stays below 1 - beta mu + 3 SE.
TEST(Contraction, SampledLemmaHoldsOnChain) {
  const TestSystem s = make_system(instances::chain5());
  const CriticSystem sys =
      build_critic_system(s.chain, s.features, s.mdp.gamma, s.mdp.r_max);
  const SampledContraction sc =
      sampled_contraction(s.mdp, s.policy, s.chain, s.features, s.mdp.gamma,
                          sys.beta_max, 100000, 77);
  EXPECT_LE(sc.lambda_max, 1.0 - sys.beta_max * sys.mu + 3.0 * sc.se);
  EXPECT_LE(sc.exact_lambda_max, 1.0 - sys.beta_max * sys.mu + 1e-12);
}

TEST(SystemConstruction, RejectsTooSmallProjectionRadius) {
  const TestSystem s = make_system(instances::one_state());
  SystemOptions opts;
  opts.h_radius = 1.0;  // well below ||xi||/mu
  EXPECT_THROW(build_critic_system(s.chain, s.features, s.mdp.gamma,
                                   s.mdp.r_max, opts),
               ConstraintViolation);
}

}  // namespace
