#include <gtest/gtest.h>

#include "mvtd/features.hpp"
#include "mvtd/instances.hpp"
#include "mvtd/linear_system.hpp"

namespace {

using namespace mvtd;

OnPolicyChain chain5_chain() {
  const Mdp m = instances::chain5();
  return induced_chain(m, uniform_policy(m));
}

TEST(BuildFeatureSet, IdentityFeaturesProjectOntoEverything) {
  const auto chain = chain5_chain();
  const FeatureSet fs = identity_features(chain);
  EXPECT_EQ(fs.q, 5);
  EXPECT_DOUBLE_EQ(fs.phi_v_max, 1.0);
  EXPECT_LT((fs.pi_v - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((fs.pi_u - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(BuildFeatureSet, DuplicatedColumnIsRankDeficient) {
  const auto chain = chain5_chain();
  Matrix phi(5, 2);
  phi.col(0) = Vector::LinSpaced(5, 1.0, 5.0);
  phi.col(1) = phi.col(0);
  EXPECT_THROW(build_feature_set(phi, phi, chain), RankDeficient);
}

TEST(BuildFeatureSet, DimensionMismatchRejected) {
  const auto chain = chain5_chain();
  EXPECT_THROW(build_feature_set(Matrix::Identity(4, 4),
                                 Matrix::Identity(4, 4), chain),
               DimensionMismatch);
  EXPECT_THROW(build_feature_set(Matrix::Identity(5, 5),
                                 Matrix::Identity(5, 4), chain),
               DimensionMismatch);
}

// Independent normal-equations oracle for the chi-weighted projector:
// x* = (Phi' D Phi)^{-1} Phi' D y computed per target, then Pi y = Phi x*.
TEST(BuildFeatureSet, MatchesNormalEquationsOracle) {
  Mdp m;
  m.num_states = 5;
  m.num_actions = 1;
  Matrix p = Matrix::Constant(5, 5, 0.2);  // uniform chain => uniform chi
  m.transitions = {p};
  m.rewards = Matrix::Ones(5, 1);
  m.gamma = 0.5;
  m.r_max = 1.0;
  const auto chain = induced_chain(validate_mdp(m), uniform_policy(m));

  Rng rng(5);
  Matrix phi(5, 2);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 2; ++j) phi(i, j) = 2.0 * rng.uniform() - 1.0;
  const FeatureSet fs = build_feature_set(phi, phi, chain);

  const Matrix d = Matrix(chain.statdist());
  for (int trial = 0; trial < 10; ++trial) {
    Vector y(5);
    for (int i = 0; i < 5; ++i) y[i] = 2.0 * rng.uniform() - 1.0;
    const Vector x_star =
        (phi.transpose() * d * phi).ldlt().solve(phi.transpose() * d * y);
    EXPECT_LT((fs.pi_v * y - phi * x_star).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(BuildFeatureSet, ProjectorIdempotent) {
  const auto chain = chain5_chain();
  Rng rng(17);
  const FeatureSet fs = random_orthonormal_features(chain, 3, rng);
  EXPECT_LT((fs.pi_v * fs.pi_v - fs.pi_v).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((fs.pi_u * fs.pi_u - fs.pi_u).cwiseAbs().maxCoeff(), 1e-10);
}

// Pi y minimizes the chi-weighted quadratic over the span: checked against a
// dense grid search on the 2-d coefficient space.
TEST(BuildFeatureSet, WeightedProjectionOptimalOnGrid) {
  const auto chain = chain5_chain();
  Rng rng(23);
  Matrix phi(5, 2);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 2; ++j) phi(i, j) = 2.0 * rng.uniform() - 1.0;
  const FeatureSet fs = build_feature_set(phi, phi, chain);
  const Matrix d = Matrix(chain.statdist());

  Vector y(5);
  for (int i = 0; i < 5; ++i) y[i] = 2.0 * rng.uniform() - 1.0;
  const Vector proj = fs.pi_v * y;
  const double best = (y - proj).transpose() * d * (y - proj);
  for (double a = -3.0; a <= 3.0; a += 0.05)
    for (double b = -3.0; b <= 3.0; b += 0.05) {
      const Vector cand = phi * Eigen::Vector2d(a, b);
      const double obj = (y - cand).transpose() * d * (y - cand);
      EXPECT_GE(obj, best - 1e-9);
    }
}

TEST(BuildFeatureSet, ProjectionNonExpansiveInWeightedNorm) {
  const auto chain = chain5_chain();
  Rng rng(31);
  const FeatureSet fs = random_orthonormal_features(chain, 2, rng);
  const Matrix d = Matrix(chain.statdist());
  for (int trial = 0; trial < 100; ++trial) {
    Vector y(5);
    for (int i = 0; i < 5; ++i) y[i] = 2.0 * rng.uniform() - 1.0;
    const double norm_y = y.transpose() * d * y;
    const Vector py = fs.pi_v * y;
    const double norm_py = py.transpose() * d * py;
    EXPECT_LE(norm_py, norm_y + 1e-12);
  }
}

TEST(IdentityFeatures, OneStateCase) {
  const Mdp m = instances::one_state();
  const auto chain = induced_chain(m, uniform_policy(m));
  const FeatureSet fs = identity_features(chain);
  EXPECT_EQ(fs.q, 1);
  EXPECT_DOUBLE_EQ(fs.pi_v(0, 0), 1.0);
}

// With identity features the projected fixed point is the exact (V, U).
TEST(IdentityFeatures, FixedPointMatchesExactSolvers) {
  const Mdp m = instances::chain5();
  const auto chain = induced_chain(m, uniform_policy(m));
  const FeatureSet fs = identity_features(chain);
  const auto [mm, xi] = assemble_system(chain, fs, m.gamma);
  const Vector w = fixed_point(mm, xi);
  const Vector v = exact_value(chain, m.gamma);
  const Vector u = exact_square_value(chain, m.gamma, v);
  EXPECT_LT((w.head(5) - v).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((w.tail(5) - u).cwiseAbs().maxCoeff(), 1e-9);
}

}  // namespace
