#pragma once

#include <Eigen/Dense>

#include "mvtd/errors.hpp"
#include "mvtd/mdp.hpp"
#include "mvtd/rng.hpp"

namespace mvtd {

// Linear function approximation data: feature matrices for the value and
// square-value estimates, their row-norm bounds and the stationary-weighted
// projection matrices Pi = Phi (Phi' D Phi)^{-1} Phi' D.
struct FeatureSet {
  Matrix phi_v;  // |S| x q
  Matrix phi_u;  // |S| x q
  int q = 0;
  double phi_v_max = 0.0;
  double phi_u_max = 0.0;
  Matrix pi_v;
  Matrix pi_u;

  Vector fv(int s) const { return phi_v.row(s).transpose(); }
  Vector fu(int s) const { return phi_u.row(s).transpose(); }
};

namespace detail {

inline void check_full_rank(const Matrix& phi, const char* name) {
  Eigen::JacobiSVD<Matrix> svd(phi);
  if (svd.singularValues().minCoeff() <= 1e-10)
    throw RankDeficient(std::string(name) + " smallest singular value <= 1e-10");
}

inline Matrix weighted_projector(const Matrix& phi, const Vector& chi) {
  const Matrix gram = phi.transpose() * chi.asDiagonal() * phi;
  return phi * gram.partialPivLu().solve(phi.transpose() * Matrix(chi.asDiagonal()));
}

}  // namespace detail

inline FeatureSet build_feature_set(const Matrix& phi_v, const Matrix& phi_u,
                                    const OnPolicyChain& chain) {
  const int n = static_cast<int>(chain.p_pi.rows());
  if (phi_v.rows() != n || phi_u.rows() != n)
    throw DimensionMismatch("feature matrices must have |S| rows");
  if (phi_v.cols() != phi_u.cols())
    throw DimensionMismatch("phi_v and phi_u must share the feature dimension");
  detail::check_full_rank(phi_v, "phi_v");
  detail::check_full_rank(phi_u, "phi_u");

  FeatureSet fs;
  fs.phi_v = phi_v;
  fs.phi_u = phi_u;
  fs.q = static_cast<int>(phi_v.cols());
  fs.phi_v_max = phi_v.rowwise().norm().maxCoeff();
  fs.phi_u_max = phi_u.rowwise().norm().maxCoeff();
  fs.pi_v = detail::weighted_projector(phi_v, chain.chi);
  fs.pi_u = detail::weighted_projector(phi_u, chain.chi);
  return fs;
}

// Tabular special case Phi_v = Phi_u = I, so the projected fixed point
// coincides with the exact (V, U).
inline FeatureSet identity_features(const OnPolicyChain& chain) {
  const int n = static_cast<int>(chain.p_pi.rows());
  return build_feature_set(Matrix::Identity(n, n), Matrix::Identity(n, n),
                           chain);
}

inline FeatureSet scaled_identity_features(const OnPolicyChain& chain,
                                           double scale) {
  const int n = static_cast<int>(chain.p_pi.rows());
  return build_feature_set(scale * Matrix::Identity(n, n),
                           scale * Matrix::Identity(n, n), chain);
}

// Gaussian features with orthonormalized columns, shared between the value
// and square-value approximations.
inline FeatureSet random_orthonormal_features(const OnPolicyChain& chain,
                                              int q, Rng& rng) {
  const int n = static_cast<int>(chain.p_pi.rows());
  if (q < 1 || q > n) throw DimensionMismatch("need 1 <= q <= |S|");
  Matrix g(n, q);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < q; ++j) {
      // Box-Muller
      const double u1 = std::max(rng.uniform(), 1e-300);
      const double u2 = rng.uniform();
      g(i, j) = std::sqrt(-2.0 * std::log(u1)) *
                std::cos(2.0 * M_PI * u2);
    }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix thin_q = qr.householderQ() * Matrix::Identity(n, q);
  return build_feature_set(thin_q, thin_q, chain);
}

}  // namespace mvtd
