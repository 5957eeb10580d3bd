#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <span>

#include "dyncontrol/errors.hpp"
#include "dyncontrol/model.hpp"

namespace dyncontrol {

/// Gaussian posterior N(nu, omega) over mu = (mu0_i, mu1_i) after absorbing
/// `j` observations.
template <typename Scalar>
struct PosteriorState {
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  using Mat2 = Eigen::Matrix<Scalar, 2, 2>;

  Vec2 nu = Vec2::Zero();
  Mat2 omega = Mat2::Zero();
  int j = 0;

  static PosteriorState from_prior(const EffectsPrior& prior) {
    return {prior.mean.cast<Scalar>(), prior.cov.cast<Scalar>(), 0};
  }
  EffectsPrior as_prior() const {
    return {nu.template cast<double>(), omega.template cast<double>()};
  }
};

using Posterior = PosteriorState<double>;

/// Observation means written as a_mat * mu + c_vec with conditional covariance
/// sigma_cond = tau^2 min(t, t') + sigmaEps^2 I.
template <typename Scalar>
struct DesignExpansion {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 2> a_mat;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> c_vec;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sigma_cond;

  Eigen::Index rows() const { return c_vec.size(); }
};

/// Design for visits t_0..t_r given the treatment path A_0..A_{r-1}.
template <typename Scalar = double>
DesignExpansion<Scalar> design_expansion(std::span<const double> times,
                                         const SubjectCovariates& cov, std::span<const int> a,
                                         const ModelParams& params) {
  const auto n = static_cast<Eigen::Index>(times.size());
  const Eigen::VectorXd integ = treatment_integrals(times, a);
  const Scalar slope = Scalar(covariate_slope(params, cov));
  const Scalar tau2 = Scalar(params.tau * params.tau);
  const Scalar eps2 = Scalar(params.sigmaEps * params.sigmaEps);
  DesignExpansion<Scalar> de;
  de.a_mat.resize(n, 2);
  de.c_vec.resize(n);
  de.sigma_cond.resize(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Scalar t = Scalar(times[r]);
    de.a_mat(r, 0) = Scalar(1);
    de.a_mat(r, 1) = t;
    de.c_vec(r) = slope * t + Scalar(params.gammaA) * Scalar(integ[r]);
    for (Eigen::Index s = 0; s < n; ++s) {
      de.sigma_cond(r, s) = tau2 * std::min(t, Scalar(times[s])) + (r == s ? eps2 : Scalar(0));
    }
  }
  return de;
}

/// Conjugate update of a Gaussian prior on mu by z_bar ~ N(A mu + c, Sigma):
///   Omega_post^-1 = A' Sigma^-1 A + Omega^-1,
///   nu_post = Omega_post (A' Sigma^-1 (z - c) + Omega^-1 nu).
/// Evaluated in the equivalent gain form
///   nu_post = nu + Omega A' S^-1 (z - c - A nu),  Omega_post = Omega - Omega A' S^-1 A Omega,
/// with S = A Omega A' + Sigma factored by LLT, which also accepts a singular
/// prior (known effects).
template <typename Scalar>
PosteriorState<Scalar> posterior_update(const PosteriorState<Scalar>& prior,
                                        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& z_bar,
                                        const DesignExpansion<Scalar>& de) {
  using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (z_bar.size() != de.rows() || de.a_mat.rows() != de.rows() ||
      de.sigma_cond.rows() != de.rows() || de.sigma_cond.cols() != de.rows()) {
    throw ContractError("posterior_update: dimension mismatch");
  }
  if (z_bar.size() == 0) return prior;
  const MatX s = de.a_mat * prior.omega * de.a_mat.transpose() + de.sigma_cond;
  const Eigen::LLT<MatX> llt(s);
  if (llt.info() != Eigen::Success) {
    throw DegenerateModelError("observation covariance is singular");
  }
  const MatX gain_t = llt.solve(de.a_mat * prior.omega);  // S^-1 A Omega
  PosteriorState<Scalar> post;
  post.nu = prior.nu + gain_t.transpose() * (z_bar - de.c_vec - de.a_mat * prior.nu);
  post.omega = prior.omega - prior.omega * de.a_mat.transpose() * gain_t;
  post.omega = Scalar(0.5) * (post.omega + post.omega.transpose()).eval();
  post.j = prior.j + static_cast<int>(z_bar.size());
  return post;
}

/// Law of the next observation z_{r+1} given z_0..z_r, for a design with r+2
/// rows whose last row describes the predicted visit. Joint-Gaussian
/// conditioning of the marginal (over mu) observation vector.
template <typename Scalar>
Gaussian posterior_predictive(const PosteriorState<Scalar>& prior,
                              const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& z_bar,
                              const DesignExpansion<Scalar>& de_next) {
  using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = z_bar.size();
  if (de_next.rows() != n + 1) throw ContractError("posterior_predictive: design needs n+1 rows");
  const MatX full = de_next.a_mat * prior.omega * de_next.a_mat.transpose() + de_next.sigma_cond;
  const VecX mean = de_next.a_mat * prior.nu + de_next.c_vec;
  if (n == 0) return {double(mean(0)), double(full(0, 0))};
  const Eigen::LLT<MatX> llt(full.topLeftCorner(n, n));
  if (llt.info() != Eigen::Success) throw DegenerateModelError("observation covariance is singular");
  const VecX k = full.block(0, n, n, 1);
  const VecX w = llt.solve(k);
  const Scalar m = mean(n) + w.dot(z_bar - mean.head(n));
  const Scalar v = full(n, n) - w.dot(k);
  return {double(m), double(v)};
}

/// Square-root factor L with L L' = omega; throws for indefinite matrices.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> psd_sqrt(const Eigen::Matrix<Scalar, 2, 2>& omega) {
  if (!omega.allFinite()) throw InvalidPosteriorError("posterior covariance is not finite");
  if (std::abs(omega(0, 1) - omega(1, 0)) >
      Scalar(1e-9) * (Scalar(1) + omega.cwiseAbs().maxCoeff())) {
    throw InvalidPosteriorError("posterior covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, 2, 2>> es(omega);
  const auto& ev = es.eigenvalues();
  const Scalar tol = Scalar(1e-12) * (Scalar(1) + ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -tol) throw InvalidPosteriorError("posterior covariance is not PSD");
  return es.eigenvectors() * ev.cwiseMax(Scalar(0)).cwiseSqrt().asDiagonal();
}

}  // namespace dyncontrol
