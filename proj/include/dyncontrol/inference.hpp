#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "dyncontrol/model.hpp"
#include "dyncontrol/simulation.hpp"

namespace dyncontrol {

/// Marginal covariance of (Z_0..Z_J) over random effects and noise:
///   sigmaMu0^2 + sigmaMu1^2 t t' + tau^2 min(t, t') + sigmaEps^2 1{j = j'}.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> marginal_covariance(
    std::span<const double> times, const ModelParams& params) {
  const auto n = static_cast<Eigen::Index>(times.size());
  const Scalar s0 = Scalar(params.sigmaMu0 * params.sigmaMu0);
  const Scalar s1 = Scalar(params.sigmaMu1 * params.sigmaMu1);
  const Scalar tau2 = Scalar(params.tau * params.tau);
  const Scalar eps2 = Scalar(params.sigmaEps * params.sigmaEps);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index s = 0; s < n; ++s) {
      const Scalar tr = Scalar(times[r]), ts = Scalar(times[s]);
      out(r, s) = s0 + s1 * tr * ts + tau2 * std::min(tr, ts) + (r == s ? eps2 : Scalar(0));
    }
  }
  return out;
}

inline Eigen::MatrixXd marginal_covariance(const VisitSchedule& schedule,
                                           const ModelParams& params) {
  return marginal_covariance<double>(schedule.times(), params);
}

/// Parameter order used for vectors, vcov and reports.
inline constexpr std::array<std::string_view, 9> kParamNames = {
    "mu0", "mu1", "gammaC", "gammaD", "gammaA", "sigmaMu0", "sigmaMu1", "tau", "sigmaEps"};
inline constexpr int kFixedEffectCount = 5;

Eigen::Matrix<double, 9, 1> to_vector(const ModelParams& p);
ModelParams from_vector(const Eigen::Matrix<double, 9, 1>& v);

struct LogLikelihood {
  double value = 0.0;
  bool degenerate = false;  ///< covariance not positive definite; value is -inf
};

/// Sum over subjects of log N(z_i; mean_i, Sigma_i), conditional on the
/// observed treatment paths.
LogLikelihood log_likelihood(const Cohort& cohort, const ModelParams& params);

struct FitOptions {
  int max_iterations = 500;
  double gradient_tol = 1e-6;  ///< on the per-subject mean negative log-likelihood
  double fd_step = 1e-5;
  bool compute_vcov = true;
};

struct FittedModel {
  ModelParams estimates;
  Eigen::MatrixXd vcov;  ///< natural scale, kParamNames order
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;

  Eigen::VectorXd standard_errors() const;
};

/// Least-squares start: fixed effects by OLS, variance parameters from the
/// residual spread.
ModelParams default_init(const Cohort& cohort);

/// Maximum likelihood by BFGS on (fixed effects, log SDs) with central
/// difference gradients. vcov is the inverse observed information mapped back
/// to the natural scale by the delta method.
FittedModel fit_ml(const Cohort& cohort, const ModelParams& init, const FitOptions& options = {});

struct BootstrapResult {
  Eigen::VectorXd sd;  ///< kParamNames order
  int used = 0;
  int dropped = 0;
};

/// Parametric bootstrap: b cohorts simulated from the fitted law, reusing each
/// subject's covariates, schedule and treatment path, then refitted.
BootstrapResult bootstrap_se(const Cohort& cohort, const FittedModel& fitted, int b,
                             std::uint64_t seed, const FitOptions& options = {});

/// Redraws the observations of `cohort` from `params` keeping covariates,
/// schedules and treatment paths. Subject i uses StreamSet(seed, i).
Cohort resample_observations(const Cohort& cohort, const ModelParams& params, std::uint64_t seed);

}  // namespace dyncontrol
