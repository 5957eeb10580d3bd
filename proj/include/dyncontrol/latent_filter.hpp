#pragma once

#include <Eigen/Core>
#include <cmath>

#include "dyncontrol/errors.hpp"
#include "dyncontrol/model.hpp"

namespace dyncontrol {

/// Exact Gaussian filter for the joint state (Y_t, mu0_i, mu1_i).
///
/// Y_0 equals mu0_i, so the state starts perfectly correlated; between visits
///   Y <- Y + (mu1_i + s) dt + tau sqrt(dt) xi,
/// where s is the covariate-and-treatment slope, and each visit observes
/// Z = Y + eps. Conditioning is sequential, so zero-variance directions (known
/// effects, sigmaEps = 0) need no special casing.
template <typename Scalar>
class LatentFilter {
 public:
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  using Mat2 = Eigen::Matrix<Scalar, 2, 2>;

  LatentFilter(const Vec2& effects_mean, const Mat2& effects_cov, Scalar tau, Scalar sigma_eps)
      : tau_(tau), sigma_eps_(sigma_eps) {
    if (tau == Scalar(0) && sigma_eps == Scalar(0)) {
      throw DegenerateModelError("observation law is singular when tau = sigmaEps = 0");
    }
    mean_ << effects_mean(0), effects_mean(0), effects_mean(1);
    cov_.setZero();
    cov_.template block<2, 2>(1, 1) = effects_cov;
    cov_.template block<1, 2>(0, 1) = effects_cov.row(0);
    cov_.template block<2, 1>(1, 0) = effects_cov.col(0);
    cov_(0, 0) = effects_cov(0, 0);
  }

  explicit LatentFilter(const EffectsPrior& prior, const ModelParams& params)
      : LatentFilter(prior.mean.cast<Scalar>(), prior.cov.cast<Scalar>(), Scalar(params.tau),
                     Scalar(params.sigmaEps)) {}

  /// Condition on Z = Y + eps at the current time.
  void observe(Scalar z) {
    const Scalar s = cov_(0, 0) + sigma_eps_ * sigma_eps_;
    if (s <= Scalar(0)) return;  // observation carries no information
    const Vec3 gain = cov_.col(0) / s;
    mean_ += gain * (z - mean_(0));
    cov_ -= gain * cov_.row(0);
    cov_ = Scalar(0.5) * (cov_ + cov_.transpose()).eval();
  }

  /// Move forward by dt under slope mu1_i + slope_offset.
  void advance(Scalar dt, Scalar slope_offset) {
    if (!(dt > Scalar(0))) throw InvalidScheduleError("filter step requires dt > 0");
    Mat3 f = Mat3::Identity();
    f(0, 2) = dt;
    mean_ = (f * mean_).eval();
    mean_(0) += slope_offset * dt;
    cov_ = (f * cov_ * f.transpose()).eval();
    cov_(0, 0) += tau_ * tau_ * dt;
  }

  /// Law of Y(t + dt) without changing the filter.
  Gaussian predict(Scalar dt, Scalar slope_offset) const {
    LatentFilter copy = *this;
    copy.advance(dt, slope_offset);
    return {static_cast<double>(copy.mean_(0)), static_cast<double>(copy.cov_(0, 0))};
  }

  /// Marginal over (mu0_i, mu1_i).
  Vec2 effects_mean() const { return mean_.template tail<2>(); }
  Mat2 effects_cov() const { return cov_.template block<2, 2>(1, 1); }

  const Vec3& mean() const { return mean_; }
  const Mat3& cov() const { return cov_; }

 private:
  Vec3 mean_;
  Mat3 cov_;
  Scalar tau_;
  Scalar sigma_eps_;
};

}  // namespace dyncontrol
