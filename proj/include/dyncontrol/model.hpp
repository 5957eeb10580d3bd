#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

namespace dyncontrol {

/// Population-level parameters of the treated marker law
///   dY = (mu1_i + gammaC*C + gammaD*D + gammaA*A) dt + tau dB,
///   Y_0 = mu0_i,  Z_j = Y(t_j) + eps_j,
/// with mu0_i ~ N(mu0, sigmaMu0^2), mu1_i ~ N(mu1, sigmaMu1^2), eps ~ N(0, sigmaEps^2).
struct ModelParams {
  double mu0 = 0.0;
  double mu1 = 0.0;
  double gammaC = 0.0;
  double gammaD = 0.0;
  double gammaA = 0.0;
  double tau = 1.0;
  double sigmaEps = 0.0;
  double sigmaMu0 = 0.0;
  double sigmaMu1 = 0.0;

  /// Throws InvalidParamsError unless tau > 0, SDs >= 0 and all finite.
  void validate() const;

  /// Generator used throughout the illustration: mu0=-2, mu1=1, gammaC=0.3,
  /// gammaD=1, gammaA=-3, tau=2, sigmaEps=0.5, sigmaMu0=1, sigmaMu1=0.5.
  static ModelParams illustration();

  /// Same as illustration() with random-effect SDs set to zero.
  static ModelParams illustration_known_effects();

  bool operator==(const ModelParams&) const = default;
};

/// Observed covariates of one subject plus, when known, its realized
/// random effects.
struct SubjectCovariates {
  double c = 0.0;
  int d = 0;
  std::optional<double> mu0i;
  std::optional<double> mu1i;

  bool effects_known() const { return mu0i.has_value() && mu1i.has_value(); }
  void validate() const;
};

/// Strictly increasing visit times t_0 < ... < t_J with t_0 >= 0.
class VisitSchedule {
 public:
  VisitSchedule() : times_{0.0} {}
  explicit VisitSchedule(std::vector<double> times);

  /// t_j = t0 + j*step for j = 0..J.
  static VisitSchedule uniform(int J, double step = 1.0, double t0 = 0.0);

  int J() const { return static_cast<int>(times_.size()) - 1; }
  std::span<const double> times() const { return times_; }
  double operator[](int j) const { return times_[static_cast<std::size_t>(j)]; }
  double interval(int j) const { return times_[j + 1] - times_[j]; }

  bool operator==(const VisitSchedule&) const = default;

 private:
  std::vector<double> times_;
};

/// One subject's values at the visit times. Treatment a_j holds on
/// [t_j, t_{j+1}).
struct Trajectory {
  Eigen::VectorXd y;  ///< latent marker
  Eigen::VectorXd z;  ///< observed marker
  Eigen::VectorXi a;  ///< treatment indicators

  explicit Trajectory(int visits = 0)
      : y(Eigen::VectorXd::Zero(visits)), z(Eigen::VectorXd::Zero(visits)),
        a(Eigen::VectorXi::Zero(visits)) {}

  int visits() const { return static_cast<int>(y.size()); }
  void validate(const VisitSchedule& schedule) const;
};

struct Gaussian {
  double mean = 0.0;
  double var = 0.0;
};

/// Gaussian belief over the subject effects (mu0_i, mu1_i).
struct EffectsPrior {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
};

/// Known effects give a point mass; otherwise the population law.
EffectsPrior effects_prior(const ModelParams& params, const SubjectCovariates& cov);

/// Slope mu1_i + gammaC c + gammaD d + gammaA a. Uses cov.mu1i when present.
double drift(const ModelParams& params, const SubjectCovariates& cov, int a);

/// Covariate part of the slope, gammaC c + gammaD d (no mu1, no treatment).
double covariate_slope(const ModelParams& params, const SubjectCovariates& cov);

/// Exact one-step law of Y(t + dt) given Y(t) = y_now under constant treatment a.
Gaussian transition(double y_now, double dt, int a, const ModelParams& params,
                    const SubjectCovariates& cov);

/// Time under treatment, sum_j a_j (t_{j+1} - t_j). `a` has one entry per visit;
/// the entry at the last visit does not contribute.
double cumulative_treatment(const VisitSchedule& schedule, std::span<const int> a);

/// Running integrals int_0^{t_r} A du for r = 0..J (treatment starts at t_0).
Eigen::VectorXd treatment_integrals(std::span<const double> times, std::span<const int> a);

}  // namespace dyncontrol
