#include "dyncontrol/model.hpp"

#include <cmath>
#include <string>

#include "dyncontrol/errors.hpp"

namespace dyncontrol {

void ModelParams::validate() const {
  for (double v : {mu0, mu1, gammaC, gammaD, gammaA, tau, sigmaEps, sigmaMu0, sigmaMu1}) {
    if (!std::isfinite(v)) throw InvalidParamsError("model parameters must be finite");
  }
  if (!(tau > 0.0)) throw InvalidParamsError("tau must be > 0");
  if (sigmaEps < 0.0 || sigmaMu0 < 0.0 || sigmaMu1 < 0.0) {
    throw InvalidParamsError("standard deviations must be >= 0");
  }
}

ModelParams ModelParams::illustration() {
  return ModelParams{.mu0 = -2.0,
                     .mu1 = 1.0,
                     .gammaC = 0.3,
                     .gammaD = 1.0,
                     .gammaA = -3.0,
                     .tau = 2.0,
                     .sigmaEps = 0.5,
                     .sigmaMu0 = 1.0,
                     .sigmaMu1 = 0.5};
}

ModelParams ModelParams::illustration_known_effects() {
  auto p = illustration();
  p.sigmaMu0 = 0.0;
  p.sigmaMu1 = 0.0;
  return p;
}

void SubjectCovariates::validate() const {
  if (d != 0 && d != 1) throw InvalidParamsError("binary covariate d must be 0 or 1");
  if (!std::isfinite(c)) throw InvalidParamsError("covariate c must be finite");
}

VisitSchedule::VisitSchedule(std::vector<double> times) : times_(std::move(times)) {
  if (times_.empty()) throw InvalidScheduleError("schedule needs at least one visit");
  if (!(times_.front() >= 0.0)) throw InvalidScheduleError("t_0 must be >= 0");
  for (std::size_t j = 1; j < times_.size(); ++j) {
    if (!(times_[j] > times_[j - 1])) {
      throw InvalidScheduleError("visit times must be strictly increasing (at index " +
                                 std::to_string(j) + ")");
    }
  }
}

VisitSchedule VisitSchedule::uniform(int J, double step, double t0) {
  if (J < 0) throw InvalidScheduleError("J must be >= 0");
  if (!(step > 0.0)) throw InvalidScheduleError("step must be > 0");
  std::vector<double> t(static_cast<std::size_t>(J) + 1);
  for (int j = 0; j <= J; ++j) t[j] = t0 + step * j;
  return VisitSchedule(std::move(t));
}

void Trajectory::validate(const VisitSchedule& schedule) const {
  const auto n = schedule.J() + 1;
  if (y.size() != n || z.size() != n || a.size() != n) {
    throw AlignmentError("trajectory length does not match schedule");
  }
  for (int j = 0; j < n; ++j) {
    if (a[j] != 0 && a[j] != 1) throw AlignmentError("treatment values must be 0 or 1");
  }
}

EffectsPrior effects_prior(const ModelParams& params, const SubjectCovariates& cov) {
  EffectsPrior prior;
  prior.mean << cov.mu0i.value_or(params.mu0), cov.mu1i.value_or(params.mu1);
  prior.cov(0, 0) = cov.mu0i ? 0.0 : params.sigmaMu0 * params.sigmaMu0;
  prior.cov(1, 1) = cov.mu1i ? 0.0 : params.sigmaMu1 * params.sigmaMu1;
  return prior;
}

double covariate_slope(const ModelParams& params, const SubjectCovariates& cov) {
  return params.gammaC * cov.c + params.gammaD * cov.d;
}

double drift(const ModelParams& params, const SubjectCovariates& cov, int a) {
  return cov.mu1i.value_or(params.mu1) + covariate_slope(params, cov) + params.gammaA * a;
}

Gaussian transition(double y_now, double dt, int a, const ModelParams& params,
                    const SubjectCovariates& cov) {
  if (!(dt > 0.0)) throw InvalidScheduleError("transition requires dt > 0");
  return {y_now + drift(params, cov, a) * dt, params.tau * params.tau * dt};
}

double cumulative_treatment(const VisitSchedule& schedule, std::span<const int> a) {
  if (static_cast<int>(a.size()) != schedule.J() + 1) {
    throw AlignmentError("treatment path length does not match schedule");
  }
  double total = 0.0;
  for (int j = 0; j < schedule.J(); ++j) total += a[j] * schedule.interval(j);
  return total;
}

Eigen::VectorXd treatment_integrals(std::span<const double> times, std::span<const int> a) {
  const auto n = static_cast<Eigen::Index>(times.size());
  if (static_cast<Eigen::Index>(a.size()) + 1 < n) {
    throw AlignmentError("treatment path shorter than visit prefix");
  }
  Eigen::VectorXd out(n);
  if (n == 0) return out;
  out[0] = 0.0;
  for (Eigen::Index r = 1; r < n; ++r) {
    out[r] = out[r - 1] + a[r - 1] * (times[r] - times[r - 1]);
  }
  return out;
}

}  // namespace dyncontrol
