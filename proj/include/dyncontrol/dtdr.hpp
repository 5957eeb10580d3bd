#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dyncontrol/model.hpp"
#include "dyncontrol/optimizer.hpp"
#include "dyncontrol/posterior.hpp"
#include "dyncontrol/random.hpp"
#include "dyncontrol/risk.hpp"

namespace dyncontrol {

/// Source of observations for an adaptive run. observe() returns Z at the
/// current visit (nullopt once exhausted); act() applies the decision and moves
/// to the next visit.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::optional<double> observe() = 0;
  virtual void act(int a) = 0;
};

/// A subject simulated from the model. Draw order matches simulate_path, so
/// StreamSet(seed, r) reproduces replicate r of the SKP estimator when the
/// decisions agree.
class SimulatedSubject final : public Environment {
 public:
  SimulatedSubject(const ModelParams& params, const SubjectCovariates& truth,
                   const VisitSchedule& schedule, StreamSet streams);

  std::optional<double> observe() override;
  void act(int a) override;

  /// Latent path, observations and decisions so far.
  const Trajectory& trajectory() const { return traj_; }

 private:
  ModelParams params_;
  SubjectCovariates truth_;
  VisitSchedule schedule_;
  StreamSet streams_;
  Trajectory traj_;
  int visit_ = 0;
  bool observed_ = false;
};

/// Replays recorded observations; runs dry after the last one.
class RecordedData final : public Environment {
 public:
  explicit RecordedData(std::vector<double> z) : z_(std::move(z)) {}
  std::optional<double> observe() override;
  void act(int) override { ++visit_; }

 private:
  std::vector<double> z_;
  std::size_t visit_ = 0;
};

struct DtdrStep {
  int visit = 0;
  double time = 0.0;
  double beta_star = 0.0;  ///< NaN when nothing remains to optimize
  int decision = 0;
  double z = 0.0;
  Posterior posterior;     ///< after absorbing Z_0..Z_visit
};

struct DtdrTrace {
  std::vector<DtdrStep> steps;
  bool truncated = false;  ///< environment ran out before the last visit
};

/// Remaining-horizon risk of PersonalizedThreshold(beta) from visit j given the
/// history: the current decision is 1{z_j > beta}, the joint law of
/// (Y_j, mu0_i, mu1_i) comes from exact filtering, and only the marker visits
/// after j and the decisions from j on are scored, normalized by the number of
/// remaining marker visits.
RiskMoments remaining_horizon_moments(const Posterior& prior, const ModelParams& params,
                                      const SubjectCovariates& cov, const VisitSchedule& schedule,
                                      std::span<const double> z, std::span<const int> a,
                                      double beta, const RiskSpec& spec, long k,
                                      std::uint64_t seed, int workers = 1);

/// Dynamic threshold decision rule: at each visit update the posterior, pick
/// the threshold minimizing the remaining-horizon risk, apply it, advance.
/// `cov` carries no effects; the effects belief is `prior`.
DtdrTrace dtdr_run(const Posterior& prior, const ModelParams& params, const SubjectCovariates& cov,
                   const VisitSchedule& schedule, const RiskSpec& spec, const SearchConfig& search,
                   Environment& environment, std::uint64_t seed);

}  // namespace dyncontrol
