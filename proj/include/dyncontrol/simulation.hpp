#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dyncontrol/model.hpp"
#include "dyncontrol/random.hpp"
#include "dyncontrol/strategy.hpp"

namespace dyncontrol {

/// Population a cohort is drawn from: C ~ N(0,1), D ~ Bernoulli(prob_d),
/// random effects from `params`.
struct PopulationSpec {
  int n = 1;
  double prob_d = 0.6;
  ModelParams params;

  void validate() const;
};

struct CohortSubject {
  int id = 0;
  SubjectCovariates cov;  ///< realized effects included when generated
  VisitSchedule schedule;
  Trajectory traj;        ///< y is NaN for imported data
};

struct CohortMetadata {
  std::uint64_t seed = 0;
  ModelParams params;
  ObservationalAssignmentModel assignment;
  std::string generator = "observational";
};

struct Cohort {
  std::vector<CohortSubject> subjects;
  CohortMetadata meta;

  /// Fraction of follow-up time spent under treatment, pooled over subjects.
  double treated_time_fraction() const;
};

/// Fills in mu0i / mu1i from the population law when absent. Draws, in order,
/// mu0i then mu1i from the initial-condition stream, only for missing values.
SubjectCovariates realize_effects(const ModelParams& params, const SubjectCovariates& cov,
                                  StreamSet& streams);

/// Forward simulation of one subject under a decision callback
/// `decide(const ObservedHistory&) -> int`. `truth` must carry realized
/// effects; `known` is what the decision rule may see.
template <typename DecideFn>
Trajectory simulate_path(const ModelParams& params, const SubjectCovariates& truth,
                         const SubjectCovariates& known, const VisitSchedule& schedule,
                         StreamSet& streams, const EffectsPrior* belief, DecideFn&& decide) {
  const int J = schedule.J();
  Trajectory traj(J + 1);
  const auto times = schedule.times();
  traj.y[0] = *truth.mu0i;
  if (times[0] > 0.0) {
    // Y starts at mu0_i at time 0; visits may begin later, untreated until then.
    traj.y[0] += drift(params, truth, 0) * times[0] +
                 params.tau * std::sqrt(times[0]) * streams.normal(Stream::kDiffusion);
  }
  for (int j = 0; j <= J; ++j) {
    traj.z[j] = traj.y[j] + params.sigmaEps * streams.normal(Stream::kMeasurement);
    ObservedHistory hist{.times = times.subspan(0, j + 1),
                         .z = std::span<const double>(traj.z.data(), j + 1),
                         .a = std::span<const int>(traj.a.data(), j),
                         .cov = known,
                         .next_dt = j < J ? schedule.interval(j)
                                          : (J > 0 ? schedule.interval(J - 1) : 1.0),
                         .belief = belief};
    traj.a[j] = decide(hist);
    if (j < J) {
      const double dt = schedule.interval(j);
      traj.y[j + 1] = traj.y[j] + drift(params, truth, traj.a[j]) * dt +
                      params.tau * std::sqrt(dt) * streams.normal(Stream::kDiffusion);
    }
  }
  return traj;
}

/// One subject under a treatment strategy. Effects absent from `cov` are drawn
/// from the population law and stay hidden from the strategy unless `belief`
/// says otherwise.
Trajectory simulate_subject(const ModelParams& params, const SubjectCovariates& cov,
                            const VisitSchedule& schedule, const StrategySpec& strategy,
                            StreamSet& streams, const EffectsPrior* belief = nullptr);

/// Observational cohort: subject i uses StreamSet(seed, i).
Cohort simulate_cohort(const PopulationSpec& pop, const ObservationalAssignmentModel& assignment,
                       const VisitSchedule& schedule, std::uint64_t seed);

/// Cohort whose treatment follows `strategy` instead of the assignment law
/// (used for the illustrative never / threshold / always panels).
Cohort simulate_cohort_under(const PopulationSpec& pop, const StrategySpec& strategy,
                             const VisitSchedule& schedule, std::uint64_t seed);

}  // namespace dyncontrol
