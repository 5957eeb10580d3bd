#include "dyncontrol/simulation.hpp"

#include <cmath>

#include "dyncontrol/errors.hpp"

namespace dyncontrol {

void PopulationSpec::validate() const {
  if (n < 1) throw ConfigError("population size n must be >= 1");
  if (!(prob_d >= 0.0 && prob_d <= 1.0)) throw ConfigError("prob_d must be in [0,1]");
  params.validate();
}

double Cohort::treated_time_fraction() const {
  double treated = 0.0;
  double total = 0.0;
  for (const auto& s : subjects) {
    treated += cumulative_treatment(s.schedule, std::span<const int>(s.traj.a.data(),
                                                                     s.traj.a.size()));
    total += s.schedule[s.schedule.J()] - s.schedule[0];
  }
  return total > 0.0 ? treated / total : 0.0;
}

SubjectCovariates realize_effects(const ModelParams& params, const SubjectCovariates& cov,
                                  StreamSet& streams) {
  SubjectCovariates out = cov;
  if (!out.mu0i) out.mu0i = params.mu0 + params.sigmaMu0 * streams.normal(Stream::kInitial);
  if (!out.mu1i) out.mu1i = params.mu1 + params.sigmaMu1 * streams.normal(Stream::kInitial);
  return out;
}

Trajectory simulate_subject(const ModelParams& params, const SubjectCovariates& cov,
                            const VisitSchedule& schedule, const StrategySpec& strategy,
                            StreamSet& streams, const EffectsPrior* belief) {
  const SubjectCovariates truth = realize_effects(params, cov, streams);
  auto& rng = streams.engine(Stream::kStrategy);
  return simulate_path(params, truth, cov, schedule, streams, belief,
                       [&](const ObservedHistory& h) { return decide(strategy, h, params, rng); });
}

namespace {

SubjectCovariates draw_covariates(const PopulationSpec& pop, StreamSet& streams) {
  SubjectCovariates cov;
  cov.c = streams.normal(Stream::kCovariates);
  cov.d = streams.uniform(Stream::kCovariates) < pop.prob_d ? 1 : 0;
  return cov;
}

template <typename MakeDecider>
Cohort generate(const PopulationSpec& pop, const VisitSchedule& schedule, std::uint64_t seed,
                MakeDecider&& make_decider) {
  pop.validate();
  Cohort cohort;
  cohort.meta.seed = seed;
  cohort.meta.params = pop.params;
  cohort.subjects.reserve(static_cast<std::size_t>(pop.n));
  for (int i = 0; i < pop.n; ++i) {
    StreamSet streams(seed, static_cast<std::uint64_t>(i));
    const SubjectCovariates observed = draw_covariates(pop, streams);
    const SubjectCovariates truth = realize_effects(pop.params, observed, streams);
    auto decider = make_decider(streams);
    Trajectory traj =
        simulate_path(pop.params, truth, observed, schedule, streams, nullptr, decider);
    cohort.subjects.push_back({i, truth, schedule, std::move(traj)});
  }
  return cohort;
}

}  // namespace

Cohort simulate_cohort(const PopulationSpec& pop, const ObservationalAssignmentModel& assignment,
                       const VisitSchedule& schedule, std::uint64_t seed) {
  Cohort cohort = generate(pop, schedule, seed, [&](StreamSet& streams) {
    auto* rng = &streams.engine(Stream::kAssignment);
    return [&assignment, rng](const ObservedHistory& h) {
      return assign_observational(assignment, h.z_now(), h.cov, *rng, h.a_prev());
    };
  });
  cohort.meta.assignment = assignment;
  cohort.meta.generator = "observational";
  return cohort;
}

Cohort simulate_cohort_under(const PopulationSpec& pop, const StrategySpec& strategy,
                             const VisitSchedule& schedule, std::uint64_t seed) {
  validate(strategy);
  Cohort cohort = generate(pop, schedule, seed, [&](StreamSet& streams) {
    auto* rng = &streams.engine(Stream::kStrategy);
    const ModelParams* params = &pop.params;
    return [&strategy, rng, params](const ObservedHistory& h) {
      return decide(strategy, h, *params, *rng);
    };
  });
  cohort.meta.generator = "strategy:" + strategy_tag(strategy);
  return cohort;
}

}  // namespace dyncontrol
