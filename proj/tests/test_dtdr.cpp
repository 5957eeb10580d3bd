#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dyncontrol/dtdr.hpp"
#include "dyncontrol/errors.hpp"
#include "dyncontrol/simulation.hpp"

using namespace dyncontrol;

namespace {

SearchConfig quick_search() {
  SearchConfig s;
  s.grid_n = 16;
  s.refine_tol = 0.25;
  s.k_eval = 300;
  return s;
}

SubjectCovariates profile(double c, int d) {
  SubjectCovariates cov;
  cov.c = c;
  cov.d = d;
  return cov;
}

}  // namespace

TEST_CASE("simulated subject replays the simulator draws") {
  const ModelParams p = ModelParams::illustration();
  const VisitSchedule s = VisitSchedule::uniform(6);
  SubjectCovariates truth = profile(0.5, 1);
  truth.mu0i = -1.5;
  truth.mu1i = 0.8;
  SimulatedSubject env(p, truth, s, StreamSet(31, 4));
  for (int j = 0; j <= s.J(); ++j) {
    const double z = *env.observe();
    CHECK(*env.observe() == z);
    env.act(z > 0.0 ? 1 : 0);
  }
  CHECK_FALSE(env.observe().has_value());
  StreamSet streams(31, 4);
  const Trajectory ref = simulate_subject(p, truth, s, PersonalizedThreshold{0.0}, streams);
  CHECK(env.trajectory().y == ref.y);
  CHECK(env.trajectory().z == ref.z);
  CHECK(env.trajectory().a == ref.a);

  SubjectCovariates hidden = profile(0.5, 1);
  CHECK_THROWS_AS(SimulatedSubject(p, hidden, s, StreamSet(1, 0)), ContractError);
}

TEST_CASE("recorded data shorter than the schedule truncates the trace") {
  const ModelParams p = ModelParams::illustration();
  const VisitSchedule s = VisitSchedule::uniform(4);
  const SubjectCovariates cov = profile(0.5, 0);
  const Posterior prior = Posterior::from_prior(effects_prior(p, cov));
  RecordedData data({-2.1, -0.7});
  const RiskSpec spec{RiskKind::kAdditiveExceedance, 1.7, 0.5};
  const DtdrTrace trace = dtdr_run(prior, p, cov, s, spec, quick_search(), data, 3);
  CHECK(trace.truncated);
  REQUIRE(trace.steps.size() == 2);
  CHECK(trace.steps[1].z == -0.7);
  CHECK(trace.steps[1].time == 1.0);

  RecordedData none({});
  const DtdrTrace empty = dtdr_run(prior, p, cov, s, spec, quick_search(), none, 3);
  CHECK(empty.truncated);
  CHECK(empty.steps.empty());
}

TEST_CASE("trace posterior shrinks and the last visit does not treat") {
  const ModelParams p = ModelParams::illustration();
  const VisitSchedule s = VisitSchedule::uniform(4);
  const SubjectCovariates cov = profile(-0.5, 1);
  const Posterior prior = Posterior::from_prior(effects_prior(p, cov));
  SubjectCovariates truth = cov;
  truth.mu0i = -1.0;
  truth.mu1i = 1.4;
  SimulatedSubject env(p, truth, s, StreamSet(8, 0));
  const RiskSpec spec{RiskKind::kAdditiveExceedance, 1.7, 0.3};
  const DtdrTrace trace = dtdr_run(prior, p, cov, s, spec, quick_search(), env, 12);
  CHECK_FALSE(trace.truncated);
  REQUIRE(trace.steps.size() == 5);
  double det_prev = prior.omega.determinant();
  for (const auto& st : trace.steps) {
    const double det = st.posterior.omega.determinant();
    CHECK(det <= det_prev * (1.0 + 1e-12));
    det_prev = det;
    CHECK(st.posterior.j == st.visit + 1);
    CHECK(st.decision == env.trajectory().a[st.visit]);
  }
  CHECK(trace.steps.back().decision == 0);
  CHECK(std::isnan(trace.steps.back().beta_star));
  CHECK(std::isfinite(trace.steps.front().beta_star));

  // Same seed and environment, same trace.
  SimulatedSubject env2(p, truth, s, StreamSet(8, 0));
  const DtdrTrace again = dtdr_run(prior, p, cov, s, spec, quick_search(), env2, 12);
  for (std::size_t i = 0; i < trace.steps.size() - 1; ++i) {
    CHECK(again.steps[i].beta_star == trace.steps[i].beta_star);
  }
}

TEST_CASE("a point prior never moves") {
  const ModelParams p = ModelParams::illustration();
  const VisitSchedule s = VisitSchedule::uniform(3);
  const SubjectCovariates cov = profile(0.5, 0);
  Posterior prior;
  prior.nu << -2.0, 1.0;
  RecordedData data({-1.0, 0.5, 0.2, 2.0});
  const DtdrTrace trace = dtdr_run(prior, p, cov, s, {RiskKind::kAdditiveExceedance, 1.7, 0.5},
                                   quick_search(), data, 5);
  for (const auto& st : trace.steps) {
    CHECK(st.posterior.nu == prior.nu);
    CHECK(st.posterior.omega.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("one remaining visit: the rule picks the better of treat and wait") {
  // With a single visit ahead, the remaining risk of a decision a is
  // P(Y_1 > eta | a, z_0) + omega a. Compare with the exact predictive law.
  const ModelParams p = ModelParams::illustration();
  const VisitSchedule s = VisitSchedule::uniform(1);
  const SubjectCovariates cov = profile(0.5, 0);
  const Posterior prior = Posterior::from_prior(effects_prior(p, cov));
  const RiskSpec spec{RiskKind::kAdditiveExceedance, 1.7, 0.1, ScoringWindow::kAllVisits};
  // Only the side of z_0 the threshold falls on matters here, so a coarse grid
  // without refinement suffices.
  SearchConfig search = quick_search();
  search.grid_n = 8;
  search.refine_tol = 100.0;
  search.k_eval = 10000;
  int checked = 0;
  int first_treat = -1;
  std::vector<double> zs;
  for (double z = -4.0; z <= 1.0; z += 0.25) zs.push_back(z);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double z = zs[i];
    const std::vector<double> times = {0.0};
    const std::vector<double> zbar = {z};
    const ObservedHistory hist{.times = times, .z = zbar, .a = {}, .cov = cov, .next_dt = 1.0};
    const double gap = exceedance_probability(hist, p, 1.0, spec.eta, 0) -
                       exceedance_probability(hist, p, 1.0, spec.eta, 1) - spec.omega;
    RecordedData data({z, 0.0});
    const DtdrTrace trace = dtdr_run(prior, p, cov, s, spec, search, data, 17);
    REQUIRE(trace.steps.size() == 2);
    const int decision = trace.steps[0].decision;
    if (std::abs(gap) > 0.01) {
      CHECK(decision == (gap > 0.0 ? 1 : 0));
      ++checked;
    }
    if (decision == 1 && first_treat < 0) first_treat = static_cast<int>(i);
    if (first_treat >= 0) CHECK(decision == 1);
  }
  CHECK(checked > 15);
  REQUIRE(first_treat > 0);
  // The decisions form a threshold in z, hence in the untreated exceedance
  // probability: a containment rule with a cut-off between the two neighbours
  // reproduces them.
  auto untreated = [&](double z) {
    const std::vector<double> times = {0.0};
    const std::vector<double> zbar = {z};
    const ObservedHistory hist{.times = times, .z = zbar, .a = {}, .cov = cov, .next_dt = 1.0};
    return exceedance_probability(hist, p, 1.0, spec.eta, 0);
  };
  const double kappa = 0.5 * (untreated(zs[first_treat - 1]) + untreated(zs[first_treat]));
  std::mt19937_64 rng(1);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const std::vector<double> times = {0.0};
    const std::vector<double> zbar = {zs[i]};
    const ObservedHistory hist{.times = times, .z = zbar, .a = {}, .cov = cov, .next_dt = 1.0};
    CHECK(decide(ParamPredictionContainment{spec.eta, kappa}, hist, p, rng) ==
          (static_cast<int>(i) >= first_treat ? 1 : 0));
  }
}

TEST_CASE("remaining horizon preconditions") {
  const ModelParams p = ModelParams::illustration();
  const VisitSchedule s = VisitSchedule::uniform(2);
  const Posterior prior = Posterior::from_prior(effects_prior(p, {}));
  const RiskSpec spec;
  const std::vector<double> z = {0.0, 1.0, 2.0};
  const std::vector<int> a = {0, 0};
  CHECK_THROWS_AS(remaining_horizon_moments(prior, p, {}, s, z, a, 0.0, spec, 10, 1), ContractError);
  const std::vector<double> z1 = {0.0};
  CHECK_THROWS_AS(remaining_horizon_moments(prior, p, {}, s, z1, a, 0.0, spec, 10, 1), ContractError);
  CHECK(remaining_horizon_moments(prior, p, {}, s, z1, {}, 0.0, spec, 10, 1).count() == 10);
}
