#include <doctest.h>

#include <cmath>
#include <vector>

#include "dyncontrol/errors.hpp"
#include "dyncontrol/optimizer.hpp"

using namespace dyncontrol;

namespace {

RiskEstimate value(double v) {
  RiskEstimate e;
  e.total = v;
  e.cost_marker = v;
  e.fraction_treated = 0.5;
  return e;
}

}  // namespace

TEST_CASE("golden section on a parabola") {
  const double x = golden_section_minimize([](double b) { return (b - 1.3) * (b - 1.3); }, -4.0,
                                           5.0, 1e-6);
  CHECK(x == doctest::Approx(1.3).epsilon(1e-5));
}

TEST_CASE("convex mock reaches its minimum") {
  SearchConfig cfg;
  const ThresholdOptimum opt =
      optimize_threshold([](double b) { return value((b - 1.0) * (b - 1.0)); }, cfg);
  CHECK(std::abs(opt.beta - 1.0) < cfg.refine_tol);
  CHECK_FALSE(opt.never_treat_boundary);
}

TEST_CASE("scaling the loss keeps the minimizer") {
  SearchConfig cfg;
  auto f = [](double b) { return std::sin(b / 3.0) + 0.01 * b * b; };
  const double b1 = optimize_threshold([&](double b) { return value(f(b)); }, cfg).beta;
  const double b2 = optimize_threshold([&](double b) { return value(7.5 * f(b)); }, cfg).beta;
  CHECK(b1 == b2);
}

TEST_CASE("grid stage finds the global minimum that local search misses") {
  // Shallow local minimum near 20, deeper global one near -5.
  auto f = [](double b) {
    return 1.0 - 0.3 * std::exp(-0.5 * (b - 20.0) * (b - 20.0)) -
           0.8 * std::exp(-0.5 * (b + 5.0) * (b + 5.0) / 4.0);
  };
  SearchConfig cfg;
  const ThresholdOptimum global = optimize_threshold([&](double b) { return value(f(b)); }, cfg);
  const ThresholdOptimum local =
      local_threshold_search([&](double b) { return value(f(b)); }, 20.0, 0.5, cfg.refine_tol);
  CHECK(global.beta == doctest::Approx(-5.0).epsilon(0.02));
  CHECK(local.beta == doctest::Approx(20.0).epsilon(0.01));
  CHECK(global.estimate.total < local.estimate.total);
}

TEST_CASE("flat risk resolves ties toward less treatment") {
  SearchConfig cfg;
  const ThresholdOptimum opt = optimize_threshold([](double) { return value(0.5); }, cfg);
  CHECK(opt.beta == cfg.beta_hi);
  CHECK(opt.never_treat_boundary);
}

TEST_CASE("search config validation") {
  SearchConfig cfg;
  cfg.beta_lo = 3.0;
  cfg.beta_hi = 3.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.grid_n = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.refine_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("known-effect sweep structure") {
  const ModelParams p = ModelParams::illustration_known_effects();
  const VisitSchedule s = VisitSchedule::uniform(10);
  const RiskSpec spec{RiskKind::kAdditiveExceedance, 1.7, 0.0};
  SearchConfig cfg;
  cfg.grid_n = 24;
  cfg.refine_tol = 0.2;
  const std::vector<double> omegas = {0.0, 0.1, 0.3, 0.5, 1.0, 3.0};
  const std::vector<Profile> profiles = {{1, 0.5}, {0, -0.5}};
  const auto rows = sweep_omega(omegas, cfg, profiles, spec, skp_components(p, s, spec, 800, 5));
  REQUIRE(rows.size() == omegas.size() * profiles.size());
  for (std::size_t prof = 0; prof < profiles.size(); ++prof) {
    const auto* r = &rows[prof * omegas.size()];
    CHECK(r[0].cost_trt == 0.0);
    for (std::size_t i = 1; i < omegas.size(); ++i) {
      CHECK(r[i].total >= r[i - 1].total - 1e-12);
      CHECK(r[i].pct_treated <= r[i - 1].pct_treated + 1e-12);
      if (i + 1 < omegas.size()) {
        const double w0 = omegas[i - 1], w1 = omegas[i], w2 = omegas[i + 1];
        const double chord = r[i - 1].total + (r[i + 1].total - r[i - 1].total) * (w1 - w0) / (w2 - w0);
        CHECK(r[i].total >= chord - 1e-12);
      }
    }
    CHECK(r[omegas.size() - 1].total == doctest::Approx(r[omegas.size() - 1].cost_y + r[omegas.size() - 1].cost_trt));
  }
  // Steeper marker growth costs more at every omega.
  for (std::size_t i = 0; i < omegas.size(); ++i) CHECK(rows[i].total > rows[omegas.size() + i].total);

  CHECK_THROWS_AS(sweep_omega({}, cfg, profiles, spec, skp_components(p, s, spec, 10, 5)), ContractError);
}

TEST_CASE("threshold search is reproducible") {
  const ModelParams p = ModelParams::illustration_known_effects();
  const VisitSchedule s = VisitSchedule::uniform(10);
  const RiskSpec spec{RiskKind::kAdditiveExceedance, 1.7, 0.5};
  SearchConfig cfg;
  cfg.grid_n = 16;
  cfg.refine_tol = 0.2;
  SubjectCovariates cov;
  cov.c = 0.5;
  cov.mu0i = -2.0;
  cov.mu1i = 1.0;
  auto eval = [&](double b) {
    return estimate_risk_skp(p, cov, s, PersonalizedThreshold{b}, spec, 400, 77);
  };
  const ThresholdOptimum a = optimize_threshold(eval, cfg);
  cfg.workers = 2;
  const ThresholdOptimum b = optimize_threshold(eval, cfg);
  CHECK(a.beta == b.beta);
  CHECK(a.estimate.total == b.estimate.total);
}
