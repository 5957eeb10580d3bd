#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "dyncontrol/errors.hpp"
#include "dyncontrol/stats.hpp"
#include "dyncontrol/strategy.hpp"

using namespace dyncontrol;

namespace {

struct History {
  std::vector<double> times;
  std::vector<double> z;
  std::vector<int> a;
  SubjectCovariates cov;

  ObservedHistory view(double next_dt = 1.0) const {
    return {.times = times, .z = z, .a = a, .cov = cov, .next_dt = next_dt};
  }
};

SubjectCovariates known(double c, int d, double mu0i, double mu1i) {
  SubjectCovariates cov;
  cov.c = c;
  cov.d = d;
  cov.mu0i = mu0i;
  cov.mu1i = mu1i;
  return cov;
}

// Brute-force conditioning of Y(t_next) on (Z_0..Z_j) from the joint covariance.
double brute_exceedance(const History& h, const ModelParams& p, double dt, double eta, int a_hyp) {
  const int n = static_cast<int>(h.z.size());
  std::vector<double> t = h.times;
  const double t_next = t.back() + dt;
  std::vector<int> a = h.a;
  a.push_back(a_hyp);
  auto integ = [&](double until) {
    double s = 0.0;
    for (int r = 0; r < n; ++r) {
      const double lo = t[r], hi = r + 1 < n ? t[r + 1] : t_next;
      s += a[r] * std::max(0.0, std::min(hi, until) - lo);
    }
    return s;
  };
  const double slope = p.gammaC * h.cov.c + p.gammaD * h.cov.d;
  auto mean_at = [&](double s) { return p.mu0 + (p.mu1 + slope) * s + p.gammaA * integ(s); };
  auto k = [&](double s, double u) {
    return p.sigmaMu0 * p.sigmaMu0 + p.sigmaMu1 * p.sigmaMu1 * s * u + p.tau * p.tau * std::min(s, u);
  };
  Eigen::MatrixXd szz(n, n);
  Eigen::VectorXd szy(n), dz(n);
  for (int r = 0; r < n; ++r) {
    for (int q = 0; q < n; ++q) szz(r, q) = k(t[r], t[q]) + (r == q ? p.sigmaEps * p.sigmaEps : 0.0);
    szy(r) = k(t[r], t_next);
    dz(r) = h.z[r] - mean_at(t[r]);
  }
  const Eigen::VectorXd w = szz.ldlt().solve(szy);
  const double m = mean_at(t_next) + w.dot(dz);
  const double v = k(t_next, t_next) - w.dot(szy);
  return 1.0 - normal_cdf((eta - m) / std::sqrt(v));
}

}  // namespace

TEST_CASE("personalized threshold is a strict crossing") {
  const ModelParams p = ModelParams::illustration();
  std::mt19937_64 rng(1);
  History h{{0.0}, {0.5}, {}, {}};
  CHECK(decide(PersonalizedThreshold{0.0}, h.view(), p, rng) == 1);
  h.z = {0.0};
  CHECK(decide(PersonalizedThreshold{0.0}, h.view(), p, rng) == 0);
}

TEST_CASE("deterministic rules consume no randomness") {
  const ModelParams p = ModelParams::illustration();
  std::mt19937_64 rng(7), ref(7);
  const History h{{0.0, 1.0}, {0.2, 1.4}, {0}, known(0.5, 0, -2.0, 1.0)};
  for (const StrategySpec& s :
       {StrategySpec{NeverTreat{}}, StrategySpec{AlwaysTreat{}},
        StrategySpec{DeterministicThreshold{1.0, 0.2}}, StrategySpec{PersonalizedThreshold{0.3}},
        StrategySpec{PredictionContainment{1.7, 0.05}},
        StrategySpec{ParamPredictionContainment{1.7, 0.2}}}) {
    CHECK(is_deterministic(s));
    const int first = decide(s, h.view(), p, rng);
    CHECK(decide(s, h.view(), p, rng) == first);
  }
  CHECK(rng() == ref());
}

TEST_CASE("logistic strategy probability") {
  const ModelParams p = ModelParams::illustration();
  const History h{{0.0}, {0.0}, {}, {}};
  const LogisticStochastic s{-3.0, 2.0, 0.3, 0.0, 0.5};
  CHECK(treat_probability(s, h.view(), p) == doctest::Approx(1.0 / (1.0 + std::exp(3.0))));
  CHECK(treat_probability(s, h.view(), p) == doctest::Approx(0.047).epsilon(0.01));
  CHECK_FALSE(is_deterministic(s));
}

TEST_CASE("deterministic threshold shifts with the covariate") {
  const ModelParams p = ModelParams::illustration();
  History h{{0.0}, {0.9}, {}, {}};
  h.cov.c = 1.0;
  CHECK(treat_probability(DeterministicThreshold{0.5, 0.5}, h.view(), p) == 0.0);
  h.cov.c = 0.5;
  CHECK(treat_probability(DeterministicThreshold{0.5, 0.5}, h.view(), p) == 1.0);
}

TEST_CASE("exceedance reduces to the latent closed form") {
  ModelParams p = ModelParams::illustration_known_effects();
  p.sigmaEps = 0.0;
  const History h{{0.0}, {-2.0}, {}, known(0.5, 0, -2.0, 1.0)};
  const double got = exceedance_probability(h.view(), p, 1.0, 1.7, 0);
  CHECK(got == doctest::Approx(1.0 - normal_cdf(1.275)).epsilon(1e-10));
  CHECK(got == doctest::Approx(0.101).epsilon(0.01));

  // Later visit: the latent value is read off Z exactly.
  const History later{{0.0, 1.0, 2.0}, {-2.0, 0.4, -1.1}, {0, 1}, known(0.5, 0, -2.0, 1.0)};
  const double expect = 1.0 - normal_cdf((1.7 - (-1.1 + 1.15 * 0.5)) / (2.0 * std::sqrt(0.5)));
  CHECK(exceedance_probability(later.view(), p, 0.5, 1.7, 0) ==
        doctest::Approx(expect).epsilon(1e-10));

  std::mt19937_64 rng(3);
  CHECK(decide(PredictionContainment{1.7, 0.05}, h.view(), p, rng) == 1);
  CHECK(decide(PredictionContainment{1.7, 0.2}, h.view(), p, rng) == 0);
}

TEST_CASE("exceedance limits and monotonicity") {
  const ModelParams p = ModelParams::illustration();
  const History h{{0.0, 1.0, 2.5}, {-1.5, -0.2, 0.9}, {0, 1}, {}};
  CHECK(exceedance_probability(h.view(), p, 1.0, 1e6, 0) == doctest::Approx(0.0));
  CHECK(exceedance_probability(h.view(), p, 1.0, -1e6, 0) == doctest::Approx(1.0));
  double prev = 1.0;
  for (double eta = -6.0; eta <= 6.0; eta += 0.5) {
    const double untreated = exceedance_probability(h.view(), p, 1.0, eta, 0);
    const double treated = exceedance_probability(h.view(), p, 1.0, eta, 1);
    CHECK(untreated <= prev);
    CHECK(treated < untreated);
    prev = untreated;
  }
  CHECK_THROWS_AS(exceedance_probability(h.view(), p, 0.0, 1.7, 0), InvalidScheduleError);
}

TEST_CASE("exceedance matches joint Gaussian conditioning") {
  const ModelParams p = ModelParams::illustration();
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  std::bernoulli_distribution coin(0.5);
  for (int rep = 0; rep < 10; ++rep) {
    History h;
    const int visits = 1 + rep % 5;
    double t = 0.0;
    for (int r = 0; r < visits; ++r) {
      h.times.push_back(t);
      h.z.push_back(n01(rng) * 2.0);
      if (r + 1 < visits) h.a.push_back(coin(rng) ? 1 : 0);
      t += 0.5 + 0.25 * (r % 3);
    }
    h.cov.c = n01(rng);
    h.cov.d = rep % 2;
    for (int a_hyp = 0; a_hyp <= 1; ++a_hyp) {
      const double got = exceedance_probability(h.view(), p, 0.8, 1.7, a_hyp);
      CHECK(got == doctest::Approx(brute_exceedance(h, p, 0.8, 1.7, a_hyp)).epsilon(1e-10));
    }
  }
}

TEST_CASE("observational assignment law") {
  ObservationalAssignmentModel m;
  SubjectCovariates cov;
  CHECK(assignment_probability(m, 1.5, cov) == doctest::Approx(0.5));
  cov.d = 1;
  CHECK(assignment_probability(m, 0.0, cov) == doctest::Approx(1.0 / (1.0 + std::exp(2.5))));
  CHECK(assignment_probability(m, 0.0, cov) == doctest::Approx(0.076).epsilon(0.01));
  CHECK(assignment_probability(m, -5.0, cov, 1) == 1.0);
  m.absorbing = false;
  CHECK(assignment_probability(m, -5.0, cov, 1) < 1e-4);
}

TEST_CASE("strategy validation") {
  CHECK_THROWS_AS(validate(Randomized{1.5}), InvalidParamsError);
  CHECK_THROWS_AS(validate(PredictionContainment{1.7, -0.1}), InvalidParamsError);
  CHECK_THROWS_AS(validate(PredictionContainment{NAN, 0.1}), InvalidParamsError);
  CHECK_NOTHROW(validate(PersonalizedThreshold{40.0}));
  CHECK(strategy_tag(NeverTreat{}) == "never");
}
