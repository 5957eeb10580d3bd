#include "dyncontrol/strategy.hpp"

#include <cmath>

#include "dyncontrol/errors.hpp"
#include "dyncontrol/latent_filter.hpp"
#include "dyncontrol/stats.hpp"

namespace dyncontrol {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidParamsError(std::string(what) + " must be in [0,1]");
}

void require_finite(std::initializer_list<double> vs) {
  for (double v : vs) {
    if (!std::isfinite(v)) throw InvalidParamsError("strategy coefficients must be finite");
  }
}

double untreated_exceedance(const ObservedHistory& hist, const ModelParams& params, double eta) {
  return exceedance_probability(hist, params, hist.next_dt, eta, 0);
}

}  // namespace

void validate(const StrategySpec& spec) {
  std::visit(Overloaded{
                 [](const NeverTreat&) {},
                 [](const AlwaysTreat&) {},
                 [](const Randomized& s) { require_probability(s.p, "p"); },
                 [](const LogisticStochastic& s) {
                   require_finite({s.alpha0, s.alphaZ, s.alphaC, s.alphaA, s.alphaD});
                 },
                 [](const DeterministicThreshold& s) { require_finite({s.beta0, s.betaC}); },
                 [](const PersonalizedThreshold& s) {
                   if (std::isnan(s.beta)) throw InvalidParamsError("beta must not be NaN");
                 },
                 [](const PredictionContainment& s) {
                   require_finite({s.eta});
                   require_probability(s.kappa, "kappa");
                 },
                 [](const ParamPredictionContainment& s) {
                   require_finite({s.eta});
                   require_probability(s.beta, "beta");
                 },
             },
             spec);
}

bool is_deterministic(const StrategySpec& spec) {
  return !std::holds_alternative<Randomized>(spec) &&
         !std::holds_alternative<LogisticStochastic>(spec);
}

std::string strategy_tag(const StrategySpec& spec) {
  return std::visit(Overloaded{
                        [](const NeverTreat&) { return std::string("never"); },
                        [](const AlwaysTreat&) { return std::string("always"); },
                        [](const Randomized&) { return std::string("randomized"); },
                        [](const LogisticStochastic&) { return std::string("logistic"); },
                        [](const DeterministicThreshold&) { return std::string("threshold"); },
                        [](const PersonalizedThreshold&) {
                          return std::string("personalized_threshold");
                        },
                        [](const PredictionContainment&) { return std::string("containment"); },
                        [](const ParamPredictionContainment&) {
                          return std::string("param_containment");
                        },
                    },
                    spec);
}

double exceedance_probability(const ObservedHistory& hist, const ModelParams& params, double dt,
                              double eta, int a_hyp) {
  if (!(dt > 0.0)) throw InvalidScheduleError("exceedance horizon requires dt > 0");
  if (hist.z.empty()) throw ContractError("history must contain the baseline observation");
  const EffectsPrior prior = hist.belief ? *hist.belief : effects_prior(params, hist.cov);
  LatentFilter<double> filter(prior, params);
  const double slope = covariate_slope(params, hist.cov);
  const auto j = hist.visit();
  if (hist.times[0] > 0.0) filter.advance(hist.times[0], slope);
  for (int r = 0; r <= j; ++r) {
    if (r > 0) {
      filter.advance(hist.times[r] - hist.times[r - 1], slope + params.gammaA * hist.a[r - 1]);
    }
    filter.observe(hist.z[r]);
  }
  const Gaussian next = filter.predict(dt, slope + params.gammaA * a_hyp);
  return gaussian_exceedance(next.mean, next.var, eta);
}

double treat_probability(const StrategySpec& spec, const ObservedHistory& hist,
                         const ModelParams& params) {
  return std::visit(
      Overloaded{
          [](const NeverTreat&) { return 0.0; },
          [](const AlwaysTreat&) { return 1.0; },
          [](const Randomized& s) { return s.p; },
          [&](const LogisticStochastic& s) {
            return logistic(s.alpha0 + s.alphaZ * hist.z_now() + s.alphaC * hist.cov.c +
                            s.alphaD * hist.cov.d + s.alphaA * hist.a_prev());
          },
          [&](const DeterministicThreshold& s) {
            return hist.z_now() > s.beta0 + s.betaC * hist.cov.c ? 1.0 : 0.0;
          },
          [&](const PersonalizedThreshold& s) { return hist.z_now() > s.beta ? 1.0 : 0.0; },
          [&](const PredictionContainment& s) {
            return untreated_exceedance(hist, params, s.eta) > s.kappa ? 1.0 : 0.0;
          },
          [&](const ParamPredictionContainment& s) {
            return untreated_exceedance(hist, params, s.eta) > s.beta ? 1.0 : 0.0;
          },
      },
      spec);
}

int decide(const StrategySpec& spec, const ObservedHistory& hist, const ModelParams& params,
           std::mt19937_64& rng) {
  const double p = treat_probability(spec, hist, params);
  if (is_deterministic(spec)) return p > 0.5 ? 1 : 0;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p ? 1 : 0;
}

double assignment_probability(const ObservationalAssignmentModel& model, double z_j,
                              const SubjectCovariates& cov, int a_prev) {
  if (model.absorbing && a_prev == 1) return 1.0;
  return logistic(model.alpha0 + model.alphaZ * z_j + model.alphaC * cov.c +
                  model.alphaD * cov.d);
}

int assign_observational(const ObservationalAssignmentModel& model, double z_j,
                         const SubjectCovariates& cov, std::mt19937_64& rng, int a_prev) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return u < assignment_probability(model, z_j, cov, a_prev) ? 1 : 0;
}

}  // namespace dyncontrol
