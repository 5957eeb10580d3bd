#pragma once

#include <random>
#include <span>
#include <string>
#include <variant>

#include "dyncontrol/model.hpp"

namespace dyncontrol {

struct NeverTreat {};
struct AlwaysTreat {};

/// Treat with fixed probability p at every visit.
struct Randomized {
  double p = 0.5;
};

/// logit P(A_j = 1) = alpha0 + alphaZ Z_j + alphaC C + alphaD D + alphaA A_{j-1}.
struct LogisticStochastic {
  double alpha0 = 0.0;
  double alphaZ = 0.0;
  double alphaC = 0.0;
  double alphaA = 0.0;
  double alphaD = 0.0;
};

/// A_j = 1{Z_j > beta0 + betaC C}.
struct DeterministicThreshold {
  double beta0 = 0.0;
  double betaC = 0.0;
};

/// A_j = 1{Z_j > beta} with a subject-specific threshold.
struct PersonalizedThreshold {
  double beta = 0.0;
};

/// Treat iff P(Y_{j+1} > eta | untreated until t_{j+1}, history) > kappa.
struct PredictionContainment {
  double eta = 0.0;
  double kappa = 0.05;
};

/// Containment rule with the probability cut-off as the tuning parameter.
struct ParamPredictionContainment {
  double eta = 0.0;
  double beta = 0.05;
};

using StrategySpec =
    std::variant<NeverTreat, AlwaysTreat, Randomized, LogisticStochastic, DeterministicThreshold,
                 PersonalizedThreshold, PredictionContainment, ParamPredictionContainment>;

/// Throws InvalidParamsError for probabilities outside [0,1] or non-finite fields.
void validate(const StrategySpec& spec);

/// True for rules that never consume randomness.
bool is_deterministic(const StrategySpec& spec);

/// Stable tag used in JSON ("never", "always", "randomized", ...).
std::string strategy_tag(const StrategySpec& spec);

/// What a decision rule may look at when deciding at visit j.
struct ObservedHistory {
  std::span<const double> times;  ///< t_0..t_j
  std::span<const double> z;      ///< Z_0..Z_j (nonempty)
  std::span<const int> a;         ///< A_0..A_{j-1}
  SubjectCovariates cov;
  double next_dt = 1.0;                  ///< t_{j+1} - t_j
  const EffectsPrior* belief = nullptr;  ///< null: population law / known effects

  int visit() const { return static_cast<int>(z.size()) - 1; }
  int a_prev() const { return visit() > 0 ? a[static_cast<std::size_t>(visit() - 1)] : 0; }
  double z_now() const { return z.back(); }
};

/// P(Y(t_j + dt) > eta | A_j = a_hyp, Z_0..Z_j, A_0..A_{j-1}, covariates), by
/// exact Gaussian filtering over (Y, mu0_i, mu1_i).
double exceedance_probability(const ObservedHistory& hist, const ModelParams& params, double dt,
                              double eta, int a_hyp);

/// Treatment decision at the current visit. Stochastic rules draw one uniform
/// from `rng`; deterministic rules leave it untouched.
int decide(const StrategySpec& spec, const ObservedHistory& hist, const ModelParams& params,
           std::mt19937_64& rng);

/// Treatment probability of a rule at the current visit (0/1 for deterministic rules).
double treat_probability(const StrategySpec& spec, const ObservedHistory& hist,
                         const ModelParams& params);

/// Data-generating treatment law of an observational study:
/// logit P(A_j = 1) = alpha0 + alphaZ Z_j + alphaC C + alphaD D.
/// When `absorbing` is set, treatment once started is kept.
struct ObservationalAssignmentModel {
  double alpha0 = -3.0;
  double alphaZ = 2.0;
  double alphaC = 0.3;
  double alphaD = 0.5;
  bool absorbing = true;
};

double assignment_probability(const ObservationalAssignmentModel& model, double z_j,
                              const SubjectCovariates& cov, int a_prev = 0);

/// Bernoulli draw under the assignment law. Always consumes one uniform.
int assign_observational(const ObservationalAssignmentModel& model, double z_j,
                         const SubjectCovariates& cov, std::mt19937_64& rng, int a_prev = 0);

}  // namespace dyncontrol
