#pragma once

#include <cstdint>
#include <vector>

#include "dyncontrol/model.hpp"
#include "dyncontrol/posterior.hpp"
#include "dyncontrol/simulation.hpp"
#include "dyncontrol/strategy.hpp"

namespace dyncontrol {

enum class RiskKind {
  kTerminalLevel,       ///< Y(t_J)
  kTerminalExceedance,  ///< 1{Y(t_J) > eta}
  kAdditiveMean,        ///< visit average of Y
  kAdditiveExceedance,  ///< visit average of 1{Y > eta}
};

/// Which visits enter the discretized loss.
///
/// kPostBaseline: marker at visits 1..J and treatment at visits 1..J, both
/// averaged over J.
/// kAllVisits: marker at visits 0..J and the J treatment decisions that
/// govern an interval (visits 0..J-1), both divided by the J+1 visits.
enum class ScoringWindow { kPostBaseline, kAllVisits };

struct RiskSpec {
  RiskKind kind = RiskKind::kAdditiveExceedance;
  double eta = 1.7;
  double omega = 0.0;
  ScoringWindow window = ScoringWindow::kPostBaseline;

  void validate() const;
  bool operator==(const RiskSpec&) const = default;
};

/// Marker loss and unweighted treatment burden of one trajectory.
struct LossParts {
  double marker = 0.0;
  double treatment = 0.0;         ///< before multiplying by omega
  double fraction_treated = 0.0;  ///< share of charged decisions that treat
};

/// Marker term h(y) of the loss.
double marker_term(RiskKind kind, double y, double eta);

/// Visits [first, last] whose marker value is scored, the decisions charged
/// with treatment cost, and the common normalizer.
struct WindowLayout {
  int marker_first = 0;
  int marker_last = 0;
  int treat_first = 0;
  int treat_last = 0;
  double normalizer = 1.0;
};
WindowLayout window_layout(int J, ScoringWindow window);

LossParts loss_parts(const Trajectory& traj, const RiskSpec& spec);

/// (marker cost, omega-weighted treatment cost) of one trajectory.
std::pair<double, double> loss(const Trajectory& traj, const RiskSpec& spec);

struct RiskEstimate {
  double total = 0.0;
  double cost_marker = 0.0;
  double cost_treatment = 0.0;
  double fraction_treated = 0.0;
  double mc_se = 0.0;
  long k = 0;
  RiskSpec spec;
};

/// Running first and second moments of (marker, treatment, fraction). Enough to
/// produce the estimate and its standard error for any omega, which lets one
/// set of common-random-number replicates serve a whole sweep over omega.
class RiskMoments {
 public:
  void add(const LossParts& p);
  void merge(const RiskMoments& other);

  RiskEstimate estimate(const RiskSpec& spec) const;
  long count() const { return n_; }

 private:
  long n_ = 0;
  double sm_ = 0.0, st_ = 0.0, sf_ = 0.0;
  double smm_ = 0.0, stt_ = 0.0, smt_ = 0.0;
};

/// Replicate losses reduced in replicate order (bit-stable for any worker count).
RiskMoments reduce_in_order(const std::vector<LossParts>& parts);

/// Known-parameter Monte Carlo (SKP). Replicate r uses StreamSet(seed, r).
/// Effects missing from `cov` are redrawn from the population law per replicate.
RiskMoments risk_moments_skp(const ModelParams& params, const SubjectCovariates& cov,
                             const VisitSchedule& schedule, const StrategySpec& strategy,
                             const RiskSpec& spec, long k, std::uint64_t seed, int workers = 1);

RiskEstimate estimate_risk_skp(const ModelParams& params, const SubjectCovariates& cov,
                               const VisitSchedule& schedule, const StrategySpec& strategy,
                               const RiskSpec& spec, long k, std::uint64_t seed, int workers = 1);

/// Monte Carlo over a Gaussian posterior on (mu0_i, mu1_i) (SPDP): each
/// replicate draws the effects, then runs one known-parameter replicate. The
/// strategy's belief is the posterior itself.
RiskMoments risk_moments_spdp(const Posterior& posterior, const ModelParams& params,
                              const SubjectCovariates& cov, const VisitSchedule& schedule,
                              const StrategySpec& strategy, const RiskSpec& spec, long k,
                              std::uint64_t seed, int workers = 1);

RiskEstimate estimate_risk_spdp(const Posterior& posterior, const ModelParams& params,
                                const SubjectCovariates& cov, const VisitSchedule& schedule,
                                const StrategySpec& strategy, const RiskSpec& spec, long k,
                                std::uint64_t seed, int workers = 1);

/// Marginal risk: covariates and effects drawn from the population per replicate.
RiskEstimate estimate_risk_marginal(const PopulationSpec& pop, const VisitSchedule& schedule,
                                    const StrategySpec& strategy, const RiskSpec& spec, long k,
                                    std::uint64_t seed, int workers = 1);

struct Effect {
  double value = 0.0;
  double se = 0.0;
};

/// a.total - b.total with SE sqrt(se_a^2 + se_b^2). Throws ContractError when
/// the two estimates use different risk specifications.
Effect contrast(const RiskEstimate& a, const RiskEstimate& b);

}  // namespace dyncontrol
