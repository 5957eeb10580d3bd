#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "dyncontrol/risk.hpp"

namespace dyncontrol {

struct SearchConfig {
  double beta_lo = -15.0;
  double beta_hi = 40.0;
  int grid_n = 64;
  double refine_tol = 0.05;
  long k_eval = 2000;
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const;
};

/// Risk as a function of the threshold. Must be deterministic in beta (common
/// random numbers: the same seed for every beta).
using RiskEvaluator = std::function<RiskEstimate(double beta)>;

struct ThresholdOptimum {
  double beta = 0.0;
  RiskEstimate estimate;
  bool never_treat_boundary = false;  ///< optimum sits at beta_hi or never treats
  int evaluations = 0;
};

/// Golden-section minimizer of a scalar function on [a, b]; returns the
/// abscissa of the best evaluated point.
double golden_section_minimize(const std::function<double(double)>& f, double a, double b,
                               double tol);

/// Coarse grid over [beta_lo, beta_hi], then golden-section refinement on the
/// cells adjacent to the best grid point. Exact ties prefer the larger beta
/// (less treatment).
ThresholdOptimum optimize_threshold(const RiskEvaluator& evaluator, const SearchConfig& cfg);

/// Purely local search from `start`: probes start +/- step, follows descent
/// while it improves, then golden-refines. No global stage.
ThresholdOptimum local_threshold_search(const RiskEvaluator& evaluator, double start, double step,
                                        double tol, int max_moves = 50);

/// A patient profile (D, C) for sweeps.
struct Profile {
  int d = 0;
  double c = 0.0;
};

/// Omega-free risk components at a threshold; RiskMoments::estimate(spec)
/// turns them into a RiskEstimate for any omega.
using ComponentEvaluator = std::function<RiskMoments(double beta)>;

struct SweepRow {
  double omega = 0.0;
  Profile profile;
  double beta_star = 0.0;
  double cost_y = 0.0;
  double cost_trt = 0.0;
  double total = 0.0;
  double pct_treated = 0.0;
  double mc_se = 0.0;
  bool never_treat_boundary = false;
};

/// One optimize_threshold call per (omega, profile); all omegas of a profile
/// share the same replicates. A final pass takes, for every omega, the best of
/// all thresholds evaluated anywhere in that profile's sweep.
std::vector<SweepRow> sweep_omega(const std::vector<double>& omegas, const SearchConfig& cfg,
                                  const std::vector<Profile>& profiles, const RiskSpec& base_spec,
                                  const std::function<ComponentEvaluator(const Profile&)>& make);

/// Evaluator factory for known-effect (SKP) or posterior (SPDP) risk of
/// PersonalizedThreshold(beta) for a profile.
std::function<ComponentEvaluator(const Profile&)> skp_components(const ModelParams& params,
                                                                 const VisitSchedule& schedule,
                                                                 const RiskSpec& spec, long k,
                                                                 std::uint64_t seed,
                                                                 int workers = 1);
std::function<ComponentEvaluator(const Profile&)> spdp_components(const ModelParams& params,
                                                                  const VisitSchedule& schedule,
                                                                  const RiskSpec& spec, long k,
                                                                  std::uint64_t seed,
                                                                  int workers = 1);

}  // namespace dyncontrol
