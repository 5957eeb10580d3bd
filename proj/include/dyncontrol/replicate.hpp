#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "dyncontrol/io.hpp"
#include "dyncontrol/optimizer.hpp"
#include "dyncontrol/simulation.hpp"

namespace dyncontrol {

struct EstimationStudy {
  int replicates = 200;
  int n = 500;
  int J = 10;
  int bootstrap = 0;  ///< resamples on the first cohort; 0 skips the column
  std::uint64_t seed = 1;
  int workers = 1;
};

/// desk: 200 replicates of N=500; full: 1000 replicates of N=1000.
EstimationStudy estimation_study(const std::string& scale);

struct EstimationRow {
  std::string param;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double sd = 0.0;        ///< empirical SD of the estimates
  double mean_se = 0.0;   ///< average observed-information SE
  double bootstrap_sd = std::numeric_limits<double>::quiet_NaN();
  double coverage = 0.0;  ///< share of 95% Wald intervals containing the truth
};

struct EstimationResult {
  std::vector<EstimationRow> rows;
  int used = 0;     ///< converged fits with a usable vcov
  int dropped = 0;
};

/// Repeated simulate-then-fit under the observational generator.
EstimationResult run_estimation_study(const EstimationStudy& study, const ModelParams& truth,
                                      const ObservationalAssignmentModel& assignment);

void write_estimation_csv(std::ostream& os, const EstimationResult& r, const OutputTag& tag);

/// Risk setup of the reference sweeps: additive exceedance with eta = 1.7,
/// scored at all ten visits t = 0..9.
RiskSpec table_risk_spec();
VisitSchedule table_schedule();

/// Optimal thresholds over the 13 omegas for the 4 profiles: known effects
/// (SKP, table=2) or effects uncertain with the population spread (SPDP, table=3).
std::vector<SweepRow> run_optimal_table(int table, long k, const SearchConfig& search,
                                        std::uint64_t seed, int workers);

/// Wide layout: one row per (C, omega) with D=0 and D=1 column blocks.
void write_table_csv(std::ostream& os, const std::vector<SweepRow>& rows, const OutputTag& tag);

struct CurvePoint {
  double beta = 0.0;
  double omega = 0.0;
  RiskEstimate estimate;
};

/// Risk as a function of the threshold for profile (D=0, C=-0.5) under SPDP at
/// omega in {0, 0.4, 0.6, 1, 3}.
std::vector<CurvePoint> run_risk_curve(long k, double beta_lo, double beta_hi, double step,
                                       std::uint64_t seed, int workers);
void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& pts, const OutputTag& tag);

}  // namespace dyncontrol
