#pragma once

#include <cstdint>
#include <iosfwd>
#include <json.hpp>
#include <string>
#include <vector>

#include "dyncontrol/dtdr.hpp"
#include "dyncontrol/inference.hpp"
#include "dyncontrol/optimizer.hpp"
#include "dyncontrol/risk.hpp"
#include "dyncontrol/simulation.hpp"
#include "dyncontrol/strategy.hpp"

namespace dyncontrol {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.3.0";

/// FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const json& config);

/// Provenance written as the first line of every CSV:
///   # dyncontrol <version> schema=<name>/<n> config=<hash> seed=<seed>
struct OutputTag {
  std::string config_hash = "none";
  std::uint64_t seed = 0;
};
std::string csv_header_line(const std::string& schema, const OutputTag& tag);

json to_json(const ModelParams& p);
ModelParams params_from_json(const json& j, const ModelParams& base = {});

json to_json(const StrategySpec& s);
StrategySpec strategy_from_json(const json& j);

json to_json(const RiskSpec& s);
RiskSpec risk_spec_from_json(const json& j, const RiskSpec& base = {});

json to_json(const RiskEstimate& e);
json to_json(const FittedModel& f);
json to_json(const ObservationalAssignmentModel& m);

/// Cohort CSV: subject_id, visit_index, time, C, D, A, Z.
void write_cohort_csv(std::ostream& os, const Cohort& cohort, const OutputTag& tag);
/// Reads the cohort CSV. Rows of a subject must be contiguous with visit
/// indices 0..J in order; anything else raises AlignmentError.
Cohort read_cohort_csv(std::istream& is);
json cohort_metadata(const Cohort& cohort);

/// total, cost_y, cost_trt, pct_treated, se, k
void write_risk_csv(std::ostream& os, const std::vector<std::pair<std::string, RiskEstimate>>& rows,
                    const OutputTag& tag);

/// omega, profile_d, profile_c, beta_star, cost_y, cost_trt, total, pct_treated, mc_se
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, const OutputTag& tag);

/// visit, time, beta_star, decision, z, nu0, nu1, omega00, omega01, omega11
void write_trace_csv(std::ostream& os, const DtdrTrace& trace, const OutputTag& tag,
                     int episode = -1);

}  // namespace dyncontrol
