#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dyncontrol/io.hpp"
#include "dyncontrol/optimizer.hpp"
#include "dyncontrol/risk.hpp"
#include "dyncontrol/simulation.hpp"

namespace dyncontrol {

/// Fields of the "run" section.
struct RunSection {
  std::uint64_t seed = 1;
  int workers = 1;
  long k = 10000;                 ///< Monte Carlo replicates
  std::string out = "out";
  std::string cohort;             ///< input CSV for fit
  std::string estimator = "skp";  ///< skp | spdp
  std::string scenario;           ///< never | threshold0 | always (simulate-cohort)
  std::string table = "2";        ///< 1 | 2 | 3 | fig3 | fig4 (replicate)
  std::string scale = "desk";     ///< desk | full
  int bootstrap = 0;              ///< fit: parametric bootstrap resamples
  int episodes = 1;               ///< dtdr-run
  double prior_scale = 1.0;       ///< dtdr-run: multiplies the population effect variances
  std::vector<double> omegas;
  std::vector<Profile> profiles;
};

/// One resolved run. `subject` is the profile used by risk and dtdr-run,
/// optionally with known effects.
struct RunConfig {
  ModelParams model = ModelParams::illustration();
  PopulationSpec population;
  VisitSchedule schedule = VisitSchedule::uniform(10);
  StrategySpec strategy = NeverTreat{};
  std::vector<StrategySpec> strategies;  ///< oracle-check; empty means the defaults
  ObservationalAssignmentModel assignment;
  RiskSpec risk;
  SearchConfig search;
  SubjectCovariates subject;
  RunSection run;
  json raw;  ///< the document as given

  /// Fully resolved document; what outputs embed.
  json resolved() const;
  std::string hash() const { return config_hash(resolved()); }
};

/// Sections: model, population, schedule, strategy, strategies, assignment,
/// risk, search, subject, run. Unknown sections or keys raise ConfigError.
RunConfig parse_config(const json& doc);
RunConfig load_config(const std::string& path);

/// The 13 omegas and 4 profiles of the reference sweeps.
std::vector<double> default_omegas();
std::vector<Profile> default_profiles();

}  // namespace dyncontrol
