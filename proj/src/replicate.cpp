#include "dyncontrol/replicate.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "dyncontrol/errors.hpp"
#include "dyncontrol/inference.hpp"
#include "dyncontrol/parallel.hpp"
#include "dyncontrol/random.hpp"
#include "dyncontrol/stats.hpp"

namespace dyncontrol {

EstimationStudy estimation_study(const std::string& scale) {
  EstimationStudy s;
  if (scale == "full") {
    s.replicates = 1000;
    s.n = 1000;
  } else if (scale != "desk") {
    throw ConfigError("scale must be desk or full");
  }
  return s;
}

EstimationResult run_estimation_study(const EstimationStudy& study, const ModelParams& truth,
                                      const ObservationalAssignmentModel& assignment) {
  if (study.replicates < 2) throw ContractError("need at least 2 replicates");
  PopulationSpec pop;
  pop.n = study.n;
  pop.params = truth;
  const VisitSchedule schedule = VisitSchedule::uniform(study.J);
  struct Fit {
    bool ok = false;
    Eigen::VectorXd est, se;
  };
  std::vector<Fit> fits(static_cast<std::size_t>(study.replicates));
  parallel_for(fits.size(), study.workers, [&](std::size_t r) {
    const Cohort cohort = simulate_cohort(pop, assignment, schedule, mix64(study.seed + r));
    try {
      const FittedModel f = fit_ml(cohort, default_init(cohort));
      if (!f.converged || !f.vcov.allFinite()) return;
      fits[r] = {true, to_vector(f.estimates), f.standard_errors()};
    } catch (const Error&) {
    }
  });

  EstimationResult out;
  const Eigen::Matrix<double, 9, 1> tv = to_vector(truth);
  std::vector<std::vector<double>> est(9);
  std::vector<double> se_sum(9, 0.0), covered(9, 0.0);
  for (const auto& f : fits) {
    if (!f.ok) {
      ++out.dropped;
      continue;
    }
    ++out.used;
    for (int p = 0; p < 9; ++p) {
      est[p].push_back(f.est[p]);
      se_sum[p] += f.se[p];
      if (std::abs(f.est[p] - tv[p]) <= 1.959963984540054 * f.se[p]) covered[p] += 1.0;
    }
  }
  if (out.used < 2) throw DegenerateModelError("fewer than two replicate fits converged");

  Eigen::VectorXd boot;
  if (study.bootstrap >= 2) {
    const Cohort first = simulate_cohort(pop, assignment, schedule, mix64(study.seed));
    const FittedModel f = fit_ml(first, default_init(first));
    if (f.converged) boot = bootstrap_se(first, f, study.bootstrap, mix64(study.seed ^ 0xb007ULL)).sd;
  }
  for (int p = 0; p < 9; ++p) {
    const SampleSummary s = summarize(est[p]);
    EstimationRow row;
    row.param = std::string(kParamNames[p]);
    row.truth = tv[p];
    row.mean = s.mean;
    row.bias = s.mean - tv[p];
    row.sd = s.sd;
    row.mean_se = se_sum[p] / out.used;
    row.coverage = covered[p] / out.used;
    if (boot.size() == 9) row.bootstrap_sd = boot[p];
    out.rows.push_back(row);
  }
  return out;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void write_estimation_csv(std::ostream& os, const EstimationResult& r, const OutputTag& tag) {
  os << csv_header_line("table1/1", tag) << '\n';
  os << "# converged=" << r.used << " dropped=" << r.dropped << '\n';
  os << "parameter,truth,mean,bias,sd,mean_se,bootstrap_sd,coverage\n";
  for (const auto& row : r.rows) {
    os << row.param << ',' << num(row.truth) << ',' << num(row.mean) << ',' << num(row.bias) << ','
       << num(row.sd) << ',' << num(row.mean_se) << ',' << num(row.bootstrap_sd) << ','
       << num(row.coverage) << '\n';
  }
}

RiskSpec table_risk_spec() {
  RiskSpec s;
  s.kind = RiskKind::kAdditiveExceedance;
  s.eta = 1.7;
  s.window = ScoringWindow::kAllVisits;
  return s;
}

VisitSchedule table_schedule() { return VisitSchedule::uniform(9); }

std::vector<SweepRow> run_optimal_table(int table, long k, const SearchConfig& search,
                                        std::uint64_t seed, int workers) {
  const RiskSpec spec = table_risk_spec();
  const VisitSchedule schedule = table_schedule();
  SearchConfig cfg = search;
  cfg.workers = workers;
  std::vector<Profile> profiles = {{0, 0.5}, {1, 0.5}, {0, -0.5}, {1, -0.5}};
  const std::vector<double> omegas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6,
                                      0.7, 0.8, 0.9, 1.0, 1.5, 3.0};
  if (table == 2) {
    return sweep_omega(omegas, cfg, profiles, spec,
                       skp_components(ModelParams::illustration_known_effects(), schedule, spec, k,
                                      seed, 1));
  }
  if (table == 3) {
    return sweep_omega(omegas, cfg, profiles, spec,
                       spdp_components(ModelParams::illustration(), schedule, spec, k, seed, 1));
  }
  throw ContractError("optimal tables are 2 and 3");
}

void write_table_csv(std::ostream& os, const std::vector<SweepRow>& rows, const OutputTag& tag) {
  os << csv_header_line("table23/1", tag) << '\n';
  os << "C,omega";
  for (int d = 0; d < 2; ++d) {
    for (const char* col : {"beta_star", "cost_y", "cost_trt", "total", "pct_treated", "mc_se"}) {
      os << ",d" << d << '_' << col;
    }
  }
  os << '\n';
  std::map<std::pair<double, double>, std::map<int, SweepRow>, std::greater<>> grouped;
  for (const auto& r : rows) grouped[{r.profile.c, -r.omega}][r.profile.d] = r;
  for (const auto& [key, by_d] : grouped) {
    os << num(key.first) << ',' << num(-key.second);
    for (int d = 0; d < 2; ++d) {
      auto it = by_d.find(d);
      if (it == by_d.end()) {
        os << ",,,,,,";
        continue;
      }
      const SweepRow& r = it->second;
      os << ',' << num(r.beta_star) << ',' << num(r.cost_y) << ',' << num(r.cost_trt) << ','
         << num(r.total) << ',' << num(r.pct_treated) << ',' << num(r.mc_se);
    }
    os << '\n';
  }
}

std::vector<CurvePoint> run_risk_curve(long k, double beta_lo, double beta_hi, double step,
                                       std::uint64_t seed, int workers) {
  if (!(step > 0.0) || !(beta_lo < beta_hi)) throw ContractError("bad beta range");
  const RiskSpec spec = table_risk_spec();
  const ModelParams params = ModelParams::illustration();
  SubjectCovariates cov;
  cov.c = -0.5;
  cov.d = 0;
  const Posterior prior = Posterior::from_prior(effects_prior(params, cov));
  const int n = static_cast<int>(std::floor((beta_hi - beta_lo) / step + 1e-9)) + 1;
  std::vector<RiskMoments> moments(static_cast<std::size_t>(n));
  parallel_for(moments.size(), workers, [&](std::size_t i) {
    moments[i] = risk_moments_spdp(prior, params, cov, table_schedule(),
                                   PersonalizedThreshold{beta_lo + step * static_cast<double>(i)},
                                   spec, k, seed, 1);
  });
  std::vector<CurvePoint> out;
  for (double omega : {0.0, 0.4, 0.6, 1.0, 3.0}) {
    RiskSpec s = spec;
    s.omega = omega;
    for (int i = 0; i < n; ++i) {
      out.push_back({beta_lo + step * i, omega, moments[static_cast<std::size_t>(i)].estimate(s)});
    }
  }
  return out;
}

void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& pts, const OutputTag& tag) {
  os << csv_header_line("curve/1", tag) << '\n';
  os << "omega,beta,cost_y,cost_trt,total,pct_treated,mc_se\n";
  for (const auto& p : pts) {
    os << num(p.omega) << ',' << num(p.beta) << ',' << num(p.estimate.cost_marker) << ','
       << num(p.estimate.cost_treatment) << ',' << num(p.estimate.total) << ','
       << num(p.estimate.fraction_treated) << ',' << num(p.estimate.mc_se) << '\n';
  }
}

}  // namespace dyncontrol
