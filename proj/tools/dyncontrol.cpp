#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dyncontrol/config.hpp"
#include "dyncontrol/dtdr.hpp"
#include "dyncontrol/errors.hpp"
#include "dyncontrol/inference.hpp"
#include "dyncontrol/io.hpp"
#include "dyncontrol/oracle.hpp"
#include "dyncontrol/replicate.hpp"

namespace fs = std::filesystem;
using namespace dyncontrol;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitNotConverged = 4;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
  std::optional<std::string> scenario;
  std::optional<std::string> table;
  std::optional<std::string> scale;
};

RunConfig resolve(const Overrides& o) {
  json doc;
  {
    std::ifstream in(o.config);
    if (!in) throw ConfigError("cannot open config '" + o.config + "'");
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  json& run = doc["run"];
  if (run.is_null()) run = json::object();
  if (o.seed) run["seed"] = *o.seed;
  if (o.workers) run["workers"] = *o.workers;
  if (o.out) run["out"] = *o.out;
  if (o.scenario) run["scenario"] = *o.scenario;
  if (o.table) run["table"] = *o.table;
  if (o.scale) run["scale"] = *o.scale;
  return parse_config(doc);
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.run.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "'");
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw ConfigError("cannot write '" + p.string() + "'");
  return os;
}

OutputTag tag_of(const RunConfig& cfg) { return {cfg.hash(), cfg.run.seed}; }

json meta_of(const RunConfig& cfg) {
  return {{"version", kVersion},
          {"config_hash", cfg.hash()},
          {"seed", cfg.run.seed},
          {"config", cfg.resolved()}};
}

void write_json(const fs::path& p, const json& j) {
  auto os = open_out(p);
  os << j.dump(2) << '\n';
}

int cmd_simulate_cohort(const RunConfig& cfg) {
  PopulationSpec pop = cfg.population;
  Cohort cohort;
  const std::string& sc = cfg.run.scenario;
  if (sc.empty()) {
    cohort = simulate_cohort(pop, cfg.assignment, cfg.schedule, cfg.run.seed);
  } else if (sc == "never") {
    cohort = simulate_cohort_under(pop, NeverTreat{}, cfg.schedule, cfg.run.seed);
  } else if (sc == "threshold0") {
    cohort = simulate_cohort_under(pop, DeterministicThreshold{0.0, 0.0}, cfg.schedule, cfg.run.seed);
  } else {
    cohort = simulate_cohort_under(pop, AlwaysTreat{}, cfg.schedule, cfg.run.seed);
  }
  const fs::path dir = out_dir(cfg);
  {
    auto os = open_out(dir / "cohort.csv");
    write_cohort_csv(os, cohort, tag_of(cfg));
  }
  json meta = cohort_metadata(cohort);
  meta["meta"] = meta_of(cfg);
  meta["scenario"] = sc.empty() ? "observational" : sc;
  write_json(dir / "cohort.json", meta);
  std::cout << "wrote " << (dir / "cohort.csv").string() << " (" << cohort.subjects.size()
            << " subjects, treated time fraction " << cohort.treated_time_fraction() << ")\n";
  return kExitOk;
}

int cmd_fit(const RunConfig& cfg) {
  if (cfg.run.cohort.empty()) throw ConfigError("fit needs run.cohort");
  std::ifstream in(cfg.run.cohort);
  if (!in) throw ConfigError("cannot open cohort '" + cfg.run.cohort + "'");
  Cohort cohort;
  try {
    cohort = read_cohort_csv(in);
  } catch (const AlignmentError& e) {
    throw ConfigError(std::string("cohort: ") + e.what());
  }
  const FittedModel fit = fit_ml(cohort, default_init(cohort));
  json out = to_json(fit);
  if (cfg.run.bootstrap >= 2 && fit.converged) {
    const BootstrapResult b = bootstrap_se(cohort, fit, cfg.run.bootstrap, cfg.run.seed);
    json sd = json::object();
    for (std::size_t i = 0; i < kParamNames.size(); ++i) sd[std::string(kParamNames[i])] = b.sd[i];
    out["bootstrap"] = {{"sd", sd}, {"resamples", cfg.run.bootstrap}, {"used", b.used}, {"dropped", b.dropped}};
  }
  out["meta"] = meta_of(cfg);
  out["subjects"] = cohort.subjects.size();
  const fs::path dir = out_dir(cfg);
  write_json(dir / "fit.json", out);
  std::cout << "loglik " << fit.loglik << ", iterations " << fit.iterations
            << (fit.converged ? ", converged\n" : ", NOT converged\n");
  return fit.converged ? kExitOk : kExitNotConverged;
}

RiskEstimate estimate_for(const RunConfig& cfg, const StrategySpec& s, long k) {
  if (cfg.run.estimator == "spdp") {
    SubjectCovariates cov = cfg.subject;
    const Posterior prior = Posterior::from_prior(effects_prior(cfg.model, cov));
    cov.mu0i.reset();
    cov.mu1i.reset();
    return estimate_risk_spdp(prior, cfg.model, cov, cfg.schedule, s, cfg.risk, k, cfg.run.seed,
                              cfg.run.workers);
  }
  return estimate_risk_skp(cfg.model, cfg.subject, cfg.schedule, s, cfg.risk, k, cfg.run.seed,
                           cfg.run.workers);
}

int cmd_risk(const RunConfig& cfg) {
  const RiskEstimate e = estimate_for(cfg, cfg.strategy, cfg.run.k);
  const fs::path dir = out_dir(cfg);
  {
    auto os = open_out(dir / "risk.csv");
    write_risk_csv(os, {{strategy_tag(cfg.strategy), e}}, tag_of(cfg));
  }
  json out = to_json(e);
  out["strategy"] = to_json(cfg.strategy);
  out["estimator"] = cfg.run.estimator;
  out["meta"] = meta_of(cfg);
  write_json(dir / "risk.json", out);
  std::cout << "risk " << e.total << " (se " << e.mc_se << ", k " << e.k << ")\n";
  return kExitOk;
}

int cmd_optimize(const RunConfig& cfg) {
  SearchConfig search = cfg.search;
  search.seed = cfg.run.seed;
  search.workers = cfg.run.workers;
  RiskSpec spec = cfg.risk;
  const auto make = cfg.run.estimator == "spdp"
                        ? spdp_components(cfg.model, cfg.schedule, spec, search.k_eval, cfg.run.seed, 1)
                        : skp_components(cfg.model, cfg.schedule, spec, search.k_eval, cfg.run.seed, 1);
  const auto rows = sweep_omega(cfg.run.omegas, search, cfg.run.profiles, spec, make);
  const fs::path dir = out_dir(cfg);
  auto os = open_out(dir / "sweep.csv");
  write_sweep_csv(os, rows, tag_of(cfg));
  std::cout << "wrote " << rows.size() << " sweep rows to " << (dir / "sweep.csv").string() << '\n';
  return kExitOk;
}

int cmd_dtdr_run(const RunConfig& cfg) {
  SearchConfig search = cfg.search;
  search.workers = cfg.run.workers;
  SubjectCovariates observed = cfg.subject;
  observed.mu0i.reset();
  observed.mu1i.reset();
  const fs::path dir = out_dir(cfg);
  auto os = open_out(dir / "trace.csv");
  json episodes = json::array();
  double loss_sum = 0.0;
  for (int e = 0; e < cfg.run.episodes; ++e) {
    StreamSet streams(cfg.run.seed, static_cast<std::uint64_t>(e));
    const SubjectCovariates truth = realize_effects(cfg.model, cfg.subject, streams);
    EffectsPrior belief = effects_prior(cfg.model, observed);
    belief.cov *= cfg.run.prior_scale;
    if (cfg.run.prior_scale == 0.0) belief.mean = {*truth.mu0i, *truth.mu1i};
    SimulatedSubject env(cfg.model, truth, cfg.schedule, streams);
    const DtdrTrace trace = dtdr_run(Posterior::from_prior(belief), cfg.model, observed,
                                     cfg.schedule, cfg.risk, search, env,
                                     mix64(cfg.run.seed ^ static_cast<std::uint64_t>(e)));
    write_trace_csv(os, trace, tag_of(cfg), cfg.run.episodes > 1 ? e : -1);
    const LossParts parts = loss_parts(env.trajectory(), cfg.risk);
    const double loss = parts.marker + cfg.risk.omega * parts.treatment;
    loss_sum += loss;
    episodes.push_back({{"episode", e}, {"loss", loss}, {"truncated", trace.truncated}});
  }
  json summary = {{"episodes", episodes},
                  {"mean_loss", loss_sum / cfg.run.episodes},
                  {"meta", meta_of(cfg)}};
  write_json(dir / "dtdr.json", summary);
  std::cout << "mean realized loss " << loss_sum / cfg.run.episodes << " over "
            << cfg.run.episodes << " episode(s)\n";
  return kExitOk;
}

int cmd_oracle_check(const RunConfig& cfg) {
  std::vector<StrategySpec> strategies = cfg.strategies;
  if (strategies.empty()) {
    strategies = {NeverTreat{}, AlwaysTreat{}, PersonalizedThreshold{0.0},
                  LogisticStochastic{-1.0, 1.5, 0.0, 0.8, 0.0}};
    if (cfg.raw.contains("strategy")) strategies.push_back(cfg.strategy);
  }
  json report = json::array();
  bool all_ok = true;
  for (const auto& s : strategies) {
    const OracleResult oracle = oracle_risk(cfg.model, cfg.subject, cfg.schedule, s, cfg.risk);
    const RiskEstimate mc = estimate_risk_skp(cfg.model, cfg.subject, cfg.schedule, s, cfg.risk,
                                              cfg.run.k, cfg.run.seed, cfg.run.workers);
    const double diff = std::abs(mc.total - oracle.estimate.total);
    const bool ok = diff <= 3.0 * mc.mc_se + 1e-12;
    all_ok = all_ok && ok;
    json row = {{"strategy", to_json(s)},
                {"oracle", oracle.estimate.total},
                {"monte_carlo", mc.total},
                {"abs_diff", diff},
                {"se", mc.mc_se},
                {"within_3se", ok},
                {"mass_error", oracle.max_mass_error}};
    if (std::holds_alternative<NeverTreat>(s) || std::holds_alternative<AlwaysTreat>(s)) {
      const auto regime = std::holds_alternative<AlwaysTreat>(s) ? FixedRegime::kAlways : FixedRegime::kNever;
      row["closed_form"] = closed_form_fixed_regime(cfg.model, cfg.subject, cfg.schedule, regime, cfg.risk).total;
    }
    report.push_back(row);
    std::cout << strategy_tag(s) << ": oracle " << oracle.estimate.total << ", MC " << mc.total
              << " (se " << mc.mc_se << ")" << (ok ? "" : "  [outside 3 se]") << '\n';
  }
  const fs::path dir = out_dir(cfg);
  write_json(dir / "oracle_check.json", {{"results", report}, {"all_within_3se", all_ok}, {"meta", meta_of(cfg)}});
  return kExitOk;
}

int cmd_replicate(const RunConfig& cfg) {
  const bool full = cfg.run.scale == "full";
  const fs::path dir = out_dir(cfg);
  const std::string& t = cfg.run.table;
  if (full) {
    std::cerr << "full scale: expected runtime "
              << (t == "1" ? "several hours (1000 fits of N=1000)" : "tens of minutes (K=1e5)")
              << " on one core; proceeding\n";
  }
  const auto start = std::chrono::steady_clock::now();
  if (t == "1") {
    EstimationStudy study = estimation_study(cfg.run.scale);
    study.seed = cfg.run.seed;
    study.workers = cfg.run.workers;
    study.bootstrap = cfg.run.bootstrap;
    const EstimationResult r = run_estimation_study(study, cfg.model, cfg.assignment);
    auto os = open_out(dir / "table1.csv");
    write_estimation_csv(os, r, tag_of(cfg));
  } else if (t == "2" || t == "3") {
    const long k = full ? 100000 : 10000;
    const auto rows = run_optimal_table(std::stoi(t), k, cfg.search, cfg.run.seed, cfg.run.workers);
    auto os = open_out(dir / ("table" + t + ".csv"));
    write_table_csv(os, rows, tag_of(cfg));
  } else if (t == "fig3") {
    const auto pts = run_risk_curve(full ? 100000 : 10000, -15.0, 40.0, full ? 0.1 : 0.25,
                                    cfg.run.seed, cfg.run.workers);
    auto os = open_out(dir / "fig3_curve.csv");
    write_curve_csv(os, pts, tag_of(cfg));
  } else {
    const auto rows = run_optimal_table(3, full ? 100000 : 10000, cfg.search, cfg.run.seed, cfg.run.workers);
    auto os = open_out(dir / "fig4_sweep.csv");
    write_sweep_csv(os, rows, tag_of(cfg));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "replicate " << t << " (" << cfg.run.scale << ") done in " << secs << " s\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation, estimation and optimization of dynamic treatment strategies"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration")->required();
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--workers", o.workers, "worker threads");
    sub->add_option("--out", o.out, "output directory");
  };
  auto* sim = app.add_subcommand("simulate-cohort", "simulate an observational or scenario cohort");
  add_common(sim);
  sim->add_option("--scenario", o.scenario, "never | threshold0 | always");
  auto* fit = app.add_subcommand("fit", "maximum-likelihood fit of a cohort CSV");
  add_common(fit);
  auto* risk = app.add_subcommand("risk", "Monte Carlo risk of one strategy");
  add_common(risk);
  auto* opt = app.add_subcommand("optimize", "optimal thresholds over omega and profiles");
  add_common(opt);
  auto* dtdr = app.add_subcommand("dtdr-run", "adaptive threshold rule episodes");
  add_common(dtdr);
  auto* oracle = app.add_subcommand("oracle-check", "quadrature oracle against Monte Carlo");
  add_common(oracle);
  auto* rep = app.add_subcommand("replicate", "regenerate a reference table (1, 2 or 3)");
  add_common(rep);
  rep->add_option("--table", o.table, "1 | 2 | 3 | fig3 | fig4");
  rep->add_option("--scale", o.scale, "desk | full");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const RunConfig cfg = resolve(o);
    if (sim->parsed()) return cmd_simulate_cohort(cfg);
    if (fit->parsed()) return cmd_fit(cfg);
    if (risk->parsed()) return cmd_risk(cfg);
    if (opt->parsed()) return cmd_optimize(cfg);
    if (dtdr->parsed()) return cmd_dtdr_run(cfg);
    if (oracle->parsed()) return cmd_oracle_check(cfg);
    return cmd_replicate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}
