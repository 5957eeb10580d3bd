#include "dyncontrol/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "dyncontrol/errors.hpp"

namespace dyncontrol {

namespace {

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(std::string("unknown key '") + key + "' in " + section);
    }
  }
}

template <typename T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

VisitSchedule parse_schedule(const json& j) {
  check_keys(j, "schedule", {"J", "step", "t0", "times"});
  try {
    if (j.contains("times")) {
      if (j.contains("J")) throw ConfigError("schedule: give either 'times' or 'J', not both");
      return VisitSchedule(j.at("times").get<std::vector<double>>());
    }
    return VisitSchedule::uniform(get<int>(j, "J", 10), get<double>(j, "step", 1.0),
                                  get<double>(j, "t0", 0.0));
  } catch (const InvalidScheduleError& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
}

}  // namespace

std::vector<double> default_omegas() {
  return {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.5, 3.0};
}

std::vector<Profile> default_profiles() { return {{1, 0.5}, {1, -0.5}, {0, 0.5}, {0, -0.5}}; }

RunConfig parse_config(const json& doc) {
  check_keys(doc, "config", {"model", "population", "schedule", "strategy", "strategies",
                             "assignment", "risk", "search", "subject", "run"});
  RunConfig cfg;
  cfg.raw = doc;
  try {
    if (doc.contains("model")) cfg.model = params_from_json(doc.at("model"), cfg.model);
    cfg.model.validate();
  } catch (const InvalidParamsError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  cfg.population.params = cfg.model;
  if (doc.contains("population")) {
    const json& p = doc.at("population");
    check_keys(p, "population", {"n", "prob_d"});
    cfg.population.n = get<int>(p, "n", 500);
    cfg.population.prob_d = get<double>(p, "prob_d", 0.6);
  } else {
    cfg.population.n = 500;
  }
  try {
    cfg.population.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("population: ") + e.what());
  }
  if (doc.contains("schedule")) cfg.schedule = parse_schedule(doc.at("schedule"));
  if (doc.contains("strategy")) cfg.strategy = strategy_from_json(doc.at("strategy"));
  if (doc.contains("strategies")) {
    if (!doc.at("strategies").is_array()) throw ConfigError("strategies must be an array");
    for (const auto& s : doc.at("strategies")) cfg.strategies.push_back(strategy_from_json(s));
  }
  if (doc.contains("assignment")) {
    const json& a = doc.at("assignment");
    check_keys(a, "assignment", {"alpha0", "alphaZ", "alphaC", "alphaD", "absorbing"});
    cfg.assignment.alpha0 = get<double>(a, "alpha0", cfg.assignment.alpha0);
    cfg.assignment.alphaZ = get<double>(a, "alphaZ", cfg.assignment.alphaZ);
    cfg.assignment.alphaC = get<double>(a, "alphaC", cfg.assignment.alphaC);
    cfg.assignment.alphaD = get<double>(a, "alphaD", cfg.assignment.alphaD);
    cfg.assignment.absorbing = get<bool>(a, "absorbing", cfg.assignment.absorbing);
  }
  if (doc.contains("risk")) {
    check_keys(doc.at("risk"), "risk", {"kind", "eta", "omega", "window"});
    cfg.risk = risk_spec_from_json(doc.at("risk"));
  }
  if (doc.contains("search")) {
    const json& s = doc.at("search");
    check_keys(s, "search", {"beta_lo", "beta_hi", "grid_n", "refine_tol", "k_eval"});
    cfg.search.beta_lo = get<double>(s, "beta_lo", cfg.search.beta_lo);
    cfg.search.beta_hi = get<double>(s, "beta_hi", cfg.search.beta_hi);
    cfg.search.grid_n = get<int>(s, "grid_n", cfg.search.grid_n);
    cfg.search.refine_tol = get<double>(s, "refine_tol", cfg.search.refine_tol);
    cfg.search.k_eval = get<long>(s, "k_eval", cfg.search.k_eval);
  }
  cfg.search.validate();
  if (doc.contains("subject")) {
    const json& s = doc.at("subject");
    check_keys(s, "subject", {"c", "d", "mu0i", "mu1i"});
    cfg.subject.c = get<double>(s, "c", 0.0);
    cfg.subject.d = get<int>(s, "d", 0);
    if (s.contains("mu0i")) cfg.subject.mu0i = get<double>(s, "mu0i", 0.0);
    if (s.contains("mu1i")) cfg.subject.mu1i = get<double>(s, "mu1i", 0.0);
    try {
      cfg.subject.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("subject: ") + e.what());
    }
  }
  RunSection& r = cfg.run;
  if (doc.contains("run")) {
    const json& j = doc.at("run");
    check_keys(j, "run", {"seed", "workers", "k", "out", "cohort", "estimator", "scenario", "table",
                          "scale", "bootstrap", "episodes", "prior_scale", "omegas", "profiles"});
    r.seed = get<std::uint64_t>(j, "seed", r.seed);
    r.workers = get<int>(j, "workers", r.workers);
    r.k = get<long>(j, "k", r.k);
    r.out = get<std::string>(j, "out", r.out);
    r.cohort = get<std::string>(j, "cohort", r.cohort);
    r.estimator = get<std::string>(j, "estimator", r.estimator);
    r.scenario = get<std::string>(j, "scenario", r.scenario);
    if (j.contains("table")) {
      r.table = j.at("table").is_number() ? std::to_string(j.at("table").get<int>())
                                          : get<std::string>(j, "table", r.table);
    }
    r.scale = get<std::string>(j, "scale", r.scale);
    r.bootstrap = get<int>(j, "bootstrap", r.bootstrap);
    r.episodes = get<int>(j, "episodes", r.episodes);
    r.prior_scale = get<double>(j, "prior_scale", r.prior_scale);
    r.omegas = get<std::vector<double>>(j, "omegas", r.omegas);
    if (j.contains("profiles")) {
      for (const auto& p : j.at("profiles")) {
        check_keys(p, "profile", {"d", "c"});
        r.profiles.push_back({get<int>(p, "d", 0), get<double>(p, "c", 0.0)});
      }
    }
  }
  if (r.omegas.empty()) r.omegas = default_omegas();
  if (r.profiles.empty()) r.profiles = default_profiles();
  if (r.workers < 1) throw ConfigError("run.workers must be >= 1");
  if (r.k < 1) throw ConfigError("run.k must be >= 1");
  if (r.estimator != "skp" && r.estimator != "spdp") throw ConfigError("run.estimator must be skp or spdp");
  if (!r.scenario.empty() && r.scenario != "never" && r.scenario != "threshold0" &&
      r.scenario != "always") {
    throw ConfigError("run.scenario must be never, threshold0 or always");
  }
  static const std::set<std::string> tables = {"1", "2", "3", "fig3", "fig4"};
  if (!tables.count(r.table)) throw ConfigError("run.table must be 1, 2, 3, fig3 or fig4");
  if (r.scale != "desk" && r.scale != "full") throw ConfigError("run.scale must be desk or full");
  if (r.bootstrap == 1 || r.bootstrap < 0) throw ConfigError("run.bootstrap must be 0 or >= 2");
  if (r.episodes < 1) throw ConfigError("run.episodes must be >= 1");
  if (!(r.prior_scale >= 0.0)) throw ConfigError("run.prior_scale must be >= 0");
  for (double w : r.omegas) {
    if (!(w >= 0.0)) throw ConfigError("omegas must be >= 0");
  }
  return cfg;
}

json RunConfig::resolved() const {
  json strategies_json = json::array();
  for (const auto& s : strategies) strategies_json.push_back(to_json(s));
  json profiles_json = json::array();
  for (const auto& p : run.profiles) profiles_json.push_back({{"d", p.d}, {"c", p.c}});
  json subject_json = {{"c", subject.c}, {"d", subject.d}};
  if (subject.mu0i) subject_json["mu0i"] = *subject.mu0i;
  if (subject.mu1i) subject_json["mu1i"] = *subject.mu1i;
  const auto t = schedule.times();
  return {{"model", to_json(model)},
          {"population", {{"n", population.n}, {"prob_d", population.prob_d}}},
          {"schedule", {{"times", std::vector<double>(t.begin(), t.end())}}},
          {"strategy", to_json(strategy)},
          {"strategies", strategies_json},
          {"assignment", to_json(assignment)},
          {"risk", to_json(risk)},
          {"search",
           {{"beta_lo", search.beta_lo},
            {"beta_hi", search.beta_hi},
            {"grid_n", search.grid_n},
            {"refine_tol", search.refine_tol},
            {"k_eval", search.k_eval}}},
          {"subject", subject_json},
          {"run",
           {{"seed", run.seed},
            {"k", run.k},
            {"cohort", run.cohort},
            {"estimator", run.estimator},
            {"scenario", run.scenario},
            {"table", run.table},
            {"scale", run.scale},
            {"bootstrap", run.bootstrap},
            {"episodes", run.episodes},
            {"prior_scale", run.prior_scale},
            {"omegas", run.omegas},
            {"profiles", profiles_json}}}};
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(doc);
}

}  // namespace dyncontrol
