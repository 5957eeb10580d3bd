#include "dyncontrol/io.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "dyncontrol/errors.hpp"

namespace dyncontrol {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Shortest text that reads back to the same double.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  const std::string full = os.str();
  for (int p = 6; p < 17; ++p) {
    std::ostringstream t;
    t << std::setprecision(p) << v;
    if (std::stod(t.str()) == v) return t.str();
  }
  return full;
}

double get_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

const char* kind_name(RiskKind k) {
  switch (k) {
    case RiskKind::kTerminalLevel: return "terminal_level";
    case RiskKind::kTerminalExceedance: return "terminal_exceedance";
    case RiskKind::kAdditiveMean: return "additive_mean";
    case RiskKind::kAdditiveExceedance: return "additive_exceedance";
  }
  return "";
}

}  // namespace

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string csv_header_line(const std::string& schema, const OutputTag& tag) {
  return std::string("# dyncontrol ") + kVersion + " schema=" + schema +
         " config=" + tag.config_hash + " seed=" + std::to_string(tag.seed);
}

json to_json(const ModelParams& p) {
  return {{"mu0", p.mu0},         {"mu1", p.mu1},           {"gammaC", p.gammaC},
          {"gammaD", p.gammaD},   {"gammaA", p.gammaA},     {"tau", p.tau},
          {"sigmaEps", p.sigmaEps}, {"sigmaMu0", p.sigmaMu0}, {"sigmaMu1", p.sigmaMu1}};
}

ModelParams params_from_json(const json& j, const ModelParams& base) {
  if (!j.is_object()) throw ConfigError("model section must be an object");
  ModelParams p = base;
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset == "illustration") {
      p = ModelParams::illustration();
    } else if (preset == "illustration_known_effects") {
      p = ModelParams::illustration_known_effects();
    } else {
      throw ConfigError("unknown model preset '" + preset + "'");
    }
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") continue;
    static const char* known[] = {"mu0", "mu1", "gammaC", "gammaD", "gammaA",
                                  "tau", "sigmaEps", "sigmaMu0", "sigmaMu1"};
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known)) {
      throw ConfigError("unknown model field '" + key + "'");
    }
    if (!value.is_number()) throw ConfigError("model field '" + key + "' must be a number");
  }
  p.mu0 = get_or(j, "mu0", p.mu0);
  p.mu1 = get_or(j, "mu1", p.mu1);
  p.gammaC = get_or(j, "gammaC", p.gammaC);
  p.gammaD = get_or(j, "gammaD", p.gammaD);
  p.gammaA = get_or(j, "gammaA", p.gammaA);
  p.tau = get_or(j, "tau", p.tau);
  p.sigmaEps = get_or(j, "sigmaEps", p.sigmaEps);
  p.sigmaMu0 = get_or(j, "sigmaMu0", p.sigmaMu0);
  p.sigmaMu1 = get_or(j, "sigmaMu1", p.sigmaMu1);
  try {
    p.validate();
  } catch (const InvalidParamsError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return p;
}

json to_json(const StrategySpec& s) {
  json j = std::visit(
      Overloaded{
          [](const NeverTreat&) { return json::object(); },
          [](const AlwaysTreat&) { return json::object(); },
          [](const Randomized& r) { return json{{"p", r.p}}; },
          [](const LogisticStochastic& l) {
            return json{{"alpha0", l.alpha0}, {"alphaZ", l.alphaZ}, {"alphaC", l.alphaC},
                        {"alphaA", l.alphaA}, {"alphaD", l.alphaD}};
          },
          [](const DeterministicThreshold& t) { return json{{"beta0", t.beta0}, {"betaC", t.betaC}}; },
          [](const PersonalizedThreshold& t) { return json{{"beta", t.beta}}; },
          [](const PredictionContainment& c) { return json{{"eta", c.eta}, {"kappa", c.kappa}}; },
          [](const ParamPredictionContainment& c) { return json{{"eta", c.eta}, {"beta", c.beta}}; },
      },
      s);
  j["type"] = strategy_tag(s);
  return j;
}

StrategySpec strategy_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("strategy needs a 'type'");
  const auto type = j.at("type").get<std::string>();
  StrategySpec s;
  if (type == "never") {
    s = NeverTreat{};
  } else if (type == "always") {
    s = AlwaysTreat{};
  } else if (type == "randomized") {
    s = Randomized{get_or(j, "p", 0.5)};
  } else if (type == "logistic") {
    s = LogisticStochastic{get_or(j, "alpha0", 0.0), get_or(j, "alphaZ", 0.0),
                           get_or(j, "alphaC", 0.0), get_or(j, "alphaA", 0.0),
                           get_or(j, "alphaD", 0.0)};
  } else if (type == "threshold") {
    s = DeterministicThreshold{get_or(j, "beta0", 0.0), get_or(j, "betaC", 0.0)};
  } else if (type == "personalized_threshold") {
    s = PersonalizedThreshold{get_or(j, "beta", 0.0)};
  } else if (type == "containment") {
    s = PredictionContainment{get_or(j, "eta", 0.0), get_or(j, "kappa", 0.05)};
  } else if (type == "param_containment") {
    s = ParamPredictionContainment{get_or(j, "eta", 0.0), get_or(j, "beta", 0.05)};
  } else {
    throw ConfigError("unknown strategy type '" + type + "'");
  }
  try {
    validate(s);
  } catch (const InvalidParamsError& e) {
    throw ConfigError(std::string("strategy: ") + e.what());
  }
  return s;
}

json to_json(const RiskSpec& s) {
  return {{"kind", kind_name(s.kind)},
          {"eta", s.eta},
          {"omega", s.omega},
          {"window", s.window == ScoringWindow::kPostBaseline ? "post_baseline" : "all_visits"}};
}

RiskSpec risk_spec_from_json(const json& j, const RiskSpec& base) {
  if (!j.is_object()) throw ConfigError("risk section must be an object");
  RiskSpec s = base;
  if (j.contains("kind")) {
    const auto k = j.at("kind").get<std::string>();
    if (k == "terminal_level") s.kind = RiskKind::kTerminalLevel;
    else if (k == "terminal_exceedance") s.kind = RiskKind::kTerminalExceedance;
    else if (k == "additive_mean") s.kind = RiskKind::kAdditiveMean;
    else if (k == "additive_exceedance") s.kind = RiskKind::kAdditiveExceedance;
    else throw ConfigError("unknown risk kind '" + k + "'");
  }
  if (j.contains("window")) {
    const auto w = j.at("window").get<std::string>();
    if (w == "post_baseline") s.window = ScoringWindow::kPostBaseline;
    else if (w == "all_visits") s.window = ScoringWindow::kAllVisits;
    else throw ConfigError("unknown scoring window '" + w + "'");
  }
  s.eta = get_or(j, "eta", s.eta);
  s.omega = get_or(j, "omega", s.omega);
  s.validate();
  return s;
}

json to_json(const RiskEstimate& e) {
  return {{"total", e.total},
          {"cost_y", e.cost_marker},
          {"cost_trt", e.cost_treatment},
          {"pct_treated", e.fraction_treated},
          {"se", e.mc_se},
          {"k", e.k},
          {"spec", to_json(e.spec)}};
}

json to_json(const FittedModel& f) {
  json est = to_json(f.estimates);
  json se = json::object();
  const Eigen::VectorXd s = f.standard_errors();
  json vcov = json::array();
  for (Eigen::Index r = 0; r < f.vcov.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < f.vcov.cols(); ++c) {
      const double v = f.vcov(r, c);
      row.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    }
    vcov.push_back(row);
  }
  for (std::size_t i = 0; i < kParamNames.size(); ++i) {
    const double v = i < static_cast<std::size_t>(s.size()) ? s[static_cast<Eigen::Index>(i)]
                                                            : std::numeric_limits<double>::quiet_NaN();
    se[std::string(kParamNames[i])] = std::isfinite(v) ? json(v) : json(nullptr);
  }
  std::vector<std::string> names(kParamNames.begin(), kParamNames.end());
  return {{"estimates", est},
          {"se", se},
          {"vcov", vcov},
          {"vcov_order", names},
          {"loglik", f.loglik},
          {"converged", f.converged},
          {"iterations", f.iterations},
          {"gradient_norm", f.gradient_norm}};
}

json to_json(const ObservationalAssignmentModel& m) {
  return {{"alpha0", m.alpha0}, {"alphaZ", m.alphaZ}, {"alphaC", m.alphaC},
          {"alphaD", m.alphaD}, {"absorbing", m.absorbing}};
}

void write_cohort_csv(std::ostream& os, const Cohort& cohort, const OutputTag& tag) {
  os << csv_header_line("cohort/1", tag) << '\n';
  os << "subject_id,visit_index,time,C,D,A,Z\n";
  for (const auto& s : cohort.subjects) {
    for (int j = 0; j <= s.schedule.J(); ++j) {
      os << s.id << ',' << j << ',' << num(s.schedule[j]) << ',' << num(s.cov.c) << ','
         << s.cov.d << ',' << s.traj.a[j] << ',' << num(s.traj.z[j]) << '\n';
    }
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw AlignmentError("line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

}  // namespace

Cohort read_cohort_csv(std::istream& is) {
  Cohort cohort;
  cohort.meta.generator = "imported";
  std::string line;
  int line_no = 0;
  bool header = false;
  struct Rows {
    int id;
    std::vector<double> t, z;
    std::vector<int> a;
    double c;
    int d;
  };
  std::vector<Rows> subjects;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "subject_id,visit_index,time,C,D,A,Z") {
        throw AlignmentError("unexpected cohort header '" + line + "'");
      }
      header = true;
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != 7) throw AlignmentError("line " + std::to_string(line_no) + ": expected 7 columns");
    const int id = static_cast<int>(parse_double(cells[0], line_no));
    const int visit = static_cast<int>(parse_double(cells[1], line_no));
    const double t = parse_double(cells[2], line_no);
    const double c = parse_double(cells[3], line_no);
    const int d = static_cast<int>(parse_double(cells[4], line_no));
    const int a = static_cast<int>(parse_double(cells[5], line_no));
    const double z = parse_double(cells[6], line_no);
    if (subjects.empty() || subjects.back().id != id) {
      for (const auto& s : subjects) {
        if (s.id == id) throw AlignmentError("rows of subject " + std::to_string(id) + " are not contiguous");
      }
      subjects.push_back({id, {}, {}, {}, c, d});
    }
    Rows& s = subjects.back();
    if (visit != static_cast<int>(s.t.size())) {
      throw AlignmentError("line " + std::to_string(line_no) + ": visit index out of order");
    }
    if (c != s.c || d != s.d) {
      throw AlignmentError("line " + std::to_string(line_no) + ": covariates change within a subject");
    }
    if ((a != 0 && a != 1) || (d != 0 && d != 1)) {
      throw AlignmentError("line " + std::to_string(line_no) + ": A and D must be 0 or 1");
    }
    s.t.push_back(t);
    s.z.push_back(z);
    s.a.push_back(a);
  }
  if (!header) throw AlignmentError("cohort file has no header");
  for (auto& s : subjects) {
    CohortSubject out;
    out.id = s.id;
    out.cov.c = s.c;
    out.cov.d = s.d;
    out.schedule = VisitSchedule(s.t);
    const int n = static_cast<int>(s.t.size());
    out.traj = Trajectory(n);
    out.traj.y.setConstant(std::numeric_limits<double>::quiet_NaN());
    for (int j = 0; j < n; ++j) {
      out.traj.z[j] = s.z[j];
      out.traj.a[j] = s.a[j];
    }
    cohort.subjects.push_back(std::move(out));
  }
  return cohort;
}

json cohort_metadata(const Cohort& cohort) {
  int rows = 0;
  for (const auto& s : cohort.subjects) rows += s.schedule.J() + 1;
  return {{"version", kVersion},
          {"generator", cohort.meta.generator},
          {"seed", cohort.meta.seed},
          {"subjects", cohort.subjects.size()},
          {"rows", rows},
          {"params", to_json(cohort.meta.params)},
          {"assignment", to_json(cohort.meta.assignment)},
          {"treated_time_fraction", cohort.treated_time_fraction()}};
}

void write_risk_csv(std::ostream& os, const std::vector<std::pair<std::string, RiskEstimate>>& rows,
                    const OutputTag& tag) {
  os << csv_header_line("risk/1", tag) << '\n';
  os << "label,total,cost_y,cost_trt,pct_treated,se,k\n";
  for (const auto& [label, e] : rows) {
    os << label << ',' << num(e.total) << ',' << num(e.cost_marker) << ','
       << num(e.cost_treatment) << ',' << num(e.fraction_treated) << ',' << num(e.mc_se) << ','
       << e.k << '\n';
  }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, const OutputTag& tag) {
  os << csv_header_line("sweep/1", tag) << '\n';
  os << "omega,profile_d,profile_c,beta_star,cost_y,cost_trt,total,pct_treated,mc_se\n";
  for (const auto& r : rows) {
    os << num(r.omega) << ',' << r.profile.d << ',' << num(r.profile.c) << ','
       << num(r.beta_star) << ',' << num(r.cost_y) << ',' << num(r.cost_trt) << ','
       << num(r.total) << ',' << num(r.pct_treated) << ',' << num(r.mc_se) << '\n';
  }
}

void write_trace_csv(std::ostream& os, const DtdrTrace& trace, const OutputTag& tag, int episode) {
  if (episode <= 0) {
    os << csv_header_line("trace/1", tag) << '\n';
    if (episode < 0) {
      os << "visit,time,beta_star,decision,z,nu0,nu1,omega00,omega01,omega11\n";
    } else {
      os << "episode,visit,time,beta_star,decision,z,nu0,nu1,omega00,omega01,omega11\n";
    }
  }
  for (const auto& s : trace.steps) {
    if (episode >= 0) os << episode << ',';
    os << s.visit << ',' << num(s.time) << ',' << num(s.beta_star) << ',' << s.decision << ','
       << num(s.z) << ',' << num(s.posterior.nu(0)) << ',' << num(s.posterior.nu(1)) << ','
       << num(s.posterior.omega(0, 0)) << ',' << num(s.posterior.omega(0, 1)) << ','
       << num(s.posterior.omega(1, 1)) << '\n';
  }
  if (trace.truncated && episode < 0) os << "# truncated: environment exhausted\n";
}

}  // namespace dyncontrol
