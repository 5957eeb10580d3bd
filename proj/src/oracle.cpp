#include "dyncontrol/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "dyncontrol/errors.hpp"
#include "dyncontrol/stats.hpp"

namespace dyncontrol {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool terminal(RiskKind kind) {
  return kind == RiskKind::kTerminalLevel || kind == RiskKind::kTerminalExceedance;
}

// E h(Y) for Y ~ N(mean, var).
double expected_marker(RiskKind kind, double mean, double var, double eta) {
  switch (kind) {
    case RiskKind::kTerminalLevel:
    case RiskKind::kAdditiveMean:
      return mean;
    case RiskKind::kTerminalExceedance:
    case RiskKind::kAdditiveExceedance:
      return gaussian_exceedance(mean, var, eta);
  }
  return 0.0;
}

}  // namespace

RiskEstimate closed_form_fixed_regime(const ModelParams& params, const SubjectCovariates& cov,
                                      const VisitSchedule& schedule, FixedRegime regime,
                                      const RiskSpec& spec) {
  params.validate();
  spec.validate();
  const int J = schedule.J();
  const WindowLayout w = window_layout(J, spec.window);
  const int a = regime == FixedRegime::kAlways ? 1 : 0;
  const double m0 = cov.mu0i.value_or(params.mu0);
  const double m1 = cov.mu1i.value_or(params.mu1);
  const double v0 = cov.mu0i ? 0.0 : params.sigmaMu0 * params.sigmaMu0;
  const double v1 = cov.mu1i ? 0.0 : params.sigmaMu1 * params.sigmaMu1;
  const double slope = m1 + covariate_slope(params, cov);
  const double t0 = schedule[0];
  auto marker_at = [&](int j) {
    const double t = schedule[j];
    const double mean = m0 + slope * t + params.gammaA * a * (t - t0);
    const double var = params.tau * params.tau * t + v0 + v1 * t * t;
    return expected_marker(spec.kind, mean, var, spec.eta);
  };
  RiskEstimate out;
  out.spec = spec;
  if (terminal(spec.kind)) {
    out.cost_marker = marker_at(J);
  } else {
    double s = 0.0;
    for (int j = w.marker_first; j <= w.marker_last; ++j) s += marker_at(j);
    out.cost_marker = s / w.normalizer;
  }
  const int charged = w.treat_last - w.treat_first + 1;
  out.cost_treatment = spec.omega * a * charged / w.normalizer;
  out.fraction_treated = a;
  out.total = out.cost_marker + out.cost_treatment;
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n) {
  if (n < 1) throw ContractError("Gauss-Hermite rule needs n >= 1");
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jac(k, k - 1) = jac(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  Eigen::VectorXd w(n);
  for (int k = 0; k < n; ++k) {
    const double v = es.eigenvectors()(0, k);
    w[k] = std::sqrt(std::numbers::pi) * v * v;
  }
  return {es.eigenvalues(), w};
}

double GridDensity::total_mass() const {
  if (point) return point_mass.sum();
  return mass[0].sum() + mass[1].sum();
}

double GridDensity::expect(const std::function<double(double)>& fn) const {
  if (point) return point_mass.sum() * fn(*point);
  double s = 0.0;
  for (Eigen::Index i = 0; i < nodes.size(); ++i) {
    const double m = mass[0][i] + mass[1][i];
    if (m != 0.0) s += m * fn(nodes[i]);
  }
  return s;
}

namespace {

struct Grid {
  double lo = 0.0;  // left edge
  double h = 1.0;
  int n = 0;
};

Grid make_grid(const ModelParams& params, const SubjectCovariates& cov,
               const VisitSchedule& schedule, const GridOptions& options) {
  if (options.nodes < 16) throw ContractError("grid needs at least 16 nodes");
  const double y0 = *cov.mu0i;
  const double base = *cov.mu1i + covariate_slope(params, cov);
  const double t0 = schedule[0];
  double lo = y0, hi = y0;
  for (int j = 0; j <= schedule.J(); ++j) {
    const double t = schedule[j];
    for (int a = 0; a < 2; ++a) {
      const double m = y0 + base * t + params.gammaA * a * (t - t0);
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
  }
  const double sd = params.tau * std::sqrt(std::max(schedule[schedule.J()], 1e-12));
  lo -= options.span_sd * sd;
  hi += options.span_sd * sd;
  return {lo, (hi - lo) / options.nodes, options.nodes};
}

GridDensity empty_density(const Grid& g) {
  GridDensity d;
  d.h = g.h;
  d.nodes.resize(g.n);
  for (int i = 0; i < g.n; ++i) d.nodes[i] = g.lo + (i + 0.5) * g.h;
  d.mass[0] = Eigen::VectorXd::Zero(g.n);
  d.mass[1] = Eigen::VectorXd::Zero(g.n);
  return d;
}

// Cell masses of N(mean, sd^2) on the grid of `d`.
Eigen::VectorXd gaussian_cells(const GridDensity& d, double mean, double sd) {
  const Eigen::Index n = d.nodes.size();
  Eigen::VectorXd out(n);
  double prev = normal_cdf((d.nodes[0] - 0.5 * d.h - mean) / sd);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double next = normal_cdf((d.nodes[i] + 0.5 * d.h - mean) / sd);
    out[i] = next - prev;
    prev = next;
  }
  return out;
}

// P(A = 1 | Y = y, previous decision); deterministic rules without
// measurement noise return the treated share of the cell of width `cell`.
class DecisionLaw {
 public:
  DecisionLaw(const StrategySpec& s, const ModelParams& p, const SubjectCovariates& c,
              const VisitSchedule& sched, int j, const GridOptions& o)
      : spec_(s), params_(p), cov_(c) {
    const int J = sched.J();
    next_dt_ = j < J ? sched.interval(j) : (J > 0 ? sched.interval(J - 1) : 1.0);
    if (std::holds_alternative<LogisticStochastic>(s) && p.sigmaEps > 0.0) {
      std::tie(gh_x_, gh_w_) = gauss_hermite(o.gh_z_nodes);
    }
    const bool containment = std::holds_alternative<PredictionContainment>(s) ||
                             std::holds_alternative<ParamPredictionContainment>(s);
    if (containment && (p.sigmaEps != 0.0 || !c.effects_known())) {
      throw ContractError("oracle supports containment rules only with sigmaEps = 0 and known effects");
    }
  }

  double operator()(double y, double width, int a_prev) const {
    return std::visit(
        Overloaded{
            [](const NeverTreat&) { return 0.0; },
            [](const AlwaysTreat&) { return 1.0; },
            [](const Randomized& s) { return s.p; },
            [&](const LogisticStochastic& s) {
              const double base = s.alpha0 + s.alphaC * cov_.c + s.alphaD * cov_.d + s.alphaA * a_prev;
              if (params_.sigmaEps == 0.0) return logistic(base + s.alphaZ * y);
              double acc = 0.0;
              for (Eigen::Index k = 0; k < gh_x_.size(); ++k) {
                const double z = y + std::numbers::sqrt2 * params_.sigmaEps * gh_x_[k];
                acc += gh_w_[k] * logistic(base + s.alphaZ * z);
              }
              return acc / std::sqrt(std::numbers::pi);
            },
            [&](const DeterministicThreshold& s) { return above(y, width, s.beta0 + s.betaC * cov_.c); },
            [&](const PersonalizedThreshold& s) { return above(y, width, s.beta); },
            [&](const PredictionContainment& s) { return contain(y, width, s.eta, s.kappa); },
            [&](const ParamPredictionContainment& s) { return contain(y, width, s.eta, s.beta); },
        },
        spec_);
  }

 private:
  // P(Z > beta | Y = y).
  double above(double y, double width, double beta) const {
    if (params_.sigmaEps > 0.0) return normal_cdf((y - beta) / params_.sigmaEps);
    if (width == 0.0) return y > beta ? 1.0 : 0.0;
    return std::clamp((y + 0.5 * width - beta) / width, 0.0, 1.0);
  }

  // With Z = Y and known effects the untreated exceedance is increasing in y,
  // so the rule is a threshold on y found by bisection.
  double contain(double y, double width, double eta, double cut) const {
    const double d0 = *cov_.mu1i + covariate_slope(params_, cov_);
    auto treat = [&](double yy) {
      const double q = gaussian_exceedance(yy + d0 * next_dt_,
                                           params_.tau * params_.tau * next_dt_, eta);
      return q > cut;
    };
    if (width == 0.0) return treat(y) ? 1.0 : 0.0;
    double lo = y - 0.5 * width, hi = y + 0.5 * width;
    const bool tl = treat(lo), th = treat(hi);
    if (tl == th) return tl ? 1.0 : 0.0;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      (treat(mid) ? hi : lo) = mid;
    }
    return (y + 0.5 * width - 0.5 * (lo + hi)) / width;
  }

  const StrategySpec& spec_;
  const ModelParams& params_;
  const SubjectCovariates& cov_;
  double next_dt_ = 1.0;
  Eigen::VectorXd gh_x_, gh_w_;
};

}  // namespace

GridDensity initial_density(const ModelParams& params, const SubjectCovariates& cov,
                            const VisitSchedule& schedule, const GridOptions& options) {
  if (!cov.effects_known()) throw ContractError("grid density needs known effects");
  GridDensity d = empty_density(make_grid(params, cov, schedule, options));
  const double t0 = schedule[0];
  if (t0 == 0.0) {
    d.point = *cov.mu0i;
    d.point_mass = Eigen::Vector2d(1.0, 0.0);
  } else {
    const double mean = *cov.mu0i + drift(params, cov, 0) * t0;
    d.mass[0] = gaussian_cells(d, mean, params.tau * std::sqrt(t0));
  }
  return d;
}

GridDensity propagate_recurrence(const GridDensity& state, const StrategySpec& strategy,
                                 const ModelParams& params, const SubjectCovariates& cov,
                                 const VisitSchedule& schedule, const RiskSpec& spec,
                                 VisitExpectations& acc, const GridOptions& options) {
  const int J = schedule.J();
  const int j = state.visit;
  if (j > J) throw ContractError("state is past the last visit");
  if (!cov.effects_known()) throw ContractError("grid density needs known effects");
  const std::size_t need = static_cast<std::size_t>(J + 1);
  if (acc.marker.size() != need) acc.marker.assign(need, 0.0);
  if (acc.treat.size() != need) acc.treat.assign(need, 0.0);

  const DecisionLaw law(strategy, params, cov, schedule, j, options);
  const Eigen::Index n = state.nodes.size();
  // Source mass split by the decision taken now.
  std::array<Eigen::VectorXd, 2> src;
  double treated = 0.0;
  std::array<double, 2> point_src{0.0, 0.0};
  if (state.point) {
    if (j == 0) acc.marker[0] = expected_marker(spec.kind, *state.point, 0.0, spec.eta);
    for (int ap = 0; ap < 2; ++ap) {
      const double p = law(*state.point, 0.0, ap);
      point_src[1] += state.point_mass[ap] * p;
      point_src[0] += state.point_mass[ap] * (1.0 - p);
    }
    treated = point_src[1];
  } else {
    if (j == 0) {
      acc.marker[0] = state.expect([&](double y) {
        return expected_marker(spec.kind, y, 0.0, spec.eta);
      });
    }
    src[0] = Eigen::VectorXd::Zero(n);
    src[1] = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int ap = 0; ap < 2; ++ap) {
        const double m = state.mass[ap][i];
        if (m == 0.0) continue;
        const double p = law(state.nodes[i], state.h, ap);
        src[1][i] += m * p;
        src[0][i] += m * (1.0 - p);
      }
    }
    treated = src[1].sum();
  }
  acc.treat[static_cast<std::size_t>(j)] = treated;
  if (j == J) {
    GridDensity done = state;
    done.visit = J + 1;
    return done;
  }

  const double dt = schedule.interval(j);
  const double sd = params.tau * std::sqrt(dt);
  GridDensity next = state;
  next.point.reset();
  next.point_mass.setZero();
  next.visit = j + 1;
  double marker_next = 0.0;
  for (int a = 0; a < 2; ++a) {
    const double shift = drift(params, cov, a) * dt;
    if (state.point) {
      next.mass[a] = point_src[a] * gaussian_cells(state, *state.point + shift, sd);
      marker_next += point_src[a] * expected_marker(spec.kind, *state.point + shift, sd * sd, spec.eta);
      continue;
    }
    // The kernel depends only on the cell offset: g[m + n - 1] is the mass a
    // unit at a cell centre sends m cells away.
    Eigen::VectorXd g(2 * n - 1);
    for (Eigen::Index m = -(n - 1); m <= n - 1; ++m) {
      const double c = m * state.h - shift;
      g[m + n - 1] = normal_cdf((c + 0.5 * state.h) / sd) - normal_cdf((c - 0.5 * state.h) / sd);
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = src[a][i];
      if (m == 0.0) continue;
      out += m * g.segment(n - 1 - i, n);
      marker_next += m * expected_marker(spec.kind, state.nodes[i] + shift, sd * sd, spec.eta);
    }
    next.mass[a] = out;
  }
  acc.marker[static_cast<std::size_t>(j + 1)] = marker_next;
  const double lost = state.total_mass() - next.total_mass();
  if (std::abs(lost) > 1e-4) {
    throw ResolutionError("grid lost " + std::to_string(lost) + " of the mass; widen or refine it");
  }
  return next;
}

RiskEstimate risk_integral(const VisitExpectations& acc, const RiskSpec& spec) {
  const int J = static_cast<int>(acc.marker.size()) - 1;
  const WindowLayout w = window_layout(J, spec.window);
  RiskEstimate out;
  out.spec = spec;
  if (terminal(spec.kind)) {
    out.cost_marker = acc.marker[static_cast<std::size_t>(J)];
  } else {
    double s = 0.0;
    for (int j = w.marker_first; j <= w.marker_last; ++j) s += acc.marker[static_cast<std::size_t>(j)];
    out.cost_marker = s / w.normalizer;
  }
  double t = 0.0;
  for (int j = w.treat_first; j <= w.treat_last; ++j) t += acc.treat[static_cast<std::size_t>(j)];
  out.cost_treatment = spec.omega * t / w.normalizer;
  out.fraction_treated = t / (w.treat_last - w.treat_first + 1);
  out.total = out.cost_marker + out.cost_treatment;
  return out;
}

OracleResult oracle_risk(const ModelParams& params, const SubjectCovariates& cov,
                         const VisitSchedule& schedule, const StrategySpec& strategy,
                         const RiskSpec& spec, const GridOptions& options) {
  params.validate();
  spec.validate();
  validate(strategy);
  const int J = schedule.J();
  window_layout(J, spec.window);

  // Effects nodes: (mu0, mu1, weight).
  struct Node {
    double mu0, mu1, w;
  };
  std::vector<Node> nodes;
  {
    auto axis = [&](std::optional<double> known, double mean, double sd) {
      std::vector<std::pair<double, double>> out;
      if (known) return std::vector<std::pair<double, double>>{{*known, 1.0}};
      if (sd == 0.0) return std::vector<std::pair<double, double>>{{mean, 1.0}};
      const auto [x, w] = gauss_hermite(options.gh_nodes);
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        out.emplace_back(mean + std::numbers::sqrt2 * sd * x[k], w[k] / std::sqrt(std::numbers::pi));
      }
      return out;
    };
    const auto a0 = axis(cov.mu0i, params.mu0, params.sigmaMu0);
    const auto a1 = axis(cov.mu1i, params.mu1, params.sigmaMu1);
    for (const auto& [m0, w0] : a0) {
      for (const auto& [m1, w1] : a1) nodes.push_back({m0, m1, w0 * w1});
    }
  }

  OracleResult out;
  out.expectations.marker.assign(static_cast<std::size_t>(J + 1), 0.0);
  out.expectations.treat.assign(static_cast<std::size_t>(J + 1), 0.0);
  for (const Node& node : nodes) {
    SubjectCovariates known = cov;
    known.mu0i = node.mu0;
    known.mu1i = node.mu1;
    GridDensity state = initial_density(params, known, schedule, options);
    VisitExpectations acc;
    for (int j = 0; j <= J; ++j) {
      state = propagate_recurrence(state, strategy, params, known, schedule, spec, acc, options);
      out.max_mass_error = std::max(out.max_mass_error, std::abs(state.total_mass() - 1.0));
    }
    for (int j = 0; j <= J; ++j) {
      out.expectations.marker[j] += node.w * acc.marker[j];
      out.expectations.treat[j] += node.w * acc.treat[j];
    }
  }
  out.estimate = risk_integral(out.expectations, spec);
  return out;
}

}  // namespace dyncontrol
