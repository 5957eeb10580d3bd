// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dyncontrol/config.hpp"
#include "dyncontrol/dtdr.hpp"
#include "dyncontrol/inference.hpp"
#include "dyncontrol/latent_filter.hpp"
#include "dyncontrol/oracle.hpp"
#include "dyncontrol/optimizer.hpp"
#include "dyncontrol/posterior.hpp"
#include "dyncontrol/replicate.hpp"
#include "dyncontrol/risk.hpp"
#include "dyncontrol/simulation.hpp"
#include "dyncontrol/stats.hpp"

using namespace dyncontrol;

namespace {

int g_failed = 0;
const int kWorkers = 1;

void report(int id, const std::string& name, bool ok, const std::string& detail, double secs) {
  std::printf("[%s] criterion %d %s: %s (%.1fs)\n", ok ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str(), secs);
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

template <typename Fn>
void run(int id, const std::string& name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(id, name, ok, detail, secs);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct SpotCheck {
  Profile profile;
  double omega;
  double target;
  bool never_treat;  // pct_treated must be 0
};

// Optimal-total spot checks against published values at tolerance max(0.02, 3 se).
bool spot_checks(const std::vector<SpotCheck>& checks,
                 const std::function<ComponentEvaluator(const Profile&)>& make, std::string& detail) {
  SearchConfig cfg;
  cfg.workers = kWorkers;
  const RiskSpec spec = table_risk_spec();
  bool ok = true;
  std::ostringstream os;
  for (const auto& c : checks) {
    const auto rows = sweep_omega({c.omega}, cfg, {c.profile}, spec, make);
    const SweepRow& r = rows.front();
    const double tol = std::max(0.02, 3.0 * r.mc_se);
    bool pass = std::abs(r.total - c.target) <= tol;
    if (c.never_treat) pass = pass && r.pct_treated == 0.0;
    ok = ok && pass;
    os << "(D=" << c.profile.d << ",C=" << c.profile.c << ",w=" << c.omega << ") " << fmt("%.3f", r.total)
       << " vs " << c.target << (pass ? "" : " MISS") << "; ";
  }
  detail = os.str();
  return ok;
}

// Independent posterior by quadrature over (mu0, mu1): prior density times the
// Gaussian likelihood of z, with offsets and covariance rebuilt here. A coarse
// pass over the prior range locates the posterior; a 400x400 pass over its
// mean +/- 8 SD gives the moments.
struct GridMoments {
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;
};

GridMoments grid_moments(const Eigen::Vector2d& m, const Eigen::Matrix2d& s,
                         const std::vector<double>& t, const Eigen::VectorXd& off,
                         const Eigen::MatrixXd& sig_inv, const Eigen::VectorXd& z,
                         const Eigen::Vector2d& centre, const Eigen::Vector2d& half, int g) {
  const int n = static_cast<int>(t.size());
  const Eigen::Matrix2d s_inv = s.inverse();
  auto node = [&](int axis, int i) {
    return centre(axis) + half(axis) * (2.0 * (i + 0.5) / g - 1.0);
  };
  std::vector<double> logw(static_cast<std::size_t>(g) * g);
  double mx = -1e300;
  for (int i = 0; i < g; ++i) {
    for (int k = 0; k < g; ++k) {
      const Eigen::Vector2d u(node(0, i), node(1, k));
      const Eigen::Vector2d d = u - m;
      Eigen::VectorXd r(n);
      for (int q = 0; q < n; ++q) r[q] = z[q] - u(0) - u(1) * t[q] - off[q];
      const double lw = -0.5 * d.dot(s_inv * d) - 0.5 * r.dot(sig_inv * r);
      logw[static_cast<std::size_t>(i) * g + k] = lw;
      mx = std::max(mx, lw);
    }
  }
  double tot = 0.0;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
  for (int i = 0; i < g; ++i) {
    for (int k = 0; k < g; ++k) {
      const Eigen::Vector2d u(node(0, i), node(1, k));
      const double p = std::exp(logw[static_cast<std::size_t>(i) * g + k] - mx);
      tot += p;
      mean += p * u;
      second += p * u * u.transpose();
    }
  }
  mean /= tot;
  return {mean, second / tot - mean * mean.transpose()};
}

GridMoments grid_posterior(const Eigen::Vector2d& m, const Eigen::Matrix2d& s,
                           const std::vector<double>& t, const std::vector<int>& a, double slope,
                           double gammaA, double tau, double eps, const Eigen::VectorXd& z) {
  const int n = static_cast<int>(t.size());
  Eigen::VectorXd off(n);
  double integ = 0.0;
  for (int r = 0; r < n; ++r) {
    if (r > 0) integ += a[r - 1] * (t[r] - t[r - 1]);
    off[r] = slope * t[r] + gammaA * integ;
  }
  Eigen::MatrixXd sig(n, n);
  for (int r = 0; r < n; ++r)
    for (int q = 0; q < n; ++q) sig(r, q) = tau * tau * std::min(t[r], t[q]) + (r == q ? eps * eps : 0.0);
  const Eigen::MatrixXd sig_inv = sig.inverse();
  const Eigen::Vector2d prior_half(8.0 * std::sqrt(s(0, 0)), 8.0 * std::sqrt(s(1, 1)));
  const GridMoments coarse = grid_moments(m, s, t, off, sig_inv, z, m, prior_half, 200);
  const Eigen::Vector2d half(8.0 * std::sqrt(coarse.cov(0, 0)), 8.0 * std::sqrt(coarse.cov(1, 1)));
  return grid_moments(m, s, t, off, sig_inv, z, coarse.mean, half, 400);
}

}  // namespace

int main() {
  std::printf("acceptance: 9 criteria\n");

  run(1, "estimation (200 x N=500, J=10)", [](std::string& detail) {
    EstimationStudy study;
    study.replicates = 200;
    study.n = 500;
    study.J = 10;
    study.seed = 20240601;
    study.workers = kWorkers;
    const EstimationResult r =
        run_estimation_study(study, ModelParams::illustration(), ObservationalAssignmentModel{});
    bool ok = r.used >= 190;
    std::ostringstream os;
    os << "fits " << r.used << "/" << (r.used + r.dropped) << "; ";
    for (int p = 0; p < kFixedEffectCount; ++p) {
      const auto& row = r.rows[p];
      const bool pass = std::abs(row.bias) < 0.02 && row.coverage >= 0.91 && row.coverage <= 0.98;
      ok = ok && pass;
      os << row.param << " bias " << fmt("%+.4f", row.bias) << " cov " << fmt("%.3f", row.coverage)
         << (pass ? "" : " MISS") << "; ";
    }
    detail = os.str();
    return ok;
  });

  run(2, "observational treated fraction", [](std::string& detail) {
    PopulationSpec pop;
    pop.n = 10000;
    pop.params = ModelParams::illustration();
    const Cohort c = simulate_cohort(pop, ObservationalAssignmentModel{}, VisitSchedule::uniform(10), 7);
    const double f = c.treated_time_fraction();
    detail = "fraction " + fmt("%.4f", f) + " vs 0.667 +/- 0.02";
    return std::abs(f - 0.667) <= 0.02;
  });

  run(3, "SKP optima spot checks", [](std::string& detail) {
    const auto make = skp_components(ModelParams::illustration_known_effects(), table_schedule(),
                                     table_risk_spec(), 10000, 11, kWorkers);
    return spot_checks({{{0, 0.5}, 0.0, 0.015, false},
                        {{0, 0.5}, 0.5, 0.193, false},
                        {{0, 0.5}, 3.0, 0.546, true},
                        {{1, 0.5}, 0.0, 0.058, false}},
                       make, detail);
  });

  run(4, "SPDP optima spot checks", [](std::string& detail) {
    const auto make = spdp_components(ModelParams::illustration(), table_schedule(),
                                      table_risk_spec(), 10000, 12, kWorkers);
    return spot_checks({{{0, 0.5}, 0.1, 0.063, false},
                        {{0, 0.5}, 0.5, 0.205, false},
                        {{0, 0.5}, 3.0, 0.516, true}},
                       make, detail);
  });

  run(5, "oracle equivalence", [](std::string& detail) {
    const ModelParams p = ModelParams::illustration_known_effects();
    SubjectCovariates cov;
    cov.c = 0.5;
    cov.d = 0;
    cov.mu0i = p.mu0;
    cov.mu1i = p.mu1;
    RiskSpec spec = table_risk_spec();
    spec.omega = 0.5;
    bool ok = true;
    std::ostringstream os;
    const VisitSchedule s9 = table_schedule();
    for (auto regime : {FixedRegime::kNever, FixedRegime::kAlways}) {
      const double exact = closed_form_fixed_regime(p, cov, s9, regime, spec).total;
      const StrategySpec st = regime == FixedRegime::kNever ? StrategySpec{NeverTreat{}} : StrategySpec{AlwaysTreat{}};
      const RiskEstimate mc = estimate_risk_skp(p, cov, s9, st, spec, 100000, 21, kWorkers);
      const bool pass = std::abs(mc.total - exact) <= 3.0 * mc.mc_se;
      ok = ok && pass;
      os << strategy_tag(st) << " MC " << fmt("%.4f", mc.total) << " exact " << fmt("%.4f", exact)
         << " se " << fmt("%.1e", mc.mc_se) << (pass ? "" : " MISS") << "; ";
    }
    const VisitSchedule s2 = VisitSchedule::uniform(2);
    for (double beta : {-1.0, 0.5}) {
      const PersonalizedThreshold st{beta};
      const double quad = oracle_risk(p, cov, s2, st, spec).estimate.total;
      const RiskEstimate mc = estimate_risk_skp(p, cov, s2, st, spec, 1000000, 22, kWorkers);
      const bool pass = std::abs(mc.total - quad) <= 3.0 * mc.mc_se;
      ok = ok && pass;
      os << "threshold " << beta << " J=2 MC " << fmt("%.4f", mc.total) << " quad "
         << fmt("%.4f", quad) << " se " << fmt("%.1e", mc.mc_se) << (pass ? "" : " MISS") << "; ";
    }
    detail = os.str();
    return ok;
  });

  run(6, "posterior correctness", [](std::string& detail) {
    // Short DTDR episodes for the determinant check.
    std::vector<DtdrTrace> traces;
    {
      const ModelParams p = ModelParams::illustration();
      SubjectCovariates observed;
      observed.c = 0.5;
      RiskSpec spec = table_risk_spec();
      spec.omega = 0.5;
      SearchConfig search;
      search.grid_n = 16;
      search.k_eval = 200;
      search.refine_tol = 0.5;
      for (int e = 0; e < 6; ++e) {
        StreamSet streams(606, static_cast<std::uint64_t>(e));
        const SubjectCovariates drawn = realize_effects(p, observed, streams);
        SimulatedSubject env(p, drawn, table_schedule(), streams);
        Posterior prior = Posterior::from_prior(effects_prior(p, observed));
        prior.omega *= 1.0 + e;
        traces.push_back(dtdr_run(prior, p, observed, table_schedule(), spec, search, env, 60 + e));
      }
    }
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::normal_distribution<double> N(0.0, 1.0);
    double worst_grid = 0.0, worst_seq = 0.0;
    for (int cs = 0; cs < 20; ++cs) {
      const int n = 1 + static_cast<int>(U(rng) * 4);
      std::vector<double> t{0.0};
      for (int r = 1; r < n; ++r) t.push_back(t.back() + 0.3 + 1.5 * U(rng));
      std::vector<int> a;
      for (int r = 0; r + 1 < n; ++r) a.push_back(U(rng) < 0.5 ? 1 : 0);
      ModelParams p = ModelParams::illustration();
      p.tau = 0.5 + 1.5 * U(rng);
      p.sigmaEps = 0.2 + 0.8 * U(rng);
      p.gammaA = -3.0 * U(rng);
      SubjectCovariates cov;
      cov.c = N(rng);
      cov.d = U(rng) < 0.5 ? 1 : 0;
      const Eigen::Vector2d m(N(rng), N(rng));
      const double s0 = 0.5 + U(rng), s1 = 0.2 + 0.5 * U(rng), rho = 0.6 * (2 * U(rng) - 1);
      Eigen::Matrix2d s;
      s << s0 * s0, rho * s0 * s1, rho * s0 * s1, s1 * s1;
      Eigen::VectorXd z(n);
      const Posterior prior{m, s, 0};
      const auto de = design_expansion(t, cov, a, p);
      for (int r = 0; r < n; ++r) z[r] = m(0) + m(1) * t[r] + de.c_vec[r] + 2.0 * N(rng);
      const Posterior post = posterior_update(prior, z, de);
      const GridMoments gm = grid_posterior(m, s, t, a, covariate_slope(p, cov), p.gammaA, p.tau,
                                            p.sigmaEps, z);
      worst_grid = std::max(worst_grid, (post.nu - gm.mean).cwiseAbs().maxCoeff());
      worst_grid = std::max(worst_grid, (post.omega - gm.cov).cwiseAbs().maxCoeff());
      // Sequential route: Kalman filter over (Y, mu0, mu1).
      LatentFilter<double> f(m, s, p.tau, p.sigmaEps);
      for (int r = 0; r < n; ++r) {
        if (r > 0) f.advance(t[r] - t[r - 1], covariate_slope(p, cov) + p.gammaA * a[r - 1]);
        f.observe(z[r]);
      }
      worst_seq = std::max(worst_seq, (f.effects_mean() - post.nu).cwiseAbs().maxCoeff());
      worst_seq = std::max(worst_seq, (f.effects_cov() - post.omega).cwiseAbs().maxCoeff());
    }
    bool det_ok = !traces.empty();
    for (const auto& tr : traces) {
      for (std::size_t i = 1; i < tr.steps.size(); ++i) {
        const double d0 = tr.steps[i - 1].posterior.omega.determinant();
        const double d1 = tr.steps[i].posterior.omega.determinant();
        if (d1 > d0 + 1e-12 * (1.0 + std::abs(d0))) det_ok = false;
      }
    }
    detail = "grid max err " + fmt("%.2e", worst_grid) + ", sequential vs batch " +
             fmt("%.2e", worst_seq) + ", det(Omega) nonincreasing on " +
             std::to_string(traces.size()) + " traces: " + (det_ok ? "yes" : "no");
    return worst_grid < 1e-3 && worst_seq < 1e-9 && det_ok;
  });

  run(7, "generic terminal-level contrast", [](std::string& detail) {
    const ModelParams p = ModelParams::illustration();
    SubjectCovariates cov;
    cov.c = 0.5;
    cov.d = 1;
    RiskSpec spec;
    spec.kind = RiskKind::kTerminalLevel;
    const VisitSchedule s = VisitSchedule::uniform(10);
    const RiskEstimate always = estimate_risk_skp(p, cov, s, AlwaysTreat{}, spec, 100000, 71, kWorkers);
    const RiskEstimate never = estimate_risk_skp(p, cov, s, NeverTreat{}, spec, 100000, 72, kWorkers);
    const Effect e = contrast(always, never);
    const double target = p.gammaA * s[s.J()];
    detail = "contrast " + fmt("%.3f", e.value) + " (se " + fmt("%.3f", e.se) + ") vs " + fmt("%.0f", target);
    return std::abs(e.value - target) <= 3.0 * e.se;
  });

  run(8, "structural properties", [](std::string& detail) {
    const ModelParams p = ModelParams::illustration();
    const RiskSpec spec = table_risk_spec();
    SearchConfig cfg;
    cfg.workers = kWorkers;
    const auto make = spdp_components(p, table_schedule(), spec, 10000, 81, kWorkers);
    const auto rows = sweep_omega(default_omegas(), cfg, {{0, -0.5}}, spec, make);
    bool mono = true, concave = true;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].total < rows[i - 1].total - 1e-12) mono = false;
    }
    for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
      const double w0 = rows[i - 1].omega;
      const double w1 = rows[i].omega;
      const double w2 = rows[i + 1].omega;
      const double chord = rows[i - 1].total + (rows[i + 1].total - rows[i - 1].total) * (w1 - w0) / (w2 - w0);
      if (rows[i].total < chord - 1e-12) concave = false;
    }
    // Bimodal risk curve at omega = 1.
    RiskSpec s1 = spec;
    s1.omega = 1.0;
    const ComponentEvaluator comp = make({0, -0.5});
    const RiskEvaluator eval = [&](double b) { return comp(b).estimate(s1); };
    const ThresholdOptimum global = optimize_threshold(eval, cfg);
    const ThresholdOptimum local = local_threshold_search(eval, 20.0, 1.0, 0.05);
    const double gap = local.estimate.total - global.estimate.total;
    const double se = std::hypot(local.estimate.mc_se, global.estimate.mc_se);
    const bool multimodal = gap > 3.0 * se;
    detail = std::string("sweep nondecreasing ") + (mono ? "yes" : "no") + ", concave " +
             (concave ? "yes" : "no") + "; omega=1 grid beta " + fmt("%.2f", global.beta) +
             " risk " + fmt("%.4f", global.estimate.total) + " vs local-from-20 beta " +
             fmt("%.2f", local.beta) + " risk " + fmt("%.4f", local.estimate.total);
    return mono && concave && multimodal;
  });

  run(9, "DTDR properties", [](std::string& detail) {
    const ModelParams p = ModelParams::illustration();
    const VisitSchedule sched = table_schedule();
    RiskSpec spec = table_risk_spec();
    spec.omega = 0.5;
    SubjectCovariates observed;
    observed.c = 0.5;
    observed.d = 0;
    SearchConfig search;
    search.grid_n = 32;
    search.k_eval = 400;
    search.refine_tol = 0.1;
    const int episodes = 200;
    std::ostringstream os;

    // Degenerate prior at the true effects vs the known-effects optimum.
    SubjectCovariates truth = observed;
    truth.mu0i = p.mu0;
    truth.mu1i = p.mu1;
    Posterior point;
    point.nu = Eigen::Vector2d(p.mu0, p.mu1);
    point.omega.setZero();
    std::vector<double> loss_a;
    for (int e = 0; e < episodes; ++e) {
      SimulatedSubject env(p, truth, sched, StreamSet(901, static_cast<std::uint64_t>(e)));
      dtdr_run(point, p, observed, sched, spec, search, env, 5000 + e);
      const LossParts lp = loss_parts(env.trajectory(), spec);
      loss_a.push_back(lp.marker + spec.omega * lp.treatment);
    }
    SearchConfig opt_cfg;
    opt_cfg.workers = kWorkers;
    const auto skp = sweep_omega({spec.omega}, opt_cfg, {{0, 0.5}}, spec,
                                 skp_components(ModelParams::illustration_known_effects(), sched,
                                                spec, 10000, 31, kWorkers))
                         .front();
    const SampleSummary sa = summarize(loss_a);
    const double se_a = std::hypot(sa.sd / std::sqrt(episodes), skp.mc_se);
    const bool ok_a = std::abs(sa.mean - skp.total) <= 3.0 * se_a;
    os << "known: DTDR " << fmt("%.4f", sa.mean) << " vs SKP " << fmt("%.4f", skp.total) << " (3se "
       << fmt("%.4f", 3 * se_a) << ")" << (ok_a ? "" : " MISS") << "; ";

    // Inflated prior (4x the population variances) vs the static SPDP optimum.
    const EffectsPrior pop = effects_prior(p, observed);
    Posterior inflated = Posterior::from_prior(pop);
    inflated.omega *= 4.0;
    std::vector<double> loss_b;
    for (int e = 0; e < episodes; ++e) {
      StreamSet streams(902, static_cast<std::uint64_t>(e));
      const SubjectCovariates drawn = realize_effects(p, observed, streams);
      SimulatedSubject env(p, drawn, sched, streams);
      dtdr_run(inflated, p, observed, sched, spec, search, env, 7000 + e);
      const LossParts lp = loss_parts(env.trajectory(), spec);
      loss_b.push_back(lp.marker + spec.omega * lp.treatment);
    }
    const auto spdp = sweep_omega({spec.omega}, opt_cfg, {{0, 0.5}}, spec,
                                  spdp_components(p, sched, spec, 10000, 32, kWorkers))
                          .front();
    const SampleSummary sb = summarize(loss_b);
    const double se_b = std::hypot(sb.sd / std::sqrt(episodes), spdp.mc_se);
    const bool ok_b = sb.mean <= spdp.total + 3.0 * se_b;
    os << "inflated: DTDR " << fmt("%.4f", sb.mean) << " vs SPDP " << fmt("%.4f", spdp.total)
       << " (3se " << fmt("%.4f", 3 * se_b) << ")" << (ok_b ? "" : " MISS");
    detail = os.str();
    return ok_a && ok_b;
  });

  std::printf("acceptance: %d criteria failed\n", g_failed);
  return g_failed == 0 ? 0 : 1;
}
