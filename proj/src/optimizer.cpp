#include "dyncontrol/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dyncontrol/errors.hpp"
#include "dyncontrol/parallel.hpp"

namespace dyncontrol {

void SearchConfig::validate() const {
  if (!(beta_lo < beta_hi)) throw ConfigError("search interval requires beta_lo < beta_hi");
  if (grid_n < 8) throw ConfigError("grid_n must be >= 8");
  if (!(refine_tol > 0.0)) throw ConfigError("refine_tol must be > 0");
  if (k_eval < 1) throw ConfigError("k_eval must be >= 1");
}

double golden_section_minimize(const std::function<double(double)>& f, double a, double b,
                               double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  double best_x = fc <= fd ? c : d, best_f = std::min(fc, fd);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
      if (fc < best_f) best_f = fc, best_x = c;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
      if (fd < best_f) best_f = fd, best_x = d;
    }
  }
  return best_x;
}

namespace {

struct Candidate {
  double beta;
  RiskEstimate est;
};

// Strictly better, or equal with a larger threshold.
bool better(const Candidate& x, const Candidate& y) {
  if (x.est.total != y.est.total) return x.est.total < y.est.total;
  return x.beta > y.beta;
}

ThresholdOptimum finish(const Candidate& best, double beta_hi, int evaluations) {
  ThresholdOptimum out;
  out.beta = best.beta;
  out.estimate = best.est;
  out.never_treat_boundary = best.beta >= beta_hi || best.est.fraction_treated == 0.0;
  out.evaluations = evaluations;
  return out;
}

}  // namespace

ThresholdOptimum optimize_threshold(const RiskEvaluator& evaluator, const SearchConfig& cfg) {
  cfg.validate();
  const int n = cfg.grid_n;
  const double h = (cfg.beta_hi - cfg.beta_lo) / (n - 1);
  std::vector<Candidate> grid(static_cast<std::size_t>(n));
  parallel_for(grid.size(), cfg.workers, [&](std::size_t i) {
    const double b = i + 1 == grid.size() ? cfg.beta_hi : cfg.beta_lo + h * static_cast<double>(i);
    grid[i] = {b, evaluator(b)};
  });
  std::size_t ib = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (better(grid[i], grid[ib])) ib = i;
  }
  Candidate best = grid[ib];
  int evaluations = n;
  const double lo = grid[ib > 0 ? ib - 1 : 0].beta;
  const double hi = grid[std::min(ib + 1, grid.size() - 1)].beta;
  if (hi - lo > cfg.refine_tol) {
    golden_section_minimize(
        [&](double b) {
          Candidate c{b, evaluator(b)};
          ++evaluations;
          if (better(c, best)) best = c;
          return c.est.total;
        },
        lo, hi, cfg.refine_tol);
  }
  return finish(best, cfg.beta_hi, evaluations);
}

ThresholdOptimum local_threshold_search(const RiskEvaluator& evaluator, double start, double step,
                                        double tol, int max_moves) {
  int evaluations = 0;
  auto eval = [&](double b) {
    ++evaluations;
    return Candidate{b, evaluator(b)};
  };
  Candidate best = eval(start);
  for (int move = 0; move < max_moves; ++move) {
    const Candidate left = eval(best.beta - step);
    const Candidate right = eval(best.beta + step);
    if (left.est.total < best.est.total && left.est.total <= right.est.total) {
      best = left;
    } else if (right.est.total < best.est.total) {
      best = right;
    } else {
      break;
    }
  }
  const double centre = best.beta;
  golden_section_minimize(
      [&](double b) {
        Candidate c = eval(b);
        if (c.est.total < best.est.total) best = c;
        return c.est.total;
      },
      centre - step, centre + step, tol);
  return finish(best, std::numeric_limits<double>::infinity(), evaluations);
}

std::vector<SweepRow> sweep_omega(const std::vector<double>& omegas, const SearchConfig& cfg,
                                  const std::vector<Profile>& profiles, const RiskSpec& base_spec,
                                  const std::function<ComponentEvaluator(const Profile&)>& make) {
  if (omegas.empty()) throw ContractError("sweep_omega needs at least one omega");
  cfg.validate();
  std::vector<SweepRow> rows;
  for (const Profile& profile : profiles) {
    const ComponentEvaluator components = make(profile);
    std::map<double, RiskMoments> cache;
    auto moments_at = [&](double beta) -> const RiskMoments& {
      auto it = cache.find(beta);
      if (it == cache.end()) it = cache.emplace(beta, components(beta)).first;
      return it->second;
    };
    // Grid evaluations may run concurrently; fill the grid part of the cache first.
    {
      const int n = cfg.grid_n;
      const double h = (cfg.beta_hi - cfg.beta_lo) / (n - 1);
      std::vector<double> betas(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) betas[i] = i + 1 == n ? cfg.beta_hi : cfg.beta_lo + h * i;
      std::vector<RiskMoments> got(betas.size());
      parallel_for(betas.size(), cfg.workers, [&](std::size_t i) { got[i] = components(betas[i]); });
      for (std::size_t i = 0; i < betas.size(); ++i) cache.emplace(betas[i], got[i]);
    }
    SearchConfig serial = cfg;
    serial.workers = 1;
    std::vector<ThresholdOptimum> optima;
    for (double omega : omegas) {
      RiskSpec spec = base_spec;
      spec.omega = omega;
      optima.push_back(optimize_threshold(
          [&](double beta) { return moments_at(beta).estimate(spec); }, serial));
    }
    for (std::size_t w = 0; w < omegas.size(); ++w) {
      RiskSpec spec = base_spec;
      spec.omega = omegas[w];
      Candidate best{optima[w].beta, optima[w].estimate};
      for (const auto& [beta, m] : cache) {
        Candidate c{beta, m.estimate(spec)};
        if (better(c, best)) best = c;
      }
      const ThresholdOptimum opt = finish(best, cfg.beta_hi, optima[w].evaluations);
      rows.push_back({omegas[w], profile, opt.beta, opt.estimate.cost_marker,
                      opt.estimate.cost_treatment, opt.estimate.total,
                      opt.estimate.fraction_treated, opt.estimate.mc_se,
                      opt.never_treat_boundary});
    }
  }
  return rows;
}

std::function<ComponentEvaluator(const Profile&)> skp_components(const ModelParams& params,
                                                                 const VisitSchedule& schedule,
                                                                 const RiskSpec& spec, long k,
                                                                 std::uint64_t seed,
                                                                 int workers) {
  return [=](const Profile& p) -> ComponentEvaluator {
    SubjectCovariates cov;
    cov.c = p.c;
    cov.d = p.d;
    if (params.sigmaMu0 == 0.0) cov.mu0i = params.mu0;
    if (params.sigmaMu1 == 0.0) cov.mu1i = params.mu1;
    return [=](double beta) {
      return risk_moments_skp(params, cov, schedule, PersonalizedThreshold{beta}, spec, k, seed,
                              workers);
    };
  };
}

std::function<ComponentEvaluator(const Profile&)> spdp_components(const ModelParams& params,
                                                                  const VisitSchedule& schedule,
                                                                  const RiskSpec& spec, long k,
                                                                  std::uint64_t seed,
                                                                  int workers) {
  return [=](const Profile& p) -> ComponentEvaluator {
    SubjectCovariates cov;
    cov.c = p.c;
    cov.d = p.d;
    const Posterior prior = Posterior::from_prior(effects_prior(params, cov));
    return [=](double beta) {
      return risk_moments_spdp(prior, params, cov, schedule, PersonalizedThreshold{beta}, spec, k,
                               seed, workers);
    };
  };
}

}  // namespace dyncontrol
