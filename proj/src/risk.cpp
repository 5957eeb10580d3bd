#include "dyncontrol/risk.hpp"

#include <cmath>

#include "dyncontrol/errors.hpp"
#include "dyncontrol/parallel.hpp"

namespace dyncontrol {

void RiskSpec::validate() const {
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw ConfigError("omega must be finite and >= 0");
  const bool needs_eta =
      kind == RiskKind::kTerminalExceedance || kind == RiskKind::kAdditiveExceedance;
  if (needs_eta && !std::isfinite(eta)) throw ConfigError("eta must be finite");
}

double marker_term(RiskKind kind, double y, double eta) {
  switch (kind) {
    case RiskKind::kTerminalLevel:
    case RiskKind::kAdditiveMean:
      return y;
    case RiskKind::kTerminalExceedance:
    case RiskKind::kAdditiveExceedance:
      return y > eta ? 1.0 : 0.0;
  }
  return 0.0;
}

WindowLayout window_layout(int J, ScoringWindow window) {
  if (J < 1) throw ContractError("risk needs at least one post-baseline visit");
  if (window == ScoringWindow::kPostBaseline) return {1, J, 1, J, static_cast<double>(J)};
  return {0, J, 0, J - 1, static_cast<double>(J + 1)};
}

LossParts loss_parts(const Trajectory& traj, const RiskSpec& spec) {
  const int J = traj.visits() - 1;
  const WindowLayout w = window_layout(J, spec.window);
  LossParts out;
  const bool terminal =
      spec.kind == RiskKind::kTerminalLevel || spec.kind == RiskKind::kTerminalExceedance;
  if (terminal) {
    out.marker = marker_term(spec.kind, traj.y[J], spec.eta);
  } else {
    double s = 0.0;
    for (int j = w.marker_first; j <= w.marker_last; ++j) s += marker_term(spec.kind, traj.y[j], spec.eta);
    out.marker = s / w.normalizer;
  }
  int treated = 0;
  for (int j = w.treat_first; j <= w.treat_last; ++j) treated += traj.a[j];
  out.treatment = treated / w.normalizer;
  out.fraction_treated = static_cast<double>(treated) / (w.treat_last - w.treat_first + 1);
  return out;
}

std::pair<double, double> loss(const Trajectory& traj, const RiskSpec& spec) {
  const LossParts p = loss_parts(traj, spec);
  return {p.marker, spec.omega * p.treatment};
}

void RiskMoments::add(const LossParts& p) {
  ++n_;
  sm_ += p.marker;
  st_ += p.treatment;
  sf_ += p.fraction_treated;
  smm_ += p.marker * p.marker;
  stt_ += p.treatment * p.treatment;
  smt_ += p.marker * p.treatment;
}

void RiskMoments::merge(const RiskMoments& o) {
  n_ += o.n_;
  sm_ += o.sm_;
  st_ += o.st_;
  sf_ += o.sf_;
  smm_ += o.smm_;
  stt_ += o.stt_;
  smt_ += o.smt_;
}

RiskEstimate RiskMoments::estimate(const RiskSpec& spec) const {
  RiskEstimate e;
  e.spec = spec;
  e.k = n_;
  if (n_ == 0) return e;
  const double n = static_cast<double>(n_);
  const double w = spec.omega;
  e.cost_marker = sm_ / n;
  e.cost_treatment = w * st_ / n;
  e.total = e.cost_marker + e.cost_treatment;
  e.fraction_treated = sf_ / n;
  if (n_ > 1) {
    // Sample variance of marker + w * treatment, from centered second moments.
    const double mm = sm_ / n, mt = st_ / n;
    const double var_m = smm_ / n - mm * mm;
    const double var_t = stt_ / n - mt * mt;
    const double cov_mt = smt_ / n - mm * mt;
    const double var = std::max(0.0, var_m + w * w * var_t + 2.0 * w * cov_mt) * n / (n - 1.0);
    e.mc_se = std::sqrt(var / n);
  }
  return e;
}

RiskMoments reduce_in_order(const std::vector<LossParts>& parts) {
  RiskMoments m;
  for (const auto& p : parts) m.add(p);
  return m;
}

namespace {

void check_k(long k) {
  if (k < 1) throw ContractError("replicate count k must be >= 1");
}

}  // namespace

RiskMoments risk_moments_skp(const ModelParams& params, const SubjectCovariates& cov,
                             const VisitSchedule& schedule, const StrategySpec& strategy,
                             const RiskSpec& spec, long k, std::uint64_t seed, int workers) {
  check_k(k);
  params.validate();
  validate(strategy);
  spec.validate();
  std::vector<LossParts> parts(static_cast<std::size_t>(k));
  parallel_for(parts.size(), workers, [&](std::size_t r) {
    StreamSet streams(seed, r);
    parts[r] = loss_parts(simulate_subject(params, cov, schedule, strategy, streams), spec);
  });
  return reduce_in_order(parts);
}

RiskEstimate estimate_risk_skp(const ModelParams& params, const SubjectCovariates& cov,
                               const VisitSchedule& schedule, const StrategySpec& strategy,
                               const RiskSpec& spec, long k, std::uint64_t seed, int workers) {
  return risk_moments_skp(params, cov, schedule, strategy, spec, k, seed, workers).estimate(spec);
}

RiskMoments risk_moments_spdp(const Posterior& posterior, const ModelParams& params,
                              const SubjectCovariates& cov, const VisitSchedule& schedule,
                              const StrategySpec& strategy, const RiskSpec& spec, long k,
                              std::uint64_t seed, int workers) {
  check_k(k);
  params.validate();
  validate(strategy);
  spec.validate();
  const Eigen::Matrix2d root = psd_sqrt(posterior.omega);
  const EffectsPrior belief = posterior.as_prior();
  std::vector<LossParts> parts(static_cast<std::size_t>(k));
  parallel_for(parts.size(), workers, [&](std::size_t r) {
    StreamSet streams(seed, r);
    Eigen::Vector2d xi;
    xi(0) = streams.normal(Stream::kInitial);
    xi(1) = streams.normal(Stream::kInitial);
    const Eigen::Vector2d mu = posterior.nu + root * xi;
    SubjectCovariates truth = cov;
    truth.mu0i = mu(0);
    truth.mu1i = mu(1);
    SubjectCovariates known = cov;
    known.mu0i.reset();
    known.mu1i.reset();
    auto& rng = streams.engine(Stream::kStrategy);
    const Trajectory traj = simulate_path(
        params, truth, known, schedule, streams, &belief,
        [&](const ObservedHistory& h) { return decide(strategy, h, params, rng); });
    parts[r] = loss_parts(traj, spec);
  });
  return reduce_in_order(parts);
}

RiskEstimate estimate_risk_spdp(const Posterior& posterior, const ModelParams& params,
                                const SubjectCovariates& cov, const VisitSchedule& schedule,
                                const StrategySpec& strategy, const RiskSpec& spec, long k,
                                std::uint64_t seed, int workers) {
  return risk_moments_spdp(posterior, params, cov, schedule, strategy, spec, k, seed, workers)
      .estimate(spec);
}

RiskEstimate estimate_risk_marginal(const PopulationSpec& pop, const VisitSchedule& schedule,
                                    const StrategySpec& strategy, const RiskSpec& spec, long k,
                                    std::uint64_t seed, int workers) {
  check_k(k);
  pop.validate();
  validate(strategy);
  spec.validate();
  std::vector<LossParts> parts(static_cast<std::size_t>(k));
  parallel_for(parts.size(), workers, [&](std::size_t r) {
    StreamSet streams(seed, r);
    SubjectCovariates cov;
    cov.c = streams.normal(Stream::kCovariates);
    cov.d = streams.uniform(Stream::kCovariates) < pop.prob_d ? 1 : 0;
    parts[r] = loss_parts(simulate_subject(pop.params, cov, schedule, strategy, streams), spec);
  });
  return reduce_in_order(parts).estimate(spec);
}

Effect contrast(const RiskEstimate& a, const RiskEstimate& b) {
  if (!(a.spec == b.spec)) throw ContractError("contrast requires identical risk specifications");
  return {a.total - b.total, std::sqrt(a.mc_se * a.mc_se + b.mc_se * b.mc_se)};
}

}  // namespace dyncontrol
