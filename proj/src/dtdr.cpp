#include "dyncontrol/dtdr.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "dyncontrol/errors.hpp"
#include "dyncontrol/latent_filter.hpp"
#include "dyncontrol/parallel.hpp"

namespace dyncontrol {

SimulatedSubject::SimulatedSubject(const ModelParams& params, const SubjectCovariates& truth,
                                   const VisitSchedule& schedule, StreamSet streams)
    : params_(params), truth_(truth), schedule_(schedule), streams_(streams),
      traj_(schedule.J() + 1) {
  if (!truth.effects_known()) throw ContractError("simulated subject needs realized effects");
  traj_.y[0] = *truth.mu0i;
  const double t0 = schedule_[0];
  if (t0 > 0.0) {
    traj_.y[0] += drift(params_, truth_, 0) * t0 +
                  params_.tau * std::sqrt(t0) * streams_.normal(Stream::kDiffusion);
  }
}

std::optional<double> SimulatedSubject::observe() {
  if (visit_ > schedule_.J()) return std::nullopt;
  if (!observed_) {
    traj_.z[visit_] = traj_.y[visit_] + params_.sigmaEps * streams_.normal(Stream::kMeasurement);
    observed_ = true;
  }
  return traj_.z[visit_];
}

void SimulatedSubject::act(int a) {
  if (visit_ > schedule_.J()) return;
  traj_.a[visit_] = a;
  if (visit_ < schedule_.J()) {
    const double dt = schedule_.interval(visit_);
    traj_.y[visit_ + 1] = traj_.y[visit_] + drift(params_, truth_, a) * dt +
                          params_.tau * std::sqrt(dt) * streams_.normal(Stream::kDiffusion);
  }
  ++visit_;
  observed_ = false;
}

std::optional<double> RecordedData::observe() {
  if (visit_ >= z_.size()) return std::nullopt;
  return z_[visit_];
}

namespace {

LatentFilter<double> filter_history(const Posterior& prior, const ModelParams& params,
                                    const SubjectCovariates& cov, const VisitSchedule& schedule,
                                    std::span<const double> z, std::span<const int> a) {
  LatentFilter<double> filter(prior.as_prior(), params);
  const double slope = covariate_slope(params, cov);
  if (schedule[0] > 0.0) filter.advance(schedule[0], slope);
  for (std::size_t r = 0; r < z.size(); ++r) {
    const int ri = static_cast<int>(r);
    if (r > 0) filter.advance(schedule.interval(ri - 1), slope + params.gammaA * a[r - 1]);
    filter.observe(z[r]);
  }
  return filter;
}

// Root of a PSD 3x3 covariance.
Eigen::Matrix3d sqrt3(const Eigen::Matrix3d& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

RiskMoments remaining_horizon_moments(const Posterior& prior, const ModelParams& params,
                                      const SubjectCovariates& cov, const VisitSchedule& schedule,
                                      std::span<const double> z, std::span<const int> a,
                                      double beta, const RiskSpec& spec, long k,
                                      std::uint64_t seed, int workers) {
  if (z.empty() || a.size() + 1 != z.size()) throw ContractError("history needs Z_0..Z_j and A_0..A_{j-1}");
  if (k < 1) throw ContractError("replicate count k must be >= 1");
  const int J = schedule.J();
  const int j = static_cast<int>(z.size()) - 1;
  if (j >= J) throw ContractError("no visits remain after the last one");
  const WindowLayout w = window_layout(J, spec.window);
  const int m_first = std::max(j + 1, w.marker_first);
  const int t_first = std::max(j, w.treat_first);
  const bool terminal =
      spec.kind == RiskKind::kTerminalLevel || spec.kind == RiskKind::kTerminalExceedance;
  const double norm = terminal ? 1.0 : static_cast<double>(w.marker_last - m_first + 1);
  const int n_treat = std::max(0, w.treat_last - t_first + 1);

  const LatentFilter<double> filter = filter_history(prior, params, cov, schedule, z, a);
  const Eigen::Vector3d mean = filter.mean();
  const Eigen::Matrix3d root = sqrt3(filter.cov());
  const double slope = covariate_slope(params, cov);
  const int a_now = z[static_cast<std::size_t>(j)] > beta ? 1 : 0;

  std::vector<LossParts> parts(static_cast<std::size_t>(k));
  parallel_for(parts.size(), workers, [&](std::size_t r) {
    StreamSet streams(seed, r);
    Eigen::Vector3d xi;
    for (int i = 0; i < 3; ++i) xi(i) = streams.normal(Stream::kInitial);
    const Eigen::Vector3d state = mean + root * xi;
    double y = state(0);
    const double mu1 = state(2);
    int act = a_now;
    double marker = 0.0;
    int treated = 0;
    for (int v = j; v <= J; ++v) {
      if (v > j) {
        const double zv = y + params.sigmaEps * streams.normal(Stream::kMeasurement);
        act = zv > beta ? 1 : 0;
        if (v >= m_first && v <= w.marker_last && !terminal) {
          marker += marker_term(spec.kind, y, spec.eta);
        }
      }
      if (v >= t_first && v <= w.treat_last) treated += act;
      if (v < J) {
        const double dt = schedule.interval(v);
        y += (mu1 + slope + params.gammaA * act) * dt +
             params.tau * std::sqrt(dt) * streams.normal(Stream::kDiffusion);
      }
    }
    if (terminal) marker = marker_term(spec.kind, y, spec.eta);
    parts[r] = {marker / norm, treated / norm,
                n_treat > 0 ? static_cast<double>(treated) / n_treat : 0.0};
  });
  return reduce_in_order(parts);
}

DtdrTrace dtdr_run(const Posterior& prior, const ModelParams& params, const SubjectCovariates& cov,
                   const VisitSchedule& schedule, const RiskSpec& spec, const SearchConfig& search,
                   Environment& environment, std::uint64_t seed) {
  params.validate();
  spec.validate();
  search.validate();
  psd_sqrt(prior.omega);
  SubjectCovariates observed = cov;
  observed.mu0i.reset();
  observed.mu1i.reset();
  const int J = schedule.J();
  const auto times = schedule.times();
  std::vector<double> z;
  std::vector<int> a;
  DtdrTrace trace;
  for (int j = 0; j <= J; ++j) {
    const std::optional<double> zj = environment.observe();
    if (!zj) {
      trace.truncated = true;
      break;
    }
    z.push_back(*zj);
    const Eigen::VectorXd z_bar = Eigen::Map<const Eigen::VectorXd>(z.data(), j + 1);
    const Posterior post =
        posterior_update(prior, z_bar, design_expansion(times.subspan(0, j + 1), observed, a, params));

    DtdrStep step{j, times[j], std::numeric_limits<double>::quiet_NaN(), 0, *zj, post};
    if (j < J) {
      const std::uint64_t visit_seed = mix64(seed ^ (0x9d5cULL + static_cast<std::uint64_t>(j)));
      const ThresholdOptimum opt = optimize_threshold(
          [&](double beta) {
            return remaining_horizon_moments(prior, params, observed, schedule, z, a, beta, spec,
                                             search.k_eval, visit_seed, 1)
                .estimate(spec);
          },
          search);
      step.beta_star = opt.beta;
      step.decision = *zj > opt.beta ? 1 : 0;
    }
    // At the last visit nothing remains to score beyond a possible treatment
    // charge, so the rule does not treat.
    trace.steps.push_back(step);
    a.push_back(step.decision);
    environment.act(step.decision);
  }
  return trace;
}

}  // namespace dyncontrol
