#include "dyncontrol/inference.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <vector>

#include "dyncontrol/errors.hpp"
#include "dyncontrol/random.hpp"
#include "dyncontrol/stats.hpp"

namespace dyncontrol {

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

Vec9 to_vector(const ModelParams& p) {
  Vec9 v;
  v << p.mu0, p.mu1, p.gammaC, p.gammaD, p.gammaA, p.sigmaMu0, p.sigmaMu1, p.tau, p.sigmaEps;
  return v;
}

ModelParams from_vector(const Vec9& v) {
  return ModelParams{.mu0 = v[0],
                     .mu1 = v[1],
                     .gammaC = v[2],
                     .gammaD = v[3],
                     .gammaA = v[4],
                     .tau = v[7],
                     .sigmaEps = v[8],
                     .sigmaMu0 = v[5],
                     .sigmaMu1 = v[6]};
}

Eigen::VectorXd FittedModel::standard_errors() const {
  Eigen::VectorXd se(vcov.rows());
  for (Eigen::Index i = 0; i < vcov.rows(); ++i) se[i] = std::sqrt(std::max(0.0, vcov(i, i)));
  return se;
}

namespace {

// Subjects sharing visit times share one factorization.
struct ScheduleGroup {
  std::vector<double> times;
  std::vector<std::size_t> members;
};

std::vector<ScheduleGroup> group_by_schedule(const Cohort& cohort) {
  std::map<std::vector<double>, std::size_t> index;
  std::vector<ScheduleGroup> groups;
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const auto t = cohort.subjects[i].schedule.times();
    std::vector<double> key(t.begin(), t.end());
    auto [it, inserted] = index.emplace(key, groups.size());
    if (inserted) groups.push_back({std::move(key), {}});
    groups[it->second].members.push_back(i);
  }
  return groups;
}

// Per-subject design pieces that do not depend on parameters.
struct SubjectDesign {
  Eigen::VectorXd z;
  Eigen::VectorXd t;
  Eigen::VectorXd integ;  // int_0^t A du
  double c = 0.0;
  double d = 0.0;
};

SubjectDesign make_design(const CohortSubject& s) {
  SubjectDesign out;
  const auto times = s.schedule.times();
  out.z = s.traj.z;
  out.t = Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
  out.integ = treatment_integrals(times, std::span<const int>(s.traj.a.data(), s.traj.a.size()));
  out.c = s.cov.c;
  out.d = s.cov.d;
  return out;
}

class LikelihoodEvaluator {
 public:
  explicit LikelihoodEvaluator(const Cohort& cohort) : groups_(group_by_schedule(cohort)) {
    if (cohort.subjects.empty()) throw ContractError("cohort must be nonempty");
    designs_.reserve(cohort.subjects.size());
    for (const auto& s : cohort.subjects) {
      if (s.traj.z.size() != static_cast<Eigen::Index>(s.schedule.J() + 1)) {
        throw AlignmentError("observations do not match schedule");
      }
      designs_.push_back(make_design(s));
    }
  }

  LogLikelihood operator()(const ModelParams& p) const {
    constexpr double kLog2Pi = 1.8378770664093453;
    double total = 0.0;
    for (const auto& g : groups_) {
      const Eigen::MatrixXd sigma = marginal_covariance<double>(g.times, p);
      const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
      if (llt.info() != Eigen::Success) {
        return {-std::numeric_limits<double>::infinity(), true};
      }
      const auto& l = llt.matrixL();
      double logdet = 0.0;
      for (Eigen::Index r = 0; r < sigma.rows(); ++r) logdet += 2.0 * std::log(llt.matrixLLT()(r, r));
      const double n = static_cast<double>(sigma.rows());
      Eigen::VectorXd resid(sigma.rows());
      for (std::size_t i : g.members) {
        const SubjectDesign& s = designs_[i];
        const double slope = p.mu1 + p.gammaC * s.c + p.gammaD * s.d;
        resid = s.z - (p.mu0 + slope * s.t.array() + p.gammaA * s.integ.array()).matrix();
        l.solveInPlace(resid);
        total += -0.5 * (n * kLog2Pi + logdet + resid.squaredNorm());
      }
    }
    if (!std::isfinite(total)) return {-std::numeric_limits<double>::infinity(), true};
    return {total, false};
  }

  std::size_t subjects() const { return designs_.size(); }
  const std::vector<SubjectDesign>& designs() const { return designs_; }

 private:
  std::vector<ScheduleGroup> groups_;
  std::vector<SubjectDesign> designs_;
};

// Unconstrained coordinates: fixed effects as is, SDs on the log scale.
Vec9 to_internal(const ModelParams& p) {
  Vec9 v = to_vector(p);
  for (int i = kFixedEffectCount; i < 9; ++i) v[i] = std::log(v[i]);
  return v;
}

ModelParams from_internal(const Vec9& v) {
  Vec9 w = v;
  for (int i = kFixedEffectCount; i < 9; ++i) w[i] = std::exp(w[i]);
  return from_vector(w);
}

class Objective {
 public:
  Objective(const LikelihoodEvaluator& ll, double scale) : ll_(ll), scale_(scale) {}

  // Negative log-likelihood divided by the subject count; +inf when degenerate.
  double operator()(const Vec9& x) const {
    const LogLikelihood r = ll_(from_internal(x));
    if (r.degenerate) return std::numeric_limits<double>::infinity();
    return -r.value / scale_;
  }

  Vec9 gradient(const Vec9& x, double h) const {
    Vec9 g;
    for (int i = 0; i < 9; ++i) {
      Vec9 xp = x, xm = x;
      const double hi = h * std::max(1.0, std::abs(x[i]));
      xp[i] += hi;
      xm[i] -= hi;
      g[i] = ((*this)(xp) - (*this)(xm)) / (2.0 * hi);
    }
    return g;
  }

  Mat9 hessian(const Vec9& x, double h) const {
    Mat9 hess;
    const double f0 = (*this)(x);
    for (int i = 0; i < 9; ++i) {
      const double hi = h * std::max(1.0, std::abs(x[i]));
      Vec9 xp = x, xm = x;
      xp[i] += hi;
      xm[i] -= hi;
      hess(i, i) = ((*this)(xp) - 2.0 * f0 + (*this)(xm)) / (hi * hi);
      for (int j = 0; j < i; ++j) {
        const double hj = h * std::max(1.0, std::abs(x[j]));
        Vec9 a = x, b = x, c = x, d = x;
        a[i] += hi, a[j] += hj;
        b[i] += hi, b[j] -= hj;
        c[i] -= hi, c[j] += hj;
        d[i] -= hi, d[j] -= hj;
        hess(i, j) = hess(j, i) = ((*this)(a) - (*this)(b) - (*this)(c) + (*this)(d)) / (4.0 * hi * hj);
      }
    }
    return hess;
  }

 private:
  const LikelihoodEvaluator& ll_;
  double scale_;
};

}  // namespace

LogLikelihood log_likelihood(const Cohort& cohort, const ModelParams& params) {
  return LikelihoodEvaluator(cohort)(params);
}

ModelParams default_init(const Cohort& cohort) {
  if (cohort.subjects.empty()) throw ContractError("cohort must be nonempty");
  // Columns: 1, t, c t, d t, int A.
  Eigen::Matrix<double, 5, 5> xtx = Eigen::Matrix<double, 5, 5>::Zero();
  Eigen::Matrix<double, 5, 1> xty = Eigen::Matrix<double, 5, 1>::Zero();
  double tmax = 0.0;
  for (const auto& s : cohort.subjects) {
    const SubjectDesign d = make_design(s);
    for (Eigen::Index r = 0; r < d.z.size(); ++r) {
      Eigen::Matrix<double, 5, 1> x;
      x << 1.0, d.t[r], d.c * d.t[r], d.d * d.t[r], d.integ[r];
      xtx += x * x.transpose();
      xty += x * d.z[r];
      tmax = std::max(tmax, d.t[r]);
    }
  }
  const Eigen::Matrix<double, 5, 1> beta = xtx.ldlt().solve(xty);
  double rss = 0.0;
  long count = 0;
  for (const auto& s : cohort.subjects) {
    const SubjectDesign d = make_design(s);
    for (Eigen::Index r = 0; r < d.z.size(); ++r) {
      const double fit = beta[0] + (beta[1] + beta[2] * d.c + beta[3] * d.d) * d.t[r] +
                         beta[4] * d.integ[r];
      rss += (d.z[r] - fit) * (d.z[r] - fit);
      ++count;
    }
  }
  const double sd = std::sqrt(std::max(rss / std::max<long>(count, 1), 1e-6));
  ModelParams init{.mu0 = beta[0],
                   .mu1 = beta[1],
                   .gammaC = beta[2],
                   .gammaD = beta[3],
                   .gammaA = beta[4],
                   .tau = sd / std::sqrt(std::max(1.0, tmax)),
                   .sigmaEps = sd / 2.0,
                   .sigmaMu0 = sd / 2.0,
                   .sigmaMu1 = sd / (2.0 * std::max(1.0, tmax))};
  return init;
}

FittedModel fit_ml(const Cohort& cohort, const ModelParams& init, const FitOptions& options) {
  for (double v : {init.mu0, init.mu1, init.gammaC, init.gammaD, init.gammaA, init.tau,
                   init.sigmaEps, init.sigmaMu0, init.sigmaMu1}) {
    if (!std::isfinite(v)) throw InvalidParamsError("initial values must be finite");
  }
  if (!(init.tau > 0 && init.sigmaEps > 0 && init.sigmaMu0 > 0 && init.sigmaMu1 > 0)) {
    throw InvalidParamsError("initial standard deviations must be > 0 (log-scale optimization)");
  }
  const LikelihoodEvaluator ll(cohort);
  const Objective f(ll, static_cast<double>(ll.subjects()));
  const double h = options.fd_step;

  Vec9 x = to_internal(init);
  double fx = f(x);
  if (!std::isfinite(fx)) throw DegenerateModelError("log-likelihood is not finite at the start");
  Vec9 g = f.gradient(x, h);
  Mat9 hinv = Mat9::Identity();
  FittedModel out;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (g.norm() < options.gradient_tol) {
      out.converged = true;
      break;
    }
    Vec9 dir = -hinv * g;
    if (dir.dot(g) >= 0.0) {
      hinv.setIdentity();
      dir = -g;
    }
    // Backtracking line search with the Armijo condition.
    double step = 1.0;
    Vec9 xn;
    double fn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + step * dir;
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * step * g.dot(dir)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (hinv.isIdentity()) break;  // no descent even along -g
      hinv.setIdentity();
      continue;
    }
    const Vec9 gn = f.gradient(xn, h);
    const Vec9 s = xn - x;
    const Vec9 y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (iter == 0) hinv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Mat9 i_rsy = Mat9::Identity() - rho * s * y.transpose();
      hinv = i_rsy * hinv * i_rsy.transpose() + rho * s * s.transpose();
    }
    x = xn;
    fx = fn;
    g = gn;
  }
  if (!out.converged && g.norm() < options.gradient_tol) out.converged = true;

  out.estimates = from_internal(x);
  out.iterations = iter;
  out.gradient_norm = g.norm();
  out.loglik = -fx * static_cast<double>(ll.subjects());
  out.vcov = Eigen::MatrixXd::Constant(9, 9, std::numeric_limits<double>::quiet_NaN());
  if (options.compute_vcov) {
    // Observed information of the total log-likelihood in internal coordinates.
    const Mat9 info = f.hessian(x, 1e-4) * static_cast<double>(ll.subjects());
    Eigen::LDLT<Mat9> ldlt(info);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      const Mat9 inv = ldlt.solve(Mat9::Identity());
      Vec9 jac = Vec9::Ones();
      const Vec9 nat = to_vector(out.estimates);
      for (int i = kFixedEffectCount; i < 9; ++i) jac[i] = nat[i];
      out.vcov = jac.asDiagonal() * inv * jac.asDiagonal();
      out.vcov = 0.5 * (out.vcov + out.vcov.transpose()).eval();
    } else {
      out.converged = false;
    }
  }
  return out;
}

Cohort resample_observations(const Cohort& cohort, const ModelParams& params,
                             std::uint64_t seed) {
  Cohort out = cohort;
  out.meta.seed = seed;
  out.meta.params = params;
  out.meta.generator = "parametric-bootstrap";
  for (std::size_t i = 0; i < out.subjects.size(); ++i) {
    auto& s = out.subjects[i];
    StreamSet streams(seed, i);
    const double mu0i = params.mu0 + params.sigmaMu0 * streams.normal(Stream::kInitial);
    const double mu1i = params.mu1 + params.sigmaMu1 * streams.normal(Stream::kInitial);
    s.cov.mu0i = mu0i;
    s.cov.mu1i = mu1i;
    const int J = s.schedule.J();
    s.traj.y[0] = mu0i;
    const double t0 = s.schedule[0];
    if (t0 > 0.0) {
      s.traj.y[0] += drift(params, s.cov, 0) * t0 +
                     params.tau * std::sqrt(t0) * streams.normal(Stream::kDiffusion);
    }
    for (int j = 0; j < J; ++j) {
      const double dt = s.schedule.interval(j);
      s.traj.y[j + 1] = s.traj.y[j] + drift(params, s.cov, s.traj.a[j]) * dt +
                        params.tau * std::sqrt(dt) * streams.normal(Stream::kDiffusion);
    }
    for (int j = 0; j <= J; ++j) {
      s.traj.z[j] = s.traj.y[j] + params.sigmaEps * streams.normal(Stream::kMeasurement);
    }
  }
  return out;
}

BootstrapResult bootstrap_se(const Cohort& cohort, const FittedModel& fitted, int b,
                             std::uint64_t seed, const FitOptions& options) {
  if (b < 2) throw ContractError("bootstrap needs b >= 2 resamples");
  if (!fitted.converged) throw ContractError("bootstrap requires a converged fit");
  FitOptions inner = options;
  inner.compute_vcov = false;
  std::vector<Vec9> estimates;
  BootstrapResult out;
  for (int r = 0; r < b; ++r) {
    const Cohort sample =
        resample_observations(cohort, fitted.estimates, mix64(seed ^ static_cast<std::uint64_t>(r)));
    try {
      const FittedModel refit = fit_ml(sample, fitted.estimates, inner);
      if (!refit.converged) {
        ++out.dropped;
        continue;
      }
      estimates.push_back(to_vector(refit.estimates));
    } catch (const Error&) {
      ++out.dropped;
    }
  }
  out.used = static_cast<int>(estimates.size());
  out.sd = Eigen::VectorXd::Zero(9);
  if (out.used >= 2) {
    for (int p = 0; p < 9; ++p) {
      std::vector<double> col;
      col.reserve(estimates.size());
      for (const auto& e : estimates) col.push_back(e[p]);
      out.sd[p] = summarize(col).sd;
    }
  }
  return out;
}

}  // namespace dyncontrol
