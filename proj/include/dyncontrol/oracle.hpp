#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "dyncontrol/model.hpp"
#include "dyncontrol/risk.hpp"
#include "dyncontrol/strategy.hpp"

namespace dyncontrol {

enum class FixedRegime { kNever, kAlways };

/// Exact risk of a non-adaptive regime. The marker at each visit is Gaussian;
/// when `cov` lacks the effects, their population spread is added to the
/// variance. mc_se is zero and k is zero.
RiskEstimate closed_form_fixed_regime(const ModelParams& params, const SubjectCovariates& cov,
                                      const VisitSchedule& schedule, FixedRegime regime,
                                      const RiskSpec& spec);

/// Nodes and weights of the n-point Gauss-Hermite rule (weight exp(-x^2)).
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n);

struct GridOptions {
  int nodes = 512;
  double span_sd = 8.0;  ///< half-width of the Y axis in diffusion SDs at the horizon
  int gh_nodes = 20;     ///< per random-effect dimension
  int gh_z_nodes = 32;   ///< for stochastic rules with measurement noise
};

/// Law of (Y at the current visit, previous decision) for a subject with known
/// effects, as cell masses on a uniform Y grid. Before the first transition
/// the state is a point mass at `point`.
struct GridDensity {
  Eigen::VectorXd nodes;                ///< cell centres
  double h = 0.0;                       ///< cell width
  std::array<Eigen::VectorXd, 2> mass;  ///< indexed by the previous decision
  std::optional<double> point;          ///< Dirac location, when not yet spread
  Eigen::Vector2d point_mass = Eigen::Vector2d::Zero();
  int visit = 0;

  double total_mass() const;
  /// Sum over cells (or the point) of mass times fn(y).
  double expect(const std::function<double(double)>& fn) const;
};

/// Per-visit expectations collected while propagating.
struct VisitExpectations {
  std::vector<double> marker;  ///< E h(Y_j)
  std::vector<double> treat;   ///< E A_j
};

/// Start at Y(t_0) for known effects: a point mass when t_0 = 0, otherwise the
/// untreated law spread on the grid.
GridDensity initial_density(const ModelParams& params, const SubjectCovariates& cov,
                            const VisitSchedule& schedule, const GridOptions& options);

/// One step of the density recurrence: weighs the current cells by the
/// decision law given Y (Z integrated analytically), records E A_j and, unless
/// j = J, moves to visit j+1 recording E h(Y_{j+1}). Throws ResolutionError if
/// more than 1e-4 of the mass leaves the grid.
GridDensity propagate_recurrence(const GridDensity& state, const StrategySpec& strategy,
                                 const ModelParams& params, const SubjectCovariates& cov,
                                 const VisitSchedule& schedule, const RiskSpec& spec,
                                 VisitExpectations& acc, const GridOptions& options = {});

/// Combines the per-visit expectations through the scoring window.
RiskEstimate risk_integral(const VisitExpectations& acc, const RiskSpec& spec);

struct OracleResult {
  RiskEstimate estimate;
  VisitExpectations expectations;  ///< effects-averaged
  double max_mass_error = 0.0;
};

/// Quadrature risk of `strategy`; unknown effects are integrated with
/// Gauss-Hermite over their population law. Containment rules need
/// sigmaEps = 0 and known effects.
OracleResult oracle_risk(const ModelParams& params, const SubjectCovariates& cov,
                         const VisitSchedule& schedule, const StrategySpec& strategy,
                         const RiskSpec& spec, const GridOptions& options = {});

}  // namespace dyncontrol
