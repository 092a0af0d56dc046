#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "histfun/design.hpp"
#include "histfun/mesh.hpp"
#include "histfun/penalties.hpp"
#include "histfun/solver.hpp"

namespace histfun {

/// How the first fully-zero group A_j is turned into a lag.
///
/// kGroupIndex returns j * T/M, the literal estimator. kSupportBoundary
/// returns (j-1) * T/M, the line t = s + (j-1)T/M on and above which the
/// fitted surface vanishes.
enum class LagConvention { kGroupIndex, kSupportBoundary };

struct EstimatorOptions {
  BridgeConfig bridge;
  SmoothnessWeights omega;
  bool adaptive_weights = true;
  LagConvention lag_convention = LagConvention::kGroupIndex;
  double zero_tol = 1e-8;         // relative to max |b|
  std::optional<double> ridge;    // initializer ridge; default 1e-8 trace(Psi'Psi)/K
};

/// Centered data, design and the pieces shared by every fit on the same
/// covariates. Bootstrap replicates only swap the response.
struct PreparedData {
  FunctionalSample x;
  FunctionalSample y;
  CenteredData x_centered;
  CenteredData y_centered;
  DesignSystem design;
  Eigen::MatrixXd xtx;
  NestedGroups groups;
  DifferenceMatrices differences;

  int num_subjects() const noexcept { return design.num_subjects; }
  const TriangularMesh& mesh() const noexcept { return design.mesh; }
};

PreparedData prepare(const FunctionalSample& x, const FunctionalSample& y, const TriangularMesh& mesh);

/// Same covariates, new response curves (N x grid).
PreparedData with_response(const PreparedData& base, const Eigen::MatrixXd& y_values);

struct LagEstimate {
  double delta = 0.0;
  int group = 0;  // 1-based index j of the certified zero group, 0 if none
};

struct FitResult {
  CoefficientSurface beta_hat;   // after the refit
  CoefficientSurface b_bridge;   // sparse group bridge estimate
  LagEstimate lag;
  Eigen::VectorXd grid;
  Eigen::VectorXd alpha_hat;
  EstimatorOptions options;
  Eigen::VectorXd c;             // group weights used
  std::vector<double> objective_trace;
  std::vector<IterationRecord> log;
  double df = 0.0;
  double bic = 0.0;
  double rss = 0.0;              // ||y - Psi beta_hat||^2
  Eigen::VectorXd eval_times;
  Eigen::MatrixXd fitted;        // centered scale, N x eval_times, from beta_hat
  Eigen::MatrixXd residuals;

  double delta_hat() const noexcept { return lag.delta; }
};

/// b0 = argmin ||y - Psi b||^2 + ridge b'(R + I)b.
Eigen::VectorXd ols_initial(const Eigen::MatrixXd& xtx, const Eigen::VectorXd& xty, const Eigen::MatrixXd& R,
                            std::optional<double> ridge = std::nullopt);
Eigen::VectorXd ols_initial(const DesignSystem& design, const Eigen::MatrixXd& R,
                            std::optional<double> ridge = std::nullopt);

/// Smallest j in 1..M with |b_k| <= zero_tol on all of A_j, converted to a
/// lag by `convention`; T when no such group exists.
LagEstimate extract_delta(const CoefficientSurface& surface, const NestedGroups& groups, double zero_tol,
                          LagConvention convention = LagConvention::kGroupIndex);

/// Smooth-only penalized least squares with the nodes of the certified zero
/// group fixed at zero. Difference rows survive when both endpoints survive.
CoefficientSurface refit(const GramSystem& gram, const TriangularMesh& mesh, const PenaltySystem& penalties,
                         const LagEstimate& lag);
CoefficientSurface refit(const DesignSystem& design, const PenaltySystem& penalties, const LagEstimate& lag);

/// alpha(t_q) = ybar(t_q) - int_0^t_q xbar(s) beta(s, t_q) ds on the sample grid.
Eigen::VectorXd recover_intercept(const Eigen::VectorXd& grid, const Eigen::VectorXd& x_mean,
                                  const Eigen::VectorXd& y_mean, const CoefficientSurface& beta_hat);

/// Full pipeline at fixed tuning parameters: initializer, group bridge fit,
/// lag extraction, refit, intercept and diagnostics.
FitResult fit_model(const PreparedData& data, const EstimatorOptions& options);

/// yhat_i(t_q) = alpha(t_q) + sum_k b_k psi_ik(t_q) on the fit's grid.
FunctionalSample predict(const FitResult& fit, const FunctionalSample& x_new);

struct BootstrapResult {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  std::vector<double> deltas;     // successful replicates, in replicate order
  std::vector<int> failed;        // replicate indices that did not converge
};

/// Residual bootstrap: whole residual curves are resampled across subjects,
/// added to the fitted curves and the model is re-estimated at the same
/// tuning parameters. The interval is the percentile interval of the lags.
BootstrapResult bootstrap_delta_ci(const FitResult& fit, const PreparedData& data, int replications,
                                   double level, std::uint64_t seed, int threads = 1);

/// Linear-interpolation sample quantile (type 7) of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double p);

}  // namespace histfun
