#pragma once

#include <vector>

#include <Eigen/Dense>

#include "histfun/design.hpp"
#include "histfun/penalties.hpp"

namespace histfun {

struct BridgeConfig {
  double gamma = 0.5;
  double lambda = 0.0;
  int max_outer_iters = 100;
  double outer_tol = 1e-6;      // relative l2 change in b between outer iterations
  int lasso_max_iters = 20000;  // coordinate-descent sweeps
  double lasso_tol = 1e-7;      // KKT residual in the rescaled LASSO problem

  void validate() const;
};

/// tau = [lambda gamma^gamma (1-gamma)^(1-gamma)]^(1/(1-gamma)).
double tau_from_lambda(double lambda, double gamma);

/// theta_j = c_j ((1-gamma)/(tau gamma))^gamma ||b_{A_j}||_1^gamma.
Eigen::VectorXd update_theta(const Eigen::VectorXd& b, const NestedGroups& groups,
                             const GroupWeights& weights, double tau);

/// g_k = sum_{j <= l(k)} theta_j^(1-1/gamma) c_j^(1/gamma). A zero theta_j
/// gives +infinity for every node of A_j, which pins that node at zero.
Eigen::VectorXd update_g(const Eigen::VectorXd& theta, const GroupWeights& weights,
                         const NestedGroups& groups);

/// Sufficient statistics of the penalized least-squares problem. `hessian`
/// is Psi'Psi + N R, the Gram matrix of Psi stacked over the scaled
/// difference blocks sqrt(w N) D.
struct GramSystem {
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xty;
  double yty = 0.0;
  Eigen::MatrixXd R;
  Eigen::MatrixXd hessian;
  int num_subjects = 0;
};

GramSystem make_gram(const DesignSystem& design, const Eigen::MatrixXd& R);
GramSystem make_gram(const Eigen::MatrixXd& xtx, const Eigen::VectorXd& xty, double yty,
                     const Eigen::MatrixXd& R, int num_subjects);

/// ||y - Psi b||^2 from the Gram statistics.
double residual_sum_of_squares(const GramSystem& gram, const Eigen::VectorXd& b);

struct LassoOptions {
  int max_iters = 20000;
  double tol = 1e-7;
};

struct LassoResult {
  Eigen::VectorXd b;            // original scale, b = G b*
  double kkt_residual = 0.0;    // max over coordinates, rescaled problem
  int sweeps = 0;
};

/// Minimizes ||y* - Psi* b*||^2 + sum_k |b*_k| with Psi* = [Psi; sqrt(w N) D] G
/// and G = diag(1/(N g_k)), returning b = G b*. Coordinates with infinite g_k
/// are fixed at zero. Cyclic coordinate descent on the Gram form, polished
/// by an exact solve on the active set once signs settle.
LassoResult solve_lasso(const GramSystem& gram, const Eigen::VectorXd& g, const LassoOptions& options,
                        const Eigen::VectorXd& warm_start);
LassoResult solve_lasso(const GramSystem& gram, const Eigen::VectorXd& g, const LassoOptions& options);

/// Per-coordinate KKT violation of `b` in the rescaled problem.
Eigen::VectorXd lasso_kkt_residuals(const GramSystem& gram, const Eigen::VectorXd& g,
                                    const Eigen::VectorXd& b);

/// The explicit rescaled LASSO (Psi*, y*) and the diagonal of G. Pinned
/// coordinates get zero columns.
struct RescaledLasso {
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
  Eigen::VectorXd scale;
};

RescaledLasso build_rescaled_lasso(const DesignSystem& design, const SmoothnessPenalty& smoothness,
                                   const Eigen::VectorXd& g);

/// (1/N)||y - Psi b||^2 + lambda sum_j c_j ||b_{A_j}||_1^gamma + b'Rb.
double bridge_objective(const GramSystem& gram, const PenaltySystem& penalties, double lambda,
                        const Eigen::VectorXd& b);

/// The convex reformulation in (b, theta):
/// (1/N)||y - Psi b||^2 + sum_j theta_j^(1-1/gamma) c_j^(1/gamma) ||b_{A_j}||_1
///   + tau sum_j theta_j + b'Rb.
double reformulated_objective(const GramSystem& gram, const PenaltySystem& penalties, double tau,
                              const Eigen::VectorXd& b, const Eigen::VectorXd& theta);

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double change = 0.0;
  int active = 0;
  int dead_groups = 0;
  int lasso_sweeps = 0;
};

struct BridgeState {
  Eigen::VectorXd b;
  Eigen::VectorXd theta;
  Eigen::VectorXd g;
  std::vector<double> objective_trace;  // entry 0 is the initial estimate
  std::vector<IterationRecord> log;
  int iterations = 0;
};

/// Alternates the theta/g update with the rescaled LASSO until the relative
/// change in b drops below outer_tol. Throws ConvergenceError (with the
/// objective trace) when max_outer_iters is reached.
BridgeState fit_group_bridge(const GramSystem& gram, const PenaltySystem& penalties,
                             const BridgeConfig& config, const Eigen::VectorXd& b0);
BridgeState fit_group_bridge(const DesignSystem& design, const PenaltySystem& penalties,
                             const BridgeConfig& config, const Eigen::VectorXd& b0);

/// Number of groups with ||b_{A_j}||_1 = 0.
int dead_groups(const NestedGroups& groups, const Eigen::VectorXd& b);

}  // namespace histfun
