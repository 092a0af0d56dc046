#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "histfun/mesh.hpp"

namespace histfun {

enum class CurveRole { kCovariate, kResponse };

/// N curves sampled on a shared ascending grid 0 = t_0 < ... < t_Q = T.
/// Row i of `values` is curve i.
struct FunctionalSample {
  FunctionalSample(Eigen::VectorXd grid, Eigen::MatrixXd values, CurveRole role);

  Eigen::VectorXd grid;
  Eigen::MatrixXd values;
  CurveRole role;

  int num_curves() const noexcept { return static_cast<int>(values.rows()); }
  int num_points() const noexcept { return static_cast<int>(grid.size()); }
  double horizon() const noexcept { return grid[grid.size() - 1]; }
};

struct CenteredData {
  FunctionalSample centered;
  Eigen::VectorXd mean_curve;
};

/// Pointwise centering across curves. Requires at least two curves.
CenteredData center(const FunctionalSample& sample);

/// Piecewise-linear interpolation of one sampled curve at time `t`.
double interpolate(const Eigen::VectorXd& grid, const Eigen::Ref<const Eigen::VectorXd>& values,
                   double t);

/// psi_k(t) = int_0^t x(s) phi_k(s, t) ds for every node k, with x taken as
/// the piecewise-linear interpolant of its samples. The integrand is
/// piecewise quadratic between the union of sample times and the points where
/// the line at height t crosses mesh edges, so each piece is integrated
/// exactly with Simpson's rule.
Eigen::VectorXd compute_psi(const TriangularMesh& mesh, const Eigen::VectorXd& grid,
                            const Eigen::Ref<const Eigen::VectorXd>& x_values, double t_eval);

/// Stacked least-squares system. Rows are subject-major, time-minor:
/// row i * eval_times.size() + q holds psi_ik(t_q) and y_i(t_q).
struct DesignSystem {
  Eigen::MatrixXd psi;
  Eigen::VectorXd y;
  TriangularMesh mesh;
  Eigen::VectorXd eval_times;
  int num_subjects = 0;

  Eigen::Index rows_per_subject() const noexcept { return eval_times.size(); }
};

/// Builds the design matrix for every curve of `x` (rows of psi) and the
/// responses of `y` interpolated at `eval_times` (default: the y grid).
DesignSystem assemble(const CenteredData& x, const CenteredData& y, const TriangularMesh& mesh,
                      std::optional<Eigen::VectorXd> eval_times = std::nullopt);

/// Design rows for arbitrary covariate curves at `eval_times` (N*Q' x K).
Eigen::MatrixXd design_matrix(const TriangularMesh& mesh, const FunctionalSample& x,
                              const Eigen::VectorXd& eval_times);

}  // namespace histfun
