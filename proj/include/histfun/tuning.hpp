#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "histfun/design.hpp"
#include "histfun/estimator.hpp"
#include "histfun/penalties.hpp"

namespace histfun {

/// trace(Psi_s (Psi_s'Psi_s + N R_s)^{-1} Psi_s'), computed in the K x K form
/// trace((Psi_s'Psi_s + N R_s)^{-1} Psi_s'Psi_s). R_s keeps the difference rows
/// whose endpoints are both active.
double effective_df(const Eigen::MatrixXd& xtx, const SmoothnessPenalty& smoothness,
                    const std::vector<bool>& active, int num_subjects);
double effective_df(const DesignSystem& design, const SmoothnessPenalty& smoothness,
                    const std::vector<bool>& active);

/// Value returned instead of -infinity when the residual sum of squares is 0.
inline constexpr double kBicFloor = -1e300;

/// N log(rss / N) + log(N) df, with N the number of subjects.
double bic(double rss, double df, int num_subjects);
double bic(const DesignSystem& design, const Eigen::VectorXd& b_hat, double df);

struct TuningRecord {
  double lambda = 0.0;
  SmoothnessWeights omega;
  double df = 0.0;
  double bic = 0.0;
  double delta_hat = 0.0;
  double rss = 0.0;
  bool ok = false;
  std::string error;
};

struct TuningGrid {
  std::vector<double> lambdas;
  std::vector<SmoothnessWeights> omegas;
  std::vector<TuningRecord> records;  // sorted by BIC after grid_search

  /// lambda in 10^-4..10^1 (8 points) by tied omega in 10^-6..10^-1 (4 points).
  static TuningGrid defaults();
};

std::vector<double> log_spaced(double lo, double hi, int count);

struct TuningOutcome {
  double lambda = 0.0;
  SmoothnessWeights omega;
  FitResult fit;
  TuningGrid grid;
};

/// Fits every (lambda, omega) pair and returns the BIC minimizer; ties go to
/// the larger lambda. Throws when every candidate fails.
TuningOutcome grid_search(const PreparedData& data, TuningGrid grid, const EstimatorOptions& base,
                          int threads = 1);

}  // namespace histfun
