#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "histfun/design.hpp"
#include "histfun/estimator.hpp"

namespace histfun {

/// Disk of radius `radius` centered at (s, t) where the Scenario 3 surface
/// is set to zero.
struct Hole {
  double s = 0.0;
  double t = 0.0;
  double radius = 0.0;
};

/// Ground-truth coefficient surfaces on {0 <= s <= t <= T}.
///   1: 10 on S_eps, linear ramp to 0 across the band delta - eps < t - s <= delta
///   2: 10 (1 - (t - s)/delta) on S
///   3: scenario 2 with holes inside S_eps
struct Scenario {
  int id = 1;
  double delta = 0.5;
  double epsilon = 0.05;
  double horizon = 1.0;
  double amplitude = 10.0;
  std::vector<Hole> holes;

  void validate() const;
};

struct HoleOptions {
  int count = 3;
  double min_radius = 0.1;
  double max_radius = 0.2;
};

/// Builds a scenario; for id 3 the holes are drawn from `hole_seed`.
Scenario make_scenario(int id, double delta, double epsilon, std::uint64_t hole_seed = 0,
                       const HoleOptions& holes = {}, double horizon = 1.0);

double true_beta(const Scenario& scenario, double s, double t);

/// x(t) = a + b t/T + sum_{m=1}^{F} (A_m sin(2 pi m t/T) + B_m cos(2 pi m t/T)),
/// with a, b ~ U(-trend, trend) and A_m, B_m ~ U(-amplitude/m, amplitude/m).
struct CovariateOptions {
  int frequencies = 10;
  double amplitude = 2.0;
  double trend = 1.0;
};

/// Upper bound on |x''| implied by the options; max |second difference| of a
/// curve sampled with spacing h is at most h^2 times this.
double curvature_bound(const CovariateOptions& options, double horizon);

FunctionalSample gen_covariates(int n, const Eigen::VectorXd& grid, const CovariateOptions& options,
                                std::uint64_t seed);

/// y_i(t_q) = int_0^t_q x_i(s) beta(s, t_q) ds + e_iq, e_iq ~ N(0, sigma^2).
/// The integral uses composite Simpson with 2000 panels against the analytic
/// surface and its own linear interpolation of x.
FunctionalSample gen_response(const FunctionalSample& x, const Scenario& scenario, double sigma,
                              std::uint64_t seed);

/// sqrt(mean (beta_hat - beta)^2) over a points x points lattice clipped to
/// the domain.
double rise(const CoefficientSurface& beta_hat, const Scenario& scenario, int points = 101);

struct ReplicationRecord {
  double delta_hat = 0.0;
  double rise = 0.0;
};

struct MetricsReport {
  double delta_true = 0.0;
  double rmse_delta = 0.0;
  double bias_delta = 0.0;      // mean(delta_hat - delta)
  double pct_bias_delta = 0.0;  // 100 * bias / delta
  double sd_delta = 0.0;        // sample SD, n - 1 denominator
  double rise_mean = 0.0;
  double rise_sd = 0.0;
  std::vector<ReplicationRecord> replications;
};

MetricsReport evaluate(const std::vector<ReplicationRecord>& records, double delta_true);
MetricsReport evaluate(const std::vector<FitResult>& fits, const Scenario& scenario, int points = 101);

/// Default study shape: 32 subjects on a 65-point grid over [0, T].
struct SimulationSetup {
  int subjects = 32;
  int grid_points = 65;
  double sigma = 0.5;
  CovariateOptions covariates;
};

struct SimulatedData {
  FunctionalSample x;
  FunctionalSample y;
};

Eigen::VectorXd uniform_grid(int points, double horizon);

/// One replication; covariates and noise draw from streams derived from
/// (seed, replication).
SimulatedData simulate(const Scenario& scenario, const SimulationSetup& setup, std::uint64_t seed,
                       std::uint64_t replication = 0);

}  // namespace histfun
