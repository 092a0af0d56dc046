#include "histfun/simulation.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "histfun/error.hpp"

namespace histfun {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// Stream tags keep covariate, noise and hole draws independent.
constexpr std::uint64_t kCovariateStream = 0x11;
constexpr std::uint64_t kNoiseStream = 0x22;
constexpr std::uint64_t kHoleStream = 0x33;

/// Linear interpolation kept separate from the design module so the
/// response generator shares no code with the estimator.
double lerp_curve(const Eigen::VectorXd& grid, const Eigen::VectorXd& values, double s) {
  const Eigen::Index n = grid.size();
  if (s <= grid[0]) return values[0];
  if (s >= grid[n - 1]) return values[n - 1];
  Eigen::Index lo = 0, hi = n - 1;
  while (hi - lo > 1) {
    const Eigen::Index mid = (lo + hi) / 2;
    (grid[mid] <= s ? lo : hi) = mid;
  }
  const double w = (s - grid[lo]) / (grid[hi] - grid[lo]);
  return values[lo] + w * (values[hi] - values[lo]);
}

}  // namespace

void Scenario::validate() const {
  if (id < 1 || id > 3) throw InvalidConfig("scenario id must be 1, 2 or 3");
  if (!(horizon > 0.0)) throw InvalidConfig("scenario horizon must be positive");
  if (!(delta > 0.0 && delta <= horizon)) throw InvalidConfig("scenario lag must lie in (0, T]");
  if (id == 1 && !(epsilon > 0.0 && epsilon < delta)) {
    throw InvalidConfig("scenario 1 needs 0 < epsilon < delta");
  }
}

Scenario make_scenario(int id, double delta, double epsilon, std::uint64_t hole_seed, const HoleOptions& holes,
                       double horizon) {
  Scenario sc;
  sc.id = id;
  sc.delta = delta;
  sc.epsilon = epsilon;
  sc.horizon = horizon;
  sc.validate();
  if (id != 3) return sc;
  if (!(epsilon >= 0.0 && epsilon < delta)) throw InvalidConfig("scenario 3 needs 0 <= epsilon < delta");

  // Centers are drawn so that each disk stays below the line t - s = delta - eps.
  auto rng = make_rng(hole_seed, kHoleStream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double band = delta - epsilon;
  for (int h = 0; h < holes.count; ++h) {
    const double r = holes.min_radius + (holes.max_radius - holes.min_radius) * unit(rng);
    const double max_lag = band - r * std::numbers::sqrt2;
    if (max_lag < 0.0) throw InvalidConfig("hole radius too large for the region inside S_eps");
    for (int attempt = 0;; ++attempt) {
      if (attempt > 100000) throw InvalidConfig("could not place scenario 3 holes");
      const double t = horizon * unit(rng);
      const double s = horizon * unit(rng);
      if (s <= t && t - s <= max_lag) {
        sc.holes.push_back({s, t, r});
        break;
      }
    }
  }
  return sc;
}

double true_beta(const Scenario& sc, double s, double t) {
  const double tol = 1e-10 * sc.horizon;
  if (s < -tol || t > sc.horizon + tol || s > t + tol) {
    throw DomainError("true surface evaluated outside the domain");
  }
  const double lag = std::max(t - s, 0.0);
  if (lag > sc.delta) return 0.0;
  switch (sc.id) {
    case 1:
      if (lag <= sc.delta - sc.epsilon) return sc.amplitude;
      return sc.amplitude * (sc.delta - lag) / sc.epsilon;
    case 2:
      return sc.amplitude * (1.0 - lag / sc.delta);
    default:
      for (const Hole& h : sc.holes) {
        const double ds = s - h.s, dt = t - h.t;
        if (ds * ds + dt * dt < h.radius * h.radius) return 0.0;
      }
      return sc.amplitude * (1.0 - lag / sc.delta);
  }
}

double curvature_bound(const CovariateOptions& options, double horizon) {
  const double w = 2.0 * std::numbers::pi / horizon;
  double bound = 0.0;
  for (int m = 1; m <= options.frequencies; ++m) bound += 2.0 * options.amplitude / m * (w * m) * (w * m);
  return bound;
}

FunctionalSample gen_covariates(int n, const Eigen::VectorXd& grid, const CovariateOptions& options,
                                std::uint64_t seed) {
  if (n < 1) throw InvalidConfig("need at least one covariate curve");
  auto rng = make_rng(seed, kCovariateStream);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double horizon = grid[grid.size() - 1];
  const double w = 2.0 * std::numbers::pi / horizon;
  Eigen::MatrixXd values(n, grid.size());
  for (int i = 0; i < n; ++i) {
    const double a = options.trend * unit(rng);
    const double b = options.trend * unit(rng);
    std::vector<double> sin_amp(static_cast<std::size_t>(options.frequencies));
    std::vector<double> cos_amp(static_cast<std::size_t>(options.frequencies));
    for (int m = 1; m <= options.frequencies; ++m) {
      sin_amp[static_cast<std::size_t>(m - 1)] = options.amplitude / m * unit(rng);
      cos_amp[static_cast<std::size_t>(m - 1)] = options.amplitude / m * unit(rng);
    }
    for (Eigen::Index q = 0; q < grid.size(); ++q) {
      const double t = grid[q];
      double v = a + b * t / horizon;
      for (int m = 1; m <= options.frequencies; ++m) {
        v += sin_amp[static_cast<std::size_t>(m - 1)] * std::sin(w * m * t) +
             cos_amp[static_cast<std::size_t>(m - 1)] * std::cos(w * m * t);
      }
      values(i, q) = v;
    }
  }
  return FunctionalSample(grid, std::move(values), CurveRole::kCovariate);
}

FunctionalSample gen_response(const FunctionalSample& x, const Scenario& scenario, double sigma,
                              std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidConfig("noise level must be nonnegative");
  scenario.validate();
  constexpr int kPanels = 2000;
  auto rng = make_rng(seed, kNoiseStream);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto& grid = x.grid;
  Eigen::MatrixXd values(x.num_curves(), grid.size());
  for (int i = 0; i < x.num_curves(); ++i) {
    const Eigen::VectorXd curve = x.values.row(i).transpose();
    for (Eigen::Index q = 0; q < grid.size(); ++q) {
      const double t = grid[q];
      double integral = 0.0;
      if (t > 0.0) {
        const double h = t / kPanels;
        for (int p = 0; p <= kPanels; ++p) {
          const double s = std::min(p * h, t);
          const double weight = (p == 0 || p == kPanels) ? 1.0 : (p % 2 ? 4.0 : 2.0);
          integral += weight * lerp_curve(grid, curve, s) * true_beta(scenario, s, t);
        }
        integral *= h / 3.0;
      }
      values(i, q) = integral;
    }
  }
  if (sigma > 0.0) {
    // Noise is drawn after the integrals so its stream is independent of the curves.
    for (int i = 0; i < values.rows(); ++i) {
      for (Eigen::Index q = 0; q < values.cols(); ++q) values(i, q) += sigma * noise(rng);
    }
  }
  return FunctionalSample(grid, std::move(values), CurveRole::kResponse);
}

double rise(const CoefficientSurface& beta_hat, const Scenario& scenario, int points) {
  if (points < 2) throw InvalidConfig("RISE lattice needs at least 2 points per axis");
  const double horizon = beta_hat.mesh().horizon();
  double sum = 0.0;
  long count = 0;
  for (int a = 0; a < points; ++a) {
    for (int c = 0; c < points; ++c) {
      const double s = horizon * a / (points - 1);
      const double t = horizon * c / (points - 1);
      if (s > t) continue;
      const double diff = beta_hat(s, t) - true_beta(scenario, s, t);
      sum += diff * diff;
      ++count;
    }
  }
  return std::sqrt(sum / static_cast<double>(count));
}

MetricsReport evaluate(const std::vector<ReplicationRecord>& records, double delta_true) {
  if (records.size() < 2) throw InvalidConfig("metrics need at least two replications");
  const double n = static_cast<double>(records.size());
  MetricsReport rep;
  rep.delta_true = delta_true;
  rep.replications = records;
  double mean_delta = 0.0, mean_rise = 0.0, mse = 0.0;
  for (const auto& r : records) {
    mean_delta += r.delta_hat / n;
    mean_rise += r.rise / n;
    mse += (r.delta_hat - delta_true) * (r.delta_hat - delta_true) / n;
  }
  double var_delta = 0.0, var_rise = 0.0;
  for (const auto& r : records) {
    var_delta += (r.delta_hat - mean_delta) * (r.delta_hat - mean_delta);
    var_rise += (r.rise - mean_rise) * (r.rise - mean_rise);
  }
  rep.rmse_delta = std::sqrt(mse);
  rep.bias_delta = mean_delta - delta_true;
  rep.pct_bias_delta = 100.0 * rep.bias_delta / delta_true;
  rep.sd_delta = std::sqrt(var_delta / (n - 1.0));
  rep.rise_mean = mean_rise;
  rep.rise_sd = std::sqrt(var_rise / (n - 1.0));
  return rep;
}

MetricsReport evaluate(const std::vector<FitResult>& fits, const Scenario& scenario, int points) {
  std::vector<ReplicationRecord> records;
  records.reserve(fits.size());
  for (const auto& fit : fits) records.push_back({fit.lag.delta, rise(fit.beta_hat, scenario, points)});
  return evaluate(records, scenario.delta);
}

Eigen::VectorXd uniform_grid(int points, double horizon) {
  if (points < 2) throw InvalidConfig("grid needs at least two points");
  Eigen::VectorXd grid(points);
  for (int q = 0; q < points; ++q) grid[q] = horizon * q / (points - 1);
  grid[points - 1] = horizon;
  return grid;
}

SimulatedData simulate(const Scenario& scenario, const SimulationSetup& setup, std::uint64_t seed,
                       std::uint64_t replication) {
  const Eigen::VectorXd grid = uniform_grid(setup.grid_points, scenario.horizon);
  // Distinct per-replication seeds: mix the replication index into the seed.
  const std::uint64_t rep_seed = seed * 0x9E3779B97F4A7C15ULL + replication + 1;
  FunctionalSample x = gen_covariates(setup.subjects, grid, setup.covariates, rep_seed);
  FunctionalSample y = gen_response(x, scenario, setup.sigma, rep_seed);
  return {std::move(x), std::move(y)};
}

}  // namespace histfun
