#include "histfun/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "histfun/error.hpp"
#include "histfun/parallel.hpp"
#include "histfun/tuning.hpp"

namespace histfun {

PreparedData prepare(const FunctionalSample& x, const FunctionalSample& y, const TriangularMesh& mesh) {
  CenteredData xc = center(x);
  CenteredData yc = center(y);
  DesignSystem design = assemble(xc, yc, mesh);
  Eigen::MatrixXd xtx = design.psi.transpose() * design.psi;
  return {x, y, std::move(xc), std::move(yc), std::move(design), std::move(xtx), build_groups(mesh),
          build_difference_matrices(mesh)};
}

PreparedData with_response(const PreparedData& base, const Eigen::MatrixXd& y_values) {
  PreparedData out = base;
  out.y = FunctionalSample(base.y.grid, y_values, CurveRole::kResponse);
  out.y_centered = center(out.y);
  const auto& times = out.design.eval_times;
  const auto& yc = out.y_centered.centered;
  for (int i = 0; i < yc.num_curves(); ++i) {
    for (Eigen::Index q = 0; q < times.size(); ++q) {
      out.design.y[i * times.size() + q] = interpolate(yc.grid, yc.values.row(i).transpose(), times[q]);
    }
  }
  return out;
}

Eigen::VectorXd ols_initial(const Eigen::MatrixXd& xtx, const Eigen::VectorXd& xty, const Eigen::MatrixXd& R,
                            std::optional<double> ridge) {
  const Eigen::Index k = xtx.rows();
  const double r = ridge.value_or(1e-8 * xtx.trace() / static_cast<double>(k));
  if (!(r >= 0.0)) throw InvalidConfig("ridge must be nonnegative");
  Eigen::MatrixXd system = xtx + r * (R + Eigen::MatrixXd::Identity(k, k));
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("initial least-squares system is singular; increase the ridge or reduce M");
  }
  Eigen::VectorXd b = llt.solve(xty);
  if (!b.allFinite()) {
    throw NumericalError("initial least-squares solve produced non-finite values; increase the ridge or reduce M");
  }
  return b;
}

Eigen::VectorXd ols_initial(const DesignSystem& design, const Eigen::MatrixXd& R, std::optional<double> ridge) {
  return ols_initial(design.psi.transpose() * design.psi, design.psi.transpose() * design.y, R, ridge);
}

LagEstimate extract_delta(const CoefficientSurface& surface, const NestedGroups& groups, double zero_tol,
                          LagConvention convention) {
  const auto& mesh = surface.mesh();
  const auto& b = surface.coefficients();
  const int m = mesh.subdivisions();
  for (int j = 1; j <= m; ++j) {
    bool zero = true;
    for (std::size_t k : groups.groups[static_cast<std::size_t>(j - 1)]) {
      if (std::abs(b[static_cast<Eigen::Index>(k)]) > zero_tol) {
        zero = false;
        break;
      }
    }
    if (zero) {
      const int units = convention == LagConvention::kGroupIndex ? j : j - 1;
      return {mesh.horizon() * units / m, j};
    }
  }
  return {mesh.horizon(), 0};
}

CoefficientSurface refit(const GramSystem& gram, const TriangularMesh& mesh, const PenaltySystem& penalties,
                         const LagEstimate& lag) {
  const auto k = static_cast<Eigen::Index>(mesh.num_nodes());
  std::vector<bool> keep(static_cast<std::size_t>(k), true);
  if (lag.group > 0) {
    for (std::size_t n : penalties.groups.groups[static_cast<std::size_t>(lag.group - 1)]) keep[n] = false;
  }
  std::vector<Eigen::Index> kept;
  for (Eigen::Index n = 0; n < k; ++n) {
    if (keep[static_cast<std::size_t>(n)]) kept.push_back(n);
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  if (kept.empty()) return CoefficientSurface(mesh, b);

  const auto ns = static_cast<Eigen::Index>(kept.size());
  const Eigen::MatrixXd rs = restricted_R(penalties.smoothness, keep);
  Eigen::MatrixXd system(ns, ns);
  Eigen::VectorXd rhs(ns);
  for (Eigen::Index a = 0; a < ns; ++a) {
    rhs[a] = gram.xty[kept[a]];
    for (Eigen::Index c = 0; c < ns; ++c) {
      system(a, c) = gram.xtx(kept[a], kept[c]) + gram.num_subjects * rs(a, c);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  Eigen::VectorXd sol;
  if (llt.info() == Eigen::Success) {
    sol = llt.solve(rhs);
  } else {
    const double ridge = 1e-10 * system.trace() / static_cast<double>(ns);
    Eigen::LLT<Eigen::MatrixXd> retry(system + ridge * Eigen::MatrixXd::Identity(ns, ns));
    if (retry.info() != Eigen::Success) {
      throw NumericalError("refit system is singular; increase the smoothness weights or reduce M");
    }
    sol = retry.solve(rhs);
  }
  for (Eigen::Index a = 0; a < ns; ++a) b[kept[a]] = sol[a];
  return CoefficientSurface(mesh, b);
}

CoefficientSurface refit(const DesignSystem& design, const PenaltySystem& penalties, const LagEstimate& lag) {
  return refit(make_gram(design, penalties.smoothness.R), design.mesh, penalties, lag);
}

Eigen::VectorXd recover_intercept(const Eigen::VectorXd& grid, const Eigen::VectorXd& x_mean,
                                  const Eigen::VectorXd& y_mean, const CoefficientSurface& beta_hat) {
  if (x_mean.size() != grid.size() || y_mean.size() != grid.size()) {
    throw DataError("mean curves do not match the grid");
  }
  const auto& b = beta_hat.coefficients();
  Eigen::VectorXd alpha(grid.size());
  for (Eigen::Index q = 0; q < grid.size(); ++q) {
    alpha[q] = y_mean[q] - compute_psi(beta_hat.mesh(), grid, x_mean, grid[q]).dot(b);
  }
  return alpha;
}

namespace {

struct BridgeOutcome {
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  std::vector<double> trace;
  std::vector<IterationRecord> log;
};

BridgeOutcome bridge_stage(const GramSystem& gram, const PenaltySystem& penalties_in,
                           const EstimatorOptions& options, const TriangularMesh& mesh) {
  PenaltySystem penalties = penalties_in;
  if (options.bridge.lambda == 0.0) {
    // No bridge penalty: the smooth-only solve over every node.
    return {refit(gram, mesh, penalties, LagEstimate{mesh.horizon(), 0}).coefficients(), penalties.weights.c, {}, {}};
  }
  const Eigen::VectorXd b0 = ols_initial(gram.xtx, gram.xty, gram.R, options.ridge);
  penalties.weights = compute_weights(penalties.groups, options.bridge.gamma,
                                      options.adaptive_weights ? std::optional<Eigen::VectorXd>(b0) : std::nullopt);
  BridgeState state = fit_group_bridge(gram, penalties, options.bridge, b0);
  return {std::move(state.b), penalties.weights.c, std::move(state.objective_trace), std::move(state.log)};
}

}  // namespace

FitResult fit_model(const PreparedData& data, const EstimatorOptions& options) {
  options.bridge.validate();
  const TriangularMesh& mesh = data.mesh();
  const int n = data.num_subjects();
  SmoothnessPenalty smoothness{data.differences, options.omega, assemble_R(data.differences, options.omega)};
  PenaltySystem penalties{data.groups, smoothness, compute_weights(data.groups, options.bridge.gamma)};
  const GramSystem gram = make_gram(data.xtx, data.design.psi.transpose() * data.design.y,
                                    data.design.y.squaredNorm(), smoothness.R, n);

  BridgeOutcome bridge = bridge_stage(gram, penalties, options, mesh);
  CoefficientSurface b_bridge(mesh, bridge.b);
  const double max_abs = bridge.b.size() ? bridge.b.cwiseAbs().maxCoeff() : 0.0;
  const LagEstimate lag = extract_delta(b_bridge, data.groups, options.zero_tol * max_abs, options.lag_convention);
  CoefficientSurface beta = refit(gram, mesh, penalties, lag);

  // df is the trace of the refit's hat matrix, so BIC scores the refit.
  const Eigen::VectorXd& b_hat = beta.coefficients();
  std::vector<bool> active(static_cast<std::size_t>(b_hat.size()));
  for (Eigen::Index k = 0; k < b_hat.size(); ++k) active[static_cast<std::size_t>(k)] = b_hat[k] != 0.0;
  const double df = effective_df(data.xtx, smoothness, active, n);
  const double rss = residual_sum_of_squares(gram, b_hat);

  const Eigen::Index q = data.design.rows_per_subject();
  Eigen::VectorXd fitted_stacked = data.design.psi * beta.coefficients();
  Eigen::MatrixXd fitted = Eigen::Map<const Eigen::MatrixXd>(fitted_stacked.data(), q, n).transpose();
  Eigen::MatrixXd observed = Eigen::Map<const Eigen::MatrixXd>(data.design.y.data(), q, n).transpose();

  Eigen::VectorXd alpha = recover_intercept(data.x.grid, data.x_centered.mean_curve, data.y_centered.mean_curve, beta);
  FitResult out{std::move(beta),
                std::move(b_bridge),
                lag,
                data.x.grid,
                std::move(alpha),
                options,
                std::move(bridge.c),
                std::move(bridge.trace),
                std::move(bridge.log),
                df,
                bic(rss, df, n),
                rss,
                data.design.eval_times,
                fitted,
                observed - fitted};
  return out;
}

FunctionalSample predict(const FitResult& fit, const FunctionalSample& x_new) {
  if (x_new.grid.size() != fit.grid.size() || !x_new.grid.isApprox(fit.grid, 1e-12)) {
    throw DataError("new covariate curves are not on the fit's grid");
  }
  const auto& mesh = fit.beta_hat.mesh();
  const Eigen::MatrixXd psi = design_matrix(mesh, x_new, fit.grid);
  const Eigen::VectorXd stacked = psi * fit.beta_hat.coefficients();
  const Eigen::Index q = fit.grid.size();
  Eigen::MatrixXd values = Eigen::Map<const Eigen::MatrixXd>(stacked.data(), q, x_new.num_curves()).transpose();
  values.rowwise() += fit.alpha_hat.transpose();
  return FunctionalSample(fit.grid, std::move(values), CurveRole::kResponse);
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw InvalidConfig("quantile of an empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap_delta_ci(const FitResult& fit, const PreparedData& data, int replications,
                                   double level, std::uint64_t seed, int threads) {
  if (replications < 2) throw InvalidConfig("bootstrap needs at least 2 replications");
  if (!(level > 0.0 && level < 1.0)) throw InvalidConfig("confidence level must lie in (0, 1)");
  if (fit.eval_times.size() != data.y.grid.size() || !fit.eval_times.isApprox(data.y.grid)) {
    throw InvalidConfig("bootstrap needs a fit evaluated on the response grid");
  }
  const int n = data.num_subjects();
  std::vector<double> deltas(static_cast<std::size_t>(replications), 0.0);
  std::vector<char> ok(static_cast<std::size_t>(replications), 0);

  parallel_for(static_cast<std::size_t>(replications), threads, [&](std::size_t r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<int> pick(0, n - 1);
    Eigen::MatrixXd y_star = fit.fitted;
    for (int i = 0; i < n; ++i) y_star.row(i) += fit.residuals.row(pick(rng));
    try {
      const PreparedData replicate = with_response(data, y_star);
      deltas[r] = fit_model(replicate, fit.options).lag.delta;
      ok[r] = 1;
    } catch (const Error&) {
      ok[r] = 0;
    }
  });

  BootstrapResult out;
  out.level = level;
  for (int r = 0; r < replications; ++r) {
    if (ok[static_cast<std::size_t>(r)]) {
      out.deltas.push_back(deltas[static_cast<std::size_t>(r)]);
    } else {
      out.failed.push_back(r);
    }
  }
  if (out.failed.size() * 10 > static_cast<std::size_t>(replications)) {
    throw NumericalError(std::to_string(out.failed.size()) + " of " + std::to_string(replications) +
                         " bootstrap replicates failed to converge");
  }
  std::vector<double> sorted = out.deltas;
  std::sort(sorted.begin(), sorted.end());
  const double alpha = 1.0 - level;
  out.lower = quantile_sorted(sorted, alpha / 2.0);
  out.upper = quantile_sorted(sorted, 1.0 - alpha / 2.0);
  return out;
}

}  // namespace histfun
