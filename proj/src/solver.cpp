#include "histfun/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "histfun/error.hpp"

namespace histfun {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double soft_threshold(double z, double threshold) {
  if (z > threshold) return z - threshold;
  if (z < -threshold) return z + threshold;
  return 0.0;
}

double l1_norm(const Eigen::VectorXd& b, const std::vector<std::size_t>& group) {
  double sum = 0.0;
  for (std::size_t k : group) sum += std::abs(b[static_cast<Eigen::Index>(k)]);
  return sum;
}

int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

void BridgeConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidConfig("gamma must lie in (0, 1)");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidConfig("lambda must be >= 0");
  if (max_outer_iters < 1 || lasso_max_iters < 1) throw InvalidConfig("iteration caps must be >= 1");
  if (!(outer_tol > 0.0) || !(lasso_tol > 0.0)) throw InvalidConfig("tolerances must be positive");
}

double tau_from_lambda(double lambda, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidConfig("gamma must lie in (0, 1)");
  if (!(lambda >= 0.0)) throw InvalidConfig("lambda must be >= 0");
  if (gamma == 0.5) return 0.25 * lambda * lambda;
  return std::pow(lambda * std::pow(gamma, gamma) * std::pow(1.0 - gamma, 1.0 - gamma),
                  1.0 / (1.0 - gamma));
}

Eigen::VectorXd update_theta(const Eigen::VectorXd& b, const NestedGroups& groups,
                             const GroupWeights& weights, double tau) {
  if (!(tau > 0.0)) throw InvalidConfig("tau must be positive for the theta update");
  const double gamma = weights.gamma;
  const double factor = std::pow((1.0 - gamma) / (tau * gamma), gamma);
  Eigen::VectorXd theta(groups.num_groups());
  for (int j = 0; j < groups.num_groups(); ++j) {
    const double norm = l1_norm(b, groups.groups[static_cast<std::size_t>(j)]);
    theta[j] = norm > 0.0 ? weights.c[j] * factor * std::pow(norm, gamma) : 0.0;
  }
  return theta;
}

Eigen::VectorXd update_g(const Eigen::VectorXd& theta, const GroupWeights& weights,
                         const NestedGroups& groups) {
  const double gamma = weights.gamma;
  // Cumulative load: node k collects groups 1..l(k).
  Eigen::VectorXd per_group(groups.num_groups());
  for (int j = 0; j < groups.num_groups(); ++j) {
    per_group[j] = theta[j] > 0.0
                       ? std::pow(theta[j], 1.0 - 1.0 / gamma) * std::pow(weights.c[j], 1.0 / gamma)
                       : kInf;
  }
  Eigen::VectorXd cumulative(groups.num_groups());
  double running = 0.0;
  for (int j = 0; j < groups.num_groups(); ++j) {
    running += per_group[j];
    cumulative[j] = running;
  }
  Eigen::VectorXd g(groups.num_nodes());
  for (int k = 0; k < groups.num_nodes(); ++k) {
    g[k] = cumulative[groups.membership[static_cast<std::size_t>(k)] - 1];
  }
  return g;
}

GramSystem make_gram(const Eigen::MatrixXd& xtx, const Eigen::VectorXd& xty, double yty,
                     const Eigen::MatrixXd& R, int num_subjects) {
  if (num_subjects < 1) throw InvalidConfig("number of subjects must be positive");
  GramSystem gram{xtx, xty, yty, R, xtx + static_cast<double>(num_subjects) * R, num_subjects};
  return gram;
}

GramSystem make_gram(const DesignSystem& design, const Eigen::MatrixXd& R) {
  Eigen::MatrixXd xtx = design.psi.transpose() * design.psi;
  Eigen::VectorXd xty = design.psi.transpose() * design.y;
  return make_gram(xtx, xty, design.y.squaredNorm(), R, design.num_subjects);
}

double residual_sum_of_squares(const GramSystem& gram, const Eigen::VectorXd& b) {
  const double rss = gram.yty - 2.0 * b.dot(gram.xty) + b.dot(gram.xtx * b);
  return std::max(rss, 0.0);
}

Eigen::VectorXd lasso_kkt_residuals(const GramSystem& gram, const Eigen::VectorXd& g,
                                    const Eigen::VectorXd& b) {
  const double n = gram.num_subjects;
  const Eigen::VectorXd grad = 2.0 * (gram.hessian * b - gram.xty);  // original-scale gradient
  Eigen::VectorXd res = Eigen::VectorXd::Zero(b.size());
  for (Eigen::Index k = 0; k < b.size(); ++k) {
    if (!std::isfinite(g[k])) {
      res[k] = b[k] == 0.0 ? 0.0 : kInf;
      continue;
    }
    const double w = n * g[k];
    // rescaled gradient: d/db*_k = G_kk * grad_k = grad_k / w
    const double gs = w > 0.0 ? grad[k] / w : (grad[k] == 0.0 ? 0.0 : kInf);
    res[k] = b[k] != 0.0 ? std::abs(gs + sign(b[k])) : std::max(0.0, std::abs(gs) - 1.0);
  }
  return res;
}

namespace {

/// Round-off floor for the rescaled KKT residual of coordinate k: the
/// gradient cannot be resolved better than a few ulps of its summands.
Eigen::VectorXd kkt_floor(const GramSystem& gram, const Eigen::VectorXd& g, const Eigen::VectorXd& b) {
  const double eps = std::numeric_limits<double>::epsilon();
  const double n = gram.num_subjects;
  Eigen::VectorXd out(b.size());
  const Eigen::VectorXd mag = gram.hessian.cwiseAbs() * b.cwiseAbs();
  for (Eigen::Index k = 0; k < b.size(); ++k) {
    const double w = std::isfinite(g[k]) ? n * g[k] : kInf;
    const double scale = 2.0 * 64.0 * eps * (std::abs(gram.xty[k]) + mag[k]);
    out[k] = (w > 0.0 && std::isfinite(w)) ? scale / w : 0.0;
  }
  return out;
}

struct KktCheck {
  bool converged;
  double worst;
};

KktCheck check_kkt(const GramSystem& gram, const Eigen::VectorXd& g, const Eigen::VectorXd& b, double tol) {
  const Eigen::VectorXd res = lasso_kkt_residuals(gram, g, b);
  const Eigen::VectorXd floor = kkt_floor(gram, g, b);
  bool ok = true;
  for (Eigen::Index k = 0; k < b.size(); ++k) {
    if (res[k] > std::max(tol, floor[k])) ok = false;
  }
  return {ok, res.size() ? res.maxCoeff() : 0.0};
}

/// Exact minimizer on the current active set with the current signs. Returns
/// false when the candidate flips a sign or violates an inactive KKT bound.
bool polish(const GramSystem& gram, const Eigen::VectorXd& w, const std::vector<Eigen::Index>& free_set,
            Eigen::VectorXd& b, double tol) {
  std::vector<Eigen::Index> active;
  for (Eigen::Index k : free_set) {
    if (b[k] != 0.0) active.push_back(k);
  }
  Eigen::VectorXd candidate = Eigen::VectorXd::Zero(b.size());
  if (!active.empty()) {
    const auto na = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd h(na, na);
    Eigen::VectorXd rhs(na);
    for (Eigen::Index a = 0; a < na; ++a) {
      rhs[a] = gram.xty[active[a]] - 0.5 * w[active[a]] * sign(b[active[a]]);
      for (Eigen::Index c = 0; c < na; ++c) h(a, c) = gram.hessian(active[a], active[c]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
    const Eigen::VectorXd sol = ldlt.solve(rhs);
    if (!sol.allFinite()) return false;
    for (Eigen::Index a = 0; a < na; ++a) {
      if (sign(sol[a]) != sign(b[active[a]])) return false;
      candidate[active[a]] = sol[a];
    }
  }
  const Eigen::VectorXd grad = gram.xty - gram.hessian * candidate;
  for (Eigen::Index k : free_set) {
    if (candidate[k] == 0.0 && std::abs(grad[k]) > 0.5 * w[k] * (1.0 + tol)) return false;
  }
  b = candidate;
  return true;
}

}  // namespace

LassoResult solve_lasso(const GramSystem& gram, const Eigen::VectorXd& g, const LassoOptions& options,
                        const Eigen::VectorXd& warm_start) {
  const Eigen::Index k_count = gram.xty.size();
  if (g.size() != k_count || warm_start.size() != k_count) {
    throw InvalidConfig("LASSO inputs have inconsistent dimensions");
  }
  const double n = gram.num_subjects;
  Eigen::VectorXd w(k_count);
  std::vector<Eigen::Index> free_set;
  Eigen::VectorXd b = warm_start;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    w[k] = std::isfinite(g[k]) ? n * g[k] : kInf;
    if (std::isfinite(w[k]) && gram.hessian(k, k) > 0.0) {
      free_set.push_back(k);
    } else {
      b[k] = 0.0;
    }
  }
  LassoResult out;
  if (free_set.empty()) {
    out.b = Eigen::VectorXd::Zero(k_count);
    return out;
  }

  Eigen::VectorXd grad = gram.xty - gram.hessian * b;  // c - H b
  auto sweep = [&](const std::vector<Eigen::Index>& coords) {
    double max_change = 0.0;
    for (Eigen::Index k : coords) {
      const double hkk = gram.hessian(k, k);
      const double old = b[k];
      const double updated = soft_threshold(grad[k] + hkk * old, 0.5 * w[k]) / hkk;
      if (updated != old) {
        const double delta = updated - old;
        grad.noalias() -= gram.hessian.col(k) * delta;
        b[k] = updated;
        max_change = std::max(max_change, std::abs(delta) * std::sqrt(hkk));
      }
    }
    return max_change;
  };

  std::vector<Eigen::Index> previous_active;
  for (int it = 1; it <= options.max_iters; ++it) {
    sweep(free_set);
    out.sweeps = it;
    // Refresh to avoid drift in the running gradient.
    grad = gram.xty - gram.hessian * b;

    std::vector<Eigen::Index> active;
    for (Eigen::Index k : free_set) {
      if (b[k] != 0.0) active.push_back(k);
    }
    // Inner passes over the active set only.
    for (int inner = 0; inner < 50 && !active.empty(); ++inner) {
      const double change = sweep(active);
      if (change <= 1e-3 * options.tol) break;
    }
    grad = gram.xty - gram.hessian * b;

    const KktCheck kkt = check_kkt(gram, g, b, options.tol);
    if (kkt.converged) {
      out.b = b;
      out.kkt_residual = kkt.worst;
      return out;
    }
    if (active == previous_active) {
      Eigen::VectorXd trial = b;
      if (polish(gram, w, free_set, trial, options.tol)) {
        const KktCheck polished = check_kkt(gram, g, trial, options.tol);
        if (polished.converged) {
          out.b = trial;
          out.kkt_residual = polished.worst;
          return out;
        }
      }
    }
    previous_active = std::move(active);
  }
  const KktCheck kkt = check_kkt(gram, g, b, options.tol);
  throw ConvergenceError("coordinate descent did not reach the KKT tolerance after " +
                             std::to_string(options.max_iters) + " sweeps (residual " +
                             std::to_string(kkt.worst) + ")",
                         kkt.worst);
}

LassoResult solve_lasso(const GramSystem& gram, const Eigen::VectorXd& g, const LassoOptions& options) {
  return solve_lasso(gram, g, options, Eigen::VectorXd::Zero(gram.xty.size()));
}

RescaledLasso build_rescaled_lasso(const DesignSystem& design, const SmoothnessPenalty& smoothness,
                                   const Eigen::VectorXd& g) {
  const double n = design.num_subjects;
  const auto& d = smoothness.differences;
  const auto& om = smoothness.omega;
  const Eigen::Index rows = design.psi.rows() + d.horizontal.rows() + d.vertical.rows() + d.diagonal.rows();
  const Eigen::Index k = design.psi.cols();
  Eigen::MatrixXd stacked(rows, k);
  stacked << design.psi, std::sqrt(om.horizontal * n) * d.horizontal, std::sqrt(om.vertical * n) * d.vertical,
      std::sqrt(om.diagonal * n) * d.diagonal;
  Eigen::VectorXd scale(k);
  for (Eigen::Index c = 0; c < k; ++c) scale[c] = std::isfinite(g[c]) ? 1.0 / (n * g[c]) : 0.0;
  RescaledLasso out;
  out.design = stacked * scale.asDiagonal();
  out.response = Eigen::VectorXd::Zero(rows);
  out.response.head(design.y.size()) = design.y;
  out.scale = std::move(scale);
  return out;
}

double bridge_objective(const GramSystem& gram, const PenaltySystem& penalties, double lambda,
                        const Eigen::VectorXd& b) {
  const auto& groups = penalties.groups;
  const auto& weights = penalties.weights;
  double bridge = 0.0;
  for (int j = 0; j < groups.num_groups(); ++j) {
    bridge += weights.c[j] * std::pow(l1_norm(b, groups.groups[static_cast<std::size_t>(j)]), weights.gamma);
  }
  return residual_sum_of_squares(gram, b) / gram.num_subjects + lambda * bridge + b.dot(gram.R * b);
}

double reformulated_objective(const GramSystem& gram, const PenaltySystem& penalties, double tau,
                              const Eigen::VectorXd& b, const Eigen::VectorXd& theta) {
  const auto& groups = penalties.groups;
  const auto& weights = penalties.weights;
  const double gamma = weights.gamma;
  double linear = 0.0;
  for (int j = 0; j < groups.num_groups(); ++j) {
    const double norm = l1_norm(b, groups.groups[static_cast<std::size_t>(j)]);
    if (theta[j] > 0.0) {
      linear += std::pow(theta[j], 1.0 - 1.0 / gamma) * std::pow(weights.c[j], 1.0 / gamma) * norm;
    } else if (norm > 0.0) {
      return kInf;
    }
  }
  return residual_sum_of_squares(gram, b) / gram.num_subjects + linear + tau * theta.sum() +
         b.dot(gram.R * b);
}

int dead_groups(const NestedGroups& groups, const Eigen::VectorXd& b) {
  int dead = 0;
  for (const auto& group : groups.groups) {
    if (l1_norm(b, group) == 0.0) ++dead;
  }
  return dead;
}

BridgeState fit_group_bridge(const GramSystem& gram, const PenaltySystem& penalties,
                             const BridgeConfig& config, const Eigen::VectorXd& b0) {
  config.validate();
  if (!(config.lambda > 0.0)) {
    throw InvalidConfig("the group bridge fit needs lambda > 0; lambda = 0 is the smooth-only refit");
  }
  if (b0.size() != gram.xty.size()) throw InvalidConfig("initial estimate has the wrong length");
  const double tau = tau_from_lambda(config.lambda, config.gamma);
  const auto& groups = penalties.groups;
  const LassoOptions lasso{config.lasso_max_iters, config.lasso_tol};

  BridgeState state;
  state.b = b0;
  state.objective_trace.push_back(bridge_objective(gram, penalties, config.lambda, state.b));
  bool converged = false;
  for (int s = 1; s <= config.max_outer_iters; ++s) {
    const Eigen::VectorXd theta = update_theta(state.b, groups, penalties.weights, tau);
    const Eigen::VectorXd g = update_g(theta, penalties.weights, groups);
    const LassoResult step = solve_lasso(gram, g, lasso, state.b);
    const double change = (step.b - state.b).norm() / (1.0 + state.b.norm());
    state.b = step.b;
    state.iterations = s;
    const double objective = bridge_objective(gram, penalties, config.lambda, state.b);
    state.objective_trace.push_back(objective);
    state.log.push_back({s, objective, change, static_cast<int>((state.b.array() != 0.0).count()),
                         dead_groups(groups, state.b), step.sweeps});
    if (change < config.outer_tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ConvergenceError("group bridge iterations did not converge within " +
                               std::to_string(config.max_outer_iters) + " outer iterations",
                           state.log.empty() ? 0.0 : state.log.back().change, state.objective_trace);
  }
  state.theta = update_theta(state.b, groups, penalties.weights, tau);
  state.g = update_g(state.theta, penalties.weights, groups);
  return state;
}

BridgeState fit_group_bridge(const DesignSystem& design, const PenaltySystem& penalties,
                             const BridgeConfig& config, const Eigen::VectorXd& b0) {
  return fit_group_bridge(make_gram(design, penalties.smoothness.R), penalties, config, b0);
}

}  // namespace histfun
