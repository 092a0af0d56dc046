#include "histfun/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "histfun/error.hpp"
#include "histfun/parallel.hpp"

namespace histfun {

double effective_df(const Eigen::MatrixXd& xtx, const SmoothnessPenalty& smoothness,
                    const std::vector<bool>& active, int num_subjects) {
  if (active.size() != static_cast<std::size_t>(xtx.rows())) {
    throw InvalidConfig("active mask length does not match the design");
  }
  std::vector<Eigen::Index> idx;
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (active[k]) idx.push_back(static_cast<Eigen::Index>(k));
  }
  if (idx.empty()) return 0.0;
  const auto ns = static_cast<Eigen::Index>(idx.size());
  const Eigen::MatrixXd rs = restricted_R(smoothness, active);
  Eigen::MatrixXd gram(ns, ns);
  for (Eigen::Index a = 0; a < ns; ++a) {
    for (Eigen::Index c = 0; c < ns; ++c) gram(a, c) = xtx(idx[a], idx[c]);
  }
  const Eigen::MatrixXd inner = gram + static_cast<double>(num_subjects) * rs;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(inner);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
    throw NumericalError("degrees-of-freedom system is singular; use larger smoothness weights or a ridge");
  }
  return ldlt.solve(gram).trace();
}

double effective_df(const DesignSystem& design, const SmoothnessPenalty& smoothness,
                    const std::vector<bool>& active) {
  return effective_df(design.psi.transpose() * design.psi, smoothness, active, design.num_subjects);
}

double bic(double rss, double df, int num_subjects) {
  if (num_subjects < 1) throw InvalidConfig("BIC needs at least one subject");
  const double n = num_subjects;
  if (!(rss > 0.0)) {
    std::cerr << "histfun: warning: zero residual sum of squares, BIC set to its floor\n";
    return kBicFloor;
  }
  return n * std::log(rss / n) + std::log(n) * df;
}

double bic(const DesignSystem& design, const Eigen::VectorXd& b_hat, double df) {
  return bic((design.y - design.psi * b_hat).squaredNorm(), df, design.num_subjects);
}

std::vector<double> log_spaced(double lo, double hi, int count) {
  if (count < 1 || !(lo > 0.0) || !(hi >= lo)) throw InvalidConfig("invalid log-spaced grid");
  std::vector<double> out;
  if (count == 1) return {lo};
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i) out.push_back(std::pow(10.0, a + (b - a) * i / (count - 1)));
  return out;
}

TuningGrid TuningGrid::defaults() {
  TuningGrid grid;
  grid.lambdas = log_spaced(1e-4, 1e1, 8);
  for (double w : log_spaced(1e-6, 1e-1, 4)) grid.omegas.push_back(SmoothnessWeights::tied(w));
  return grid;
}

namespace {

/// Ordering of records: BIC ascending, then larger lambda first.
bool better(const TuningRecord& a, const TuningRecord& b) {
  if (a.ok != b.ok) return a.ok;
  if (a.bic != b.bic) return a.bic < b.bic;
  return a.lambda > b.lambda;
}

}  // namespace

TuningOutcome grid_search(const PreparedData& data, TuningGrid grid, const EstimatorOptions& base, int threads) {
  if (grid.lambdas.empty() || grid.omegas.empty()) throw InvalidConfig("tuning grid is empty");
  struct Candidate {
    double lambda;
    SmoothnessWeights omega;
  };
  std::vector<Candidate> candidates;
  for (const auto& omega : grid.omegas) {
    for (double lambda : grid.lambdas) candidates.push_back({lambda, omega});
  }
  std::vector<TuningRecord> records(candidates.size());
  std::vector<std::optional<FitResult>> fits(candidates.size());

  parallel_for(candidates.size(), threads, [&](std::size_t i) {
    EstimatorOptions options = base;
    options.bridge.lambda = candidates[i].lambda;
    options.omega = candidates[i].omega;
    TuningRecord& rec = records[i];
    rec.lambda = candidates[i].lambda;
    rec.omega = candidates[i].omega;
    try {
      FitResult fit = fit_model(data, options);
      rec.df = fit.df;
      rec.bic = fit.bic;
      rec.delta_hat = fit.lag.delta;
      rec.rss = fit.rss;
      rec.ok = true;
      fits[i] = std::move(fit);
    } catch (const Error& e) {
      rec.ok = false;
      rec.error = e.what();
    }
  });

  std::size_t best = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!records[i].ok) continue;
    if (best == candidates.size() || better(records[i], records[best])) best = i;
  }
  if (best == candidates.size()) {
    std::string message = "every tuning candidate failed";
    if (!records.empty()) message += "; first error: " + records.front().error;
    throw NumericalError(message);
  }
  TuningOutcome out{candidates[best].lambda, candidates[best].omega, std::move(*fits[best]), std::move(grid)};
  std::stable_sort(records.begin(), records.end(), better);
  out.grid.records = std::move(records);
  return out;
}

}  // namespace histfun
