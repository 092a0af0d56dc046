#include "histfun/design.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "histfun/error.hpp"

namespace histfun {

FunctionalSample::FunctionalSample(Eigen::VectorXd grid_, Eigen::MatrixXd values_, CurveRole role_)
    : grid(std::move(grid_)), values(std::move(values_)), role(role_) {
  if (grid.size() < 2) throw DataError("a sample grid needs at least two time points");
  if (grid[0] != 0.0) throw DataError("sample grid must start at t = 0");
  for (Eigen::Index q = 1; q < grid.size(); ++q) {
    if (!(grid[q] > grid[q - 1])) throw DataError("sample grid must be strictly ascending");
  }
  if (values.rows() < 1) throw DataError("a sample needs at least one curve");
  if (values.cols() != grid.size()) {
    throw DataError("curve length " + std::to_string(values.cols()) + " does not match grid length " +
                    std::to_string(grid.size()));
  }
  if (!values.allFinite()) throw DataError("sample contains missing or non-finite values");
}

CenteredData center(const FunctionalSample& sample) {
  if (sample.num_curves() < 2) {
    throw DataError("centering needs at least two curves, got " + std::to_string(sample.num_curves()));
  }
  Eigen::VectorXd mean = sample.values.colwise().mean().transpose();
  Eigen::MatrixXd centered = sample.values.rowwise() - mean.transpose();
  return {FunctionalSample(sample.grid, std::move(centered), sample.role), std::move(mean)};
}

double interpolate(const Eigen::VectorXd& grid, const Eigen::Ref<const Eigen::VectorXd>& values,
                   double t) {
  const Eigen::Index n = grid.size();
  if (t <= grid[0]) return values[0];
  if (t >= grid[n - 1]) return values[n - 1];
  const double* begin = grid.data();
  const Eigen::Index hi = std::upper_bound(begin, begin + n, t) - begin;
  const Eigen::Index lo = hi - 1;
  const double w = (t - grid[lo]) / (grid[hi] - grid[lo]);
  return (1.0 - w) * values[lo] + w * values[hi];
}

namespace {

/// One piece of the integration line: [a, b] inside a single triangle.
struct Segment {
  double a, b, mid;
  Triangle vertices;
  std::array<double, 3> wa, wm, wb;
};

std::vector<Segment> integration_segments(const TriangularMesh& mesh, const Eigen::VectorXd& grid,
                                          double t) {
  std::vector<double> cuts{0.0, t};
  const double h = mesh.step();
  for (Eigen::Index q = 0; q < grid.size() && grid[q] < t; ++q) cuts.push_back(grid[q]);
  for (int i = 1; i <= mesh.subdivisions() && i * h < t; ++i) {
    cuts.push_back(i * h);         // vertical edges s = i*h
    cuts.push_back(t - i * h);     // diagonal edges t - s = i*h
  }
  std::sort(cuts.begin(), cuts.end());
  const double merge = 1e-13 * mesh.horizon();
  std::vector<Segment> segments;
  double prev = cuts.front();
  for (std::size_t c = 1; c < cuts.size(); ++c) {
    const double next = std::min(cuts[c], t);
    if (next - prev <= merge) continue;
    const double mid = 0.5 * (prev + next);
    const auto loc = mesh.locate(mid, t);
    segments.push_back({prev, next, mid, mesh.triangles()[loc.triangle],
                        mesh.barycentric(loc.triangle, prev, t), loc.weights,
                        mesh.barycentric(loc.triangle, next, t)});
    prev = next;
  }
  return segments;
}

void accumulate_psi(const std::vector<Segment>& segments, const Eigen::VectorXd& grid,
                    const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out) {
  for (const Segment& seg : segments) {
    const double xa = interpolate(grid, x, seg.a);
    const double xm = interpolate(grid, x, seg.mid);
    const double xb = interpolate(grid, x, seg.b);
    const double scale = (seg.b - seg.a) / 6.0;
    for (int v = 0; v < 3; ++v) {
      out[seg.vertices[v]] += scale * (xa * seg.wa[v] + 4.0 * xm * seg.wm[v] + xb * seg.wb[v]);
    }
  }
}

void check_time(const TriangularMesh& mesh, double t) {
  const double tol = 1e-10 * mesh.horizon();
  if (!(t >= -tol && t <= mesh.horizon() + tol)) {
    throw DomainError("evaluation time " + std::to_string(t) + " outside [0, " +
                      std::to_string(mesh.horizon()) + "]");
  }
}

void check_grid_matches_mesh(const TriangularMesh& mesh, const Eigen::VectorXd& grid) {
  if (std::abs(grid[grid.size() - 1] - mesh.horizon()) > 1e-10 * mesh.horizon()) {
    throw DataError("sample horizon " + std::to_string(grid[grid.size() - 1]) +
                    " does not match mesh horizon " + std::to_string(mesh.horizon()));
  }
}

}  // namespace

Eigen::VectorXd compute_psi(const TriangularMesh& mesh, const Eigen::VectorXd& grid,
                            const Eigen::Ref<const Eigen::VectorXd>& x_values, double t_eval) {
  check_time(mesh, t_eval);
  if (x_values.size() != grid.size()) throw DataError("curve and grid lengths differ");
  const double t = std::clamp(t_eval, 0.0, mesh.horizon());
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
  if (t <= 0.0) return psi;
  accumulate_psi(integration_segments(mesh, grid, t), grid, x_values, psi);
  return psi;
}

Eigen::MatrixXd design_matrix(const TriangularMesh& mesh, const FunctionalSample& x,
                              const Eigen::VectorXd& eval_times) {
  check_grid_matches_mesh(mesh, x.grid);
  const Eigen::Index n_times = eval_times.size();
  const auto k = static_cast<Eigen::Index>(mesh.num_nodes());
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(x.num_curves() * n_times, k);
  Eigen::VectorXd row(k);
  for (Eigen::Index q = 0; q < n_times; ++q) {
    check_time(mesh, eval_times[q]);
    const double t = std::clamp(eval_times[q], 0.0, mesh.horizon());
    if (t <= 0.0) continue;
    const auto segments = integration_segments(mesh, x.grid, t);
    for (int i = 0; i < x.num_curves(); ++i) {
      row.setZero();
      accumulate_psi(segments, x.grid, x.values.row(i).transpose(), row);
      psi.row(i * n_times + q) = row.transpose();
    }
  }
  return psi;
}

DesignSystem assemble(const CenteredData& x, const CenteredData& y, const TriangularMesh& mesh,
                      std::optional<Eigen::VectorXd> eval_times) {
  const auto& xs = x.centered;
  const auto& ys = y.centered;
  if (xs.grid.size() != ys.grid.size() || !xs.grid.isApprox(ys.grid, 1e-12)) {
    throw DataError("covariate and response samples are on different grids");
  }
  if (xs.num_curves() != ys.num_curves()) {
    throw DataError("covariate and response samples have different curve counts");
  }
  Eigen::VectorXd times = eval_times.value_or(ys.grid);
  if (times.size() == 0) throw DataError("no evaluation times given");

  DesignSystem out{design_matrix(mesh, xs, times), Eigen::VectorXd(xs.num_curves() * times.size()),
                   mesh, times, xs.num_curves()};
  for (int i = 0; i < ys.num_curves(); ++i) {
    for (Eigen::Index q = 0; q < times.size(); ++q) {
      out.y[i * times.size() + q] = interpolate(ys.grid, ys.values.row(i).transpose(), times[q]);
    }
  }
  return out;
}

}  // namespace histfun
