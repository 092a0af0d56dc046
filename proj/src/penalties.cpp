#include "histfun/penalties.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "histfun/error.hpp"

namespace histfun {

NestedGroups build_groups(const TriangularMesh& mesh) {
  const int m = mesh.subdivisions();
  const double h = mesh.step();
  const double big_t = mesh.horizon();
  const std::size_t k = mesh.num_nodes();

  // Lattice lag j - i of each node is the exact integer version of (t-s)/h.
  std::vector<int> lag(k);
  for (std::size_t n = 0; n < k; ++n) {
    const auto ij = mesh.lattice(n);
    lag[n] = ij[1] - ij[0];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lag[a] > lag[b]; });

  NestedGroups out;
  out.membership.assign(k, 0);
  for (int j = 1; j <= m + 1; ++j) {
    std::vector<std::size_t> group;
    for (std::size_t n : order) {
      if (lag[n] >= j - 1) group.push_back(n);
    }
    for (std::size_t n : group) out.membership[n] = j;
    out.groups.push_back(std::move(group));
    if (j <= m) {
      out.regions.push_back({Point{0.0, big_t}, Point{0.0, (j - 1) * h}, Point{(m + 1 - j) * h, big_t}});
    } else {
      out.regions.push_back({Point{0.0, big_t}, Point{0.0, big_t}, Point{0.0, big_t}});
    }
  }
  return out;
}

DifferenceMatrices build_difference_matrices(const TriangularMesh& mesh) {
  const int m = mesh.subdivisions();
  const auto k = static_cast<Eigen::Index>(mesh.num_nodes());
  const Eigen::Index rows = static_cast<Eigen::Index>(m) * (m + 1) / 2;
  DifferenceMatrices d{Eigen::MatrixXd::Zero(rows, k), Eigen::MatrixXd::Zero(rows, k),
                       Eigen::MatrixXd::Zero(rows, k)};
  Eigen::Index rh = 0, rv = 0, rp = 0;
  for (int j = 0; j <= m; ++j) {
    for (int i = 0; i <= j; ++i) {
      const auto here = static_cast<Eigen::Index>(mesh.node_index(i, j));
      if (i + 1 <= j) {
        d.horizontal(rh, here) = -1.0;
        d.horizontal(rh++, static_cast<Eigen::Index>(mesh.node_index(i + 1, j))) = 1.0;
      }
      if (j + 1 <= m) {
        d.vertical(rv, here) = -1.0;
        d.vertical(rv++, static_cast<Eigen::Index>(mesh.node_index(i, j + 1))) = 1.0;
        d.diagonal(rp, here) = -1.0;
        d.diagonal(rp++, static_cast<Eigen::Index>(mesh.node_index(i + 1, j + 1))) = 1.0;
      }
    }
  }
  return d;
}

Eigen::MatrixXd assemble_R(const DifferenceMatrices& d, const SmoothnessWeights& omega) {
  if (omega.horizontal < 0.0 || omega.vertical < 0.0 || omega.diagonal < 0.0) {
    throw InvalidConfig("smoothness weights must be nonnegative");
  }
  return omega.horizontal * (d.horizontal.transpose() * d.horizontal) +
         omega.vertical * (d.vertical.transpose() * d.vertical) +
         omega.diagonal * (d.diagonal.transpose() * d.diagonal);
}

SmoothnessPenalty make_smoothness_penalty(const TriangularMesh& mesh, const SmoothnessWeights& omega) {
  DifferenceMatrices d = build_difference_matrices(mesh);
  Eigen::MatrixXd r = assemble_R(d, omega);
  return {std::move(d), omega, std::move(r)};
}

namespace {

Eigen::MatrixXd restrict_rows(const Eigen::MatrixXd& d, const std::vector<bool>& keep,
                              const std::vector<Eigen::Index>& kept) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < d.rows(); ++r) {
    bool ok = true;
    for (Eigen::Index c = 0; c < d.cols() && ok; ++c) {
      if (d(r, c) != 0.0 && !keep[static_cast<std::size_t>(c)]) ok = false;
    }
    if (ok) rows.push_back(r);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < kept.size(); ++b) {
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = d(rows[a], kept[b]);
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd restricted_R(const SmoothnessPenalty& penalty, const std::vector<bool>& keep) {
  const auto& d = penalty.differences;
  if (keep.size() != static_cast<std::size_t>(d.horizontal.cols())) {
    throw InvalidConfig("node mask length does not match the penalty");
  }
  std::vector<Eigen::Index> kept;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (keep[k]) kept.push_back(static_cast<Eigen::Index>(k));
  }
  DifferenceMatrices sub{restrict_rows(d.horizontal, keep, kept), restrict_rows(d.vertical, keep, kept),
                         restrict_rows(d.diagonal, keep, kept)};
  return assemble_R(sub, penalty.omega);
}

GroupWeights compute_weights(const NestedGroups& groups, double gamma,
                             const std::optional<Eigen::VectorXd>& b0) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidConfig("gamma must lie in (0, 1)");
  GroupWeights w{Eigen::VectorXd(groups.num_groups()), gamma};
  for (int j = 0; j < groups.num_groups(); ++j) {
    const auto& g = groups.groups[static_cast<std::size_t>(j)];
    double c = std::pow(static_cast<double>(g.size()), 1.0 - gamma);
    if (b0) {
      if (b0->size() != groups.num_nodes()) {
        throw InvalidConfig("initial estimate length does not match the node count");
      }
      double norm2 = 0.0;
      for (std::size_t k : g) norm2 += (*b0)[static_cast<Eigen::Index>(k)] * (*b0)[static_cast<Eigen::Index>(k)];
      if (!(norm2 > 0.0)) {
        throw NumericalError("initial estimate vanishes on group A_" + std::to_string(j + 1) +
                             "; adaptive weights are undefined, use simple weights instead");
      }
      c /= std::pow(std::sqrt(norm2), gamma);
    }
    w.c[j] = c;
  }
  return w;
}

}  // namespace histfun
