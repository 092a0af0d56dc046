#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "histfun/mesh.hpp"

namespace histfun {

/// Nested node groups A_1 > A_2 > ... > A_{M+1}.
///
/// A_j holds the nodes on or above the line t = s + (j-1)*step, i.e. the nodes
/// inside the triangle with vertices (0,T), (0,(j-1)*step), ((M+1-j)*step, T).
/// Group members are listed by decreasing t - s, then by node index, which is
/// the order used in the M = 3 worked example. Groups are stored zero based
/// (groups[0] is A_1); node indices are zero based.
struct NestedGroups {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::array<Point, 3>> regions;  // D_j; D_{M+1} repeats the apex
  std::vector<int> membership;                // l(k): number of groups holding node k

  int num_groups() const noexcept { return static_cast<int>(groups.size()); }
  int num_nodes() const noexcept { return static_cast<int>(membership.size()); }
};

NestedGroups build_groups(const TriangularMesh& mesh);

/// First-order differences between lattice neighbours. Each row has a -1 on
/// the lower-indexed node and +1 on the other; rows follow the node order of
/// their lower-indexed endpoint.
struct DifferenceMatrices {
  Eigen::MatrixXd horizontal;  // (s,t) -> (s+h, t)
  Eigen::MatrixXd vertical;    // (s,t) -> (s, t+h)
  Eigen::MatrixXd diagonal;    // (s,t) -> (s+h, t+h)
};

DifferenceMatrices build_difference_matrices(const TriangularMesh& mesh);

struct SmoothnessWeights {
  double horizontal = 0.0;
  double vertical = 0.0;
  double diagonal = 0.0;

  static SmoothnessWeights tied(double omega) { return {omega, omega, omega}; }
  bool operator==(const SmoothnessWeights&) const = default;
};

/// R = w_H D_H'D_H + w_V D_V'D_V + w_P D_P'D_P. Negative weights are rejected.
Eigen::MatrixXd assemble_R(const DifferenceMatrices& d, const SmoothnessWeights& omega);

struct SmoothnessPenalty {
  DifferenceMatrices differences;
  SmoothnessWeights omega;
  Eigen::MatrixXd R;
};

SmoothnessPenalty make_smoothness_penalty(const TriangularMesh& mesh, const SmoothnessWeights& omega);

/// R restricted to the nodes flagged in `keep`, built only from difference
/// rows whose two endpoints are both kept. Returns a |keep| x |keep| matrix in
/// the order of the kept indices.
Eigen::MatrixXd restricted_R(const SmoothnessPenalty& penalty, const std::vector<bool>& keep);

struct GroupWeights {
  Eigen::VectorXd c;
  double gamma = 0.5;
};

/// c_j = |A_j|^(1-gamma), or the adaptive |A_j|^(1-gamma) / ||b0_{A_j}||_2^gamma
/// when an initial estimate is given.
GroupWeights compute_weights(const NestedGroups& groups, double gamma,
                             const std::optional<Eigen::VectorXd>& b0 = std::nullopt);

struct PenaltySystem {
  NestedGroups groups;
  SmoothnessPenalty smoothness;
  GroupWeights weights;
};

}  // namespace histfun
