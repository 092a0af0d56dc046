#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace histfun {

struct Point {
  double s = 0.0;
  double t = 0.0;
};

using Triangle = std::array<std::size_t, 3>;

/// Uniform P1 triangulation of the domain {0 <= s <= t <= T}.
///
/// Each axis is cut into M intervals of width T/M and each lattice square is
/// split by the diagonal parallel to t = s, giving M^2 congruent triangles and
/// (M+1)(M+2)/2 nodes. Nodes are numbered from the bottom row (t = 0) upwards
/// and left to right inside a row, so lattice node (i, j) with s = i*step,
/// t = j*step and i <= j has index j(j+1)/2 + i. Indices are zero based.
///
/// Triangles are numbered row by row in the same fashion; within a row the
/// square left of the diagonal contributes its upper-left triangle first.
/// Vertices are stored counterclockwise.
class TriangularMesh {
 public:
  TriangularMesh(int subdivisions, double horizon);

  int subdivisions() const noexcept { return subdivisions_; }
  double horizon() const noexcept { return horizon_; }
  double step() const noexcept { return horizon_ / subdivisions_; }
  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_triangles() const noexcept { return triangles_.size(); }

  const std::vector<Point>& nodes() const noexcept { return nodes_; }
  const std::vector<Triangle>& triangles() const noexcept { return triangles_; }

  /// Throws std::out_of_range for k >= num_nodes().
  Point node(std::size_t k) const;

  /// Lattice position (i, j) of node k: s = i*step, t = j*step.
  std::array<int, 2> lattice(std::size_t k) const;
  std::size_t node_index(int i, int j) const;

  /// Membership test with the 1e-10*T boundary tolerance.
  bool contains(double s, double t) const noexcept;

  struct Location {
    std::size_t triangle = 0;
    std::array<double, 3> weights{};  // hat-function values at the vertices
  };

  /// Containing triangle and barycentric weights. Points on shared edges go
  /// to the lowest-indexed adjacent triangle. Throws DomainError outside the
  /// domain.
  Location locate(double s, double t) const;

  /// Barycentric coordinates of (s, t) relative to triangle `tri`. Affine in
  /// (s, t) and defined everywhere, including outside the triangle.
  std::array<double, 3> barycentric(std::size_t tri, double s, double t) const;

  double eval_basis(std::size_t k, double s, double t) const;

 private:
  int subdivisions_;
  double horizon_;
  std::vector<Point> nodes_;
  std::vector<std::array<int, 2>> lattice_;
  std::vector<Triangle> triangles_;
};

TriangularMesh build_mesh(int subdivisions, double horizon);
Point node_coordinates(const TriangularMesh& mesh, std::size_t k);
double eval_basis(const TriangularMesh& mesh, std::size_t k, double s, double t);

/// beta(s, t) = sum_k b_k phi_k(s, t) over a mesh.
class CoefficientSurface {
 public:
  CoefficientSurface(TriangularMesh mesh, Eigen::VectorXd coefficients);

  const TriangularMesh& mesh() const noexcept { return mesh_; }
  const Eigen::VectorXd& coefficients() const noexcept { return coefficients_; }

  double operator()(double s, double t) const;

 private:
  TriangularMesh mesh_;
  Eigen::VectorXd coefficients_;
};

double eval_surface(const CoefficientSurface& surface, double s, double t);

}  // namespace histfun
