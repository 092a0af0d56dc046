#include "histfun/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "histfun/error.hpp"

namespace histfun {

namespace {

constexpr double kDomainTolerance = 1e-10;

}  // namespace

TriangularMesh::TriangularMesh(int subdivisions, double horizon)
    : subdivisions_(subdivisions), horizon_(horizon) {
  if (subdivisions < 1) {
    throw InvalidConfig("mesh subdivisions must be >= 1, got " + std::to_string(subdivisions));
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw InvalidConfig("mesh horizon must be a positive finite number");
  }
  const int m = subdivisions;
  const double h = step();
  nodes_.reserve(static_cast<std::size_t>((m + 1) * (m + 2) / 2));
  for (int j = 0; j <= m; ++j) {
    for (int i = 0; i <= j; ++i) {
      // Exact endpoints avoid round-off at s = t = T.
      const double s = (i == m) ? horizon : i * h;
      const double t = (j == m) ? horizon : j * h;
      nodes_.push_back({s, t});
      lattice_.push_back({i, j});
    }
  }
  triangles_.reserve(static_cast<std::size_t>(m) * m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < j; ++i) {
      triangles_.push_back({node_index(i, j), node_index(i + 1, j + 1), node_index(i, j + 1)});
      triangles_.push_back({node_index(i, j), node_index(i + 1, j), node_index(i + 1, j + 1)});
    }
    triangles_.push_back({node_index(j, j), node_index(j + 1, j + 1), node_index(j, j + 1)});
  }
}

Point TriangularMesh::node(std::size_t k) const {
  if (k >= nodes_.size()) {
    throw std::out_of_range("node index " + std::to_string(k) + " out of range [0, " +
                            std::to_string(nodes_.size()) + ")");
  }
  return nodes_[k];
}

std::array<int, 2> TriangularMesh::lattice(std::size_t k) const {
  if (k >= lattice_.size()) {
    throw std::out_of_range("node index " + std::to_string(k) + " out of range");
  }
  return lattice_[k];
}

std::size_t TriangularMesh::node_index(int i, int j) const {
  if (j < 0 || j > subdivisions_ || i < 0 || i > j) {
    throw std::out_of_range("lattice position outside the domain");
  }
  return static_cast<std::size_t>(j) * (j + 1) / 2 + static_cast<std::size_t>(i);
}

bool TriangularMesh::contains(double s, double t) const noexcept {
  const double tol = kDomainTolerance * horizon_;
  return std::isfinite(s) && std::isfinite(t) && s >= -tol && t <= horizon_ + tol && s <= t + tol;
}

TriangularMesh::Location TriangularMesh::locate(double s, double t) const {
  if (!contains(s, t)) {
    throw DomainError("point (" + std::to_string(s) + ", " + std::to_string(t) +
                      ") lies outside the domain 0 <= s <= t <= " + std::to_string(horizon_));
  }
  const int m = subdivisions_;
  t = std::clamp(t, 0.0, horizon_);
  s = std::clamp(s, 0.0, t);
  const double u = s * m / horizon_;
  const double v = t * m / horizon_;
  // ceil - 1 sends points on a cell boundary to the lower/left cell, which
  // holds the lower-indexed triangle.
  const int j = std::clamp(static_cast<int>(std::ceil(v)) - 1, 0, m - 1);
  const int i = std::clamp(static_cast<int>(std::ceil(u)) - 1, 0, j);
  const double lu = std::clamp(u - i, 0.0, 1.0);
  const double lv = std::clamp(v - j, 0.0, 1.0);
  const std::size_t row = static_cast<std::size_t>(j) * j;

  Location loc;
  if (i == j || lv >= lu) {
    // vertices (i,j), (i+1,j+1), (i,j+1)
    loc.triangle = row + 2 * static_cast<std::size_t>(i);
    loc.weights = {1.0 - lv, lu, std::max(lv - lu, 0.0)};
  } else {
    // vertices (i,j), (i+1,j), (i+1,j+1)
    loc.triangle = row + 2 * static_cast<std::size_t>(i) + 1;
    loc.weights = {1.0 - lu, lu - lv, lv};
  }
  return loc;
}

std::array<double, 3> TriangularMesh::barycentric(std::size_t tri, double s, double t) const {
  const Triangle& v = triangles_.at(tri);
  const Point& a = nodes_[v[0]];
  const Point& b = nodes_[v[1]];
  const Point& c = nodes_[v[2]];
  const double det = (b.s - a.s) * (c.t - a.t) - (c.s - a.s) * (b.t - a.t);
  const double wb = ((s - a.s) * (c.t - a.t) - (c.s - a.s) * (t - a.t)) / det;
  const double wc = ((b.s - a.s) * (t - a.t) - (s - a.s) * (b.t - a.t)) / det;
  return {1.0 - wb - wc, wb, wc};
}

double TriangularMesh::eval_basis(std::size_t k, double s, double t) const {
  if (k >= nodes_.size()) {
    throw std::out_of_range("basis index " + std::to_string(k) + " out of range");
  }
  const Location loc = locate(s, t);
  const Triangle& tri = triangles_[loc.triangle];
  for (int a = 0; a < 3; ++a) {
    if (tri[a] == k) return loc.weights[a];
  }
  return 0.0;
}

TriangularMesh build_mesh(int subdivisions, double horizon) {
  return TriangularMesh(subdivisions, horizon);
}

Point node_coordinates(const TriangularMesh& mesh, std::size_t k) { return mesh.node(k); }

double eval_basis(const TriangularMesh& mesh, std::size_t k, double s, double t) {
  return mesh.eval_basis(k, s, t);
}

CoefficientSurface::CoefficientSurface(TriangularMesh mesh, Eigen::VectorXd coefficients)
    : mesh_(std::move(mesh)), coefficients_(std::move(coefficients)) {
  if (static_cast<std::size_t>(coefficients_.size()) != mesh_.num_nodes()) {
    throw InvalidConfig("coefficient vector has length " + std::to_string(coefficients_.size()) +
                        " but the mesh has " + std::to_string(mesh_.num_nodes()) + " nodes");
  }
}

double CoefficientSurface::operator()(double s, double t) const {
  const auto loc = mesh_.locate(s, t);
  const Triangle& tri = mesh_.triangles()[loc.triangle];
  return loc.weights[0] * coefficients_[tri[0]] + loc.weights[1] * coefficients_[tri[1]] +
         loc.weights[2] * coefficients_[tri[2]];
}

double eval_surface(const CoefficientSurface& surface, double s, double t) { return surface(s, t); }

}  // namespace histfun
