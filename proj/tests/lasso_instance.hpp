// Random small LASSO instances expressed both as Gram statistics (library
// input) and as the explicit rescaled problem (oracle input).
#pragma once

#include <random>

#include <Eigen/Dense>

#include "histfun/solver.hpp"

struct LassoInstance {
  histfun::GramSystem gram;
  Eigen::VectorXd g;
  Eigen::MatrixXd a;  // [Psi; sqrt(N) L] G
  Eigen::VectorXd y;  // [y; 0]
  Eigen::VectorXd scale;  // diagonal of G
};

inline LassoInstance random_lasso(std::mt19937_64& rng, int p = 5, int rows = 12, int n = 4) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.02, 0.3);
  Eigen::MatrixXd psi(rows, p), l(3, p);
  Eigen::VectorXd y(rows), g(p);
  for (auto& v : psi.reshaped()) v = z(rng);
  for (auto& v : l.reshaped()) v = 0.3 * z(rng);
  for (auto& v : y) v = 2.0 * z(rng);
  for (auto& v : g) v = u(rng);
  LassoInstance inst;
  inst.g = g;
  inst.gram = histfun::make_gram(psi.transpose() * psi, psi.transpose() * y, y.squaredNorm(), l.transpose() * l, n);
  inst.scale = (1.0 / (n * g.array())).matrix();
  Eigen::MatrixXd stacked(rows + 3, p);
  stacked << psi, std::sqrt(static_cast<double>(n)) * l;
  inst.a = stacked * inst.scale.asDiagonal();
  inst.y = Eigen::VectorXd::Zero(rows + 3);
  inst.y.head(rows) = y;
  return inst;
}
