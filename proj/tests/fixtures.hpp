// Worked M = 3 example: nested groups (1-based node labels) and the three
// 6 x 10 difference matrices.
#pragma once

#include <vector>

#include <Eigen/Dense>

namespace fixture {

inline const std::vector<std::vector<int>> kGroupsM3 = {
    {7, 4, 8, 2, 5, 9, 1, 3, 6, 10},
    {7, 4, 8, 2, 5, 9},
    {7, 4, 8},
    {7},
};

inline Eigen::MatrixXd from_rows(const std::vector<std::vector<double>>& rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

inline Eigen::MatrixXd dh_m3() {
  return from_rows({{0, -1, 1, 0, 0, 0, 0, 0, 0, 0},
                    {0, 0, 0, -1, 1, 0, 0, 0, 0, 0},
                    {0, 0, 0, 0, -1, 1, 0, 0, 0, 0},
                    {0, 0, 0, 0, 0, 0, -1, 1, 0, 0},
                    {0, 0, 0, 0, 0, 0, 0, -1, 1, 0},
                    {0, 0, 0, 0, 0, 0, 0, 0, -1, 1}});
}

inline Eigen::MatrixXd dv_m3() {
  return from_rows({{-1, 1, 0, 0, 0, 0, 0, 0, 0, 0},
                    {0, -1, 0, 1, 0, 0, 0, 0, 0, 0},
                    {0, 0, -1, 0, 1, 0, 0, 0, 0, 0},
                    {0, 0, 0, -1, 0, 0, 1, 0, 0, 0},
                    {0, 0, 0, 0, -1, 0, 0, 1, 0, 0},
                    {0, 0, 0, 0, 0, -1, 0, 0, 1, 0}});
}

inline Eigen::MatrixXd dp_m3() {
  return from_rows({{-1, 0, 1, 0, 0, 0, 0, 0, 0, 0},
                    {0, -1, 0, 0, 1, 0, 0, 0, 0, 0},
                    {0, 0, -1, 0, 0, 1, 0, 0, 0, 0},
                    {0, 0, 0, -1, 0, 0, 0, 1, 0, 0},
                    {0, 0, 0, 0, -1, 0, 0, 0, 1, 0},
                    {0, 0, 0, 0, 0, -1, 0, 0, 0, 1}});
}

}  // namespace fixture
