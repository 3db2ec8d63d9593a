#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "apportion/error.hpp"

namespace apportion {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// n×d matrix of point coordinates, one point per row.
using PointCloud = Matrix;

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorCode::InvalidArgument, what);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline double binomial(Index m, Index k) {
  if (k < 0 || k > m) return 0.0;
  k = std::min(k, m - k);
  double r = 1.0;
  for (Index i = 1; i <= k; ++i) r = r * double(m - k + i) / double(i);
  return std::round(r);
}

}  // namespace apportion
