#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "apportion/types.hpp"

namespace apportion::geometry {

namespace detail {

/// Phase-I simplex for: does sum_i lambda_i a_i = 0, sum_i lambda_i = 1,
/// lambda >= 0 have a solution? Columns of `a` are the shifted points.
/// Returns the optimal sum of artificials (zero when feasible). The rows of
/// `a` must be linearly independent; dependent rows let tiny pivots through.
inline double phase_one_residual(const Matrix& a) {
  const Index d = a.rows();
  const Index m = a.cols();
  const Index rows = d + 1;
  const Index cols = m + rows;  // structural, then artificial
  // Tableau with the rhs in the last column and the objective in the last row.
  Matrix t = Matrix::Zero(rows + 1, cols + 1);
  t.topLeftCorner(d, m) = a;
  t.block(d, 0, 1, m).setOnes();
  t.block(0, m, rows, rows).setIdentity();
  t(d, cols) = 1.0;
  std::vector<Index> basis(static_cast<size_t>(rows));
  for (Index r = 0; r < rows; ++r) basis[size_t(r)] = m + r;
  // Reduced costs of minimising the artificial sum.
  for (Index c = 0; c <= cols; ++c) t(rows, c) = -t.col(c).head(rows).sum();
  for (Index r = 0; r < rows; ++r) t(rows, m + r) = 0.0;

  constexpr double eps = 1e-12;
  for (int iter = 0; iter < 50 * int(cols); ++iter) {
    // Bland's rule: lowest-index improving column, lowest basis index on ties.
    Index enter = -1;
    for (Index c = 0; c < cols; ++c)
      if (t(rows, c) < -eps) {
        enter = c;
        break;
      }
    if (enter < 0) break;
    Index leave = -1;
    double best = 0.0;
    for (Index r = 0; r < rows; ++r) {
      const double p = t(r, enter);
      if (p <= 1e-9) continue;
      const double ratio = t(r, cols) / p;
      if (leave < 0 || ratio < best - eps ||
          (ratio <= best + eps && basis[size_t(r)] < basis[size_t(leave)])) {
        leave = r;
        best = ratio;
      }
    }
    if (leave < 0) break;  // unbounded cannot happen in phase I
    t.row(leave) /= t(leave, enter);
    for (Index r = 0; r <= rows; ++r)
      if (r != leave && t(r, enter) != 0.0) t.row(r) -= t(r, enter) * t.row(leave);
    basis[size_t(leave)] = enter;
  }
  return -t(rows, cols);
}

}  // namespace detail

/// Indices (ascending) of the extreme points of the rows of `x`, in any
/// dimension. Each row is tested for membership in the hull of the others
/// with a small LP; of exactly repeated rows only the first can be extreme.
inline IndexList extreme_points_lp(const Matrix& x, double tol = 1e-9) {
  require(all_finite(x), "extreme_points_lp: non-finite coordinate");
  const Index n = x.rows();
  IndexList out;
  if (n == 0) return out;
  if (n == 1) return {0};

  // Coordinates within the affine hull, so the equality rows are independent.
  const Matrix centered = x.rowwise() - x.colwise().mean();
  Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  Index r = 0;
  while (r < sv.size() && sv(r) > 1e-12 * sv(0)) ++r;
  const Matrix z = centered * svd.matrixV().leftCols(r);
  const Index d = r;
  if (d == 0) return {0};

  for (Index p = 0; p < n; ++p) {
    std::vector<Index> others;
    others.reserve(size_t(n - 1));
    bool repeated_earlier = false;
    for (Index i = 0; i < n; ++i) {
      if (i == p) continue;
      if (x.row(i) == x.row(p)) {
        if (i < p) repeated_earlier = true;
        continue;
      }
      others.push_back(i);
    }
    if (repeated_earlier) continue;
    if (others.empty()) {
      out.push_back(p);
      continue;
    }
    Matrix a(d, Index(others.size()));
    for (size_t c = 0; c < others.size(); ++c) a.col(Index(c)) = (z.row(others[c]) - z.row(p)).transpose();
    const double scale = a.cwiseAbs().maxCoeff();
    if (scale > 0) a /= scale;
    if (detail::phase_one_residual(a) > tol) out.push_back(p);
  }
  return out;
}

}  // namespace apportion::geometry
