#pragma once

#include <algorithm>
#include <vector>

#include "apportion/types.hpp"

namespace apportion::geometry {

struct HullProjection {
  Vector point;      // nearest point of the convex hull
  double distance = 0.0;
};

/// Euclidean projection of `y` onto conv{rows of points} with Wolfe's
/// minimum-norm-point algorithm applied to the shifted set {p_i - y}.
inline HullProjection nearest_point_in_hull(const PointCloud& points, const Vector& y,
                                            Index max_iterations = 1000) {
  const Index m = points.rows();
  const Index d = points.cols();
  require(m >= 1, "nearest_point_in_hull: empty point set");
  require(y.size() == d, "nearest_point_in_hull: dimension mismatch");

  const Matrix p = points.rowwise() - y.transpose();
  double scale = 0.0;
  for (Index i = 0; i < m; ++i) scale = std::max(scale, p.row(i).squaredNorm());
  const double tol = 1e-12 * std::max(scale, 1e-300);

  Index start = 0;
  for (Index i = 1; i < m; ++i)
    if (p.row(i).squaredNorm() < p.row(start).squaredNorm()) start = i;
  std::vector<Index> corral{start};
  std::vector<double> lambda{1.0};
  Vector x = p.row(start).transpose();

  for (Index iter = 0; iter < max_iterations; ++iter) {
    const Vector dots = p * x;
    Index j;
    const double min_dot = dots.minCoeff(&j);
    if (x.squaredNorm() - min_dot <= tol) break;
    if (std::find(corral.begin(), corral.end(), j) != corral.end()) break;
    corral.push_back(j);
    lambda.push_back(0.0);

    while (true) {
      // Affine minimizer of the corral: min |sum a_s p_s|^2 with sum a_s = 1.
      const Index c = Index(corral.size());
      Matrix sys = Matrix::Zero(c + 1, c + 1);
      Vector rhs = Vector::Zero(c + 1);
      for (Index a = 0; a < c; ++a) {
        for (Index b = 0; b < c; ++b) sys(a, b) = p.row(corral[a]).dot(p.row(corral[b]));
        sys(a, c) = 1.0;
        sys(c, a) = 1.0;
      }
      rhs(c) = 1.0;
      const Vector sol = sys.completeOrthogonalDecomposition().solve(rhs);
      const Vector alpha = sol.head(c);

      if ((alpha.array() > 1e-14).all()) {
        for (Index a = 0; a < c; ++a) lambda[a] = alpha(a);
        break;
      }
      double theta = 1.0;
      for (Index a = 0; a < c; ++a)
        if (alpha(a) <= 1e-14 && lambda[a] - alpha(a) > 0)
          theta = std::min(theta, lambda[a] / (lambda[a] - alpha(a)));
      for (Index a = 0; a < c; ++a) lambda[a] = theta * alpha(a) + (1.0 - theta) * lambda[a];
      std::vector<Index> keep_idx;
      std::vector<double> keep_lambda;
      for (Index a = 0; a < c; ++a)
        if (lambda[a] > 1e-14) {
          keep_idx.push_back(corral[a]);
          keep_lambda.push_back(lambda[a]);
        }
      if (keep_idx.empty()) {
        keep_idx.push_back(corral.back());
        keep_lambda.push_back(1.0);
      }
      double total = 0.0;
      for (double l : keep_lambda) total += l;
      for (double& l : keep_lambda) l /= total;
      corral = std::move(keep_idx);
      lambda = std::move(keep_lambda);
    }
    x.setZero();
    for (size_t a = 0; a < corral.size(); ++a) x += lambda[a] * p.row(corral[a]).transpose();
  }

  HullProjection out;
  out.point = x + y;
  out.distance = x.norm();
  return out;
}

}  // namespace apportion::geometry
