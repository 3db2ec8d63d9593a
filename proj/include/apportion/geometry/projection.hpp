#pragma once

#include <algorithm>
#include <limits>

#include "apportion/types.hpp"

namespace apportion::geometry {

struct ProjectionBasis {
  Vector mean_offset;  // column means of the first J-1 coordinates
  Matrix basis;        // (J-1)×rank, orthonormal columns
  Index rank = 0;
};

struct Projection {
  ProjectionBasis basis;
  PointCloud points;        // n×rank intrinsic coordinates
  Vector singular_values;   // all singular values of the centered cloud
};

/// Maps simplex-valued rows into the affine span of the cloud.
///
/// Drops the last coordinate (it is determined by the others on the simplex),
/// centers the remaining J-1 columns and keeps the leading right singular
/// vectors. The numerical rank counts singular values above
/// n * machine_eps * sigma_1 and is then capped by `rank_cap`.
inline Projection intrinsic_projection(const PointCloud& ystar, Index rank_cap) {
  const Index n = ystar.rows();
  const Index J = ystar.cols();
  require(n >= 2, "intrinsic_projection: need at least two points");
  require(J >= 2, "intrinsic_projection: need at least two coordinates");
  require(rank_cap >= 1, "intrinsic_projection: rank_cap must be positive");
  require(all_finite(ystar), "intrinsic_projection: non-finite coordinate");
  for (Index i = 0; i < n; ++i) {
    if (std::abs(ystar.row(i).sum() - 1.0) > 1e-8)
      throw Error(ErrorCode::InvalidArgument,
                  "intrinsic_projection: row " + std::to_string(i) + " does not sum to 1");
  }

  Projection out;
  const Matrix red = ystar.leftCols(J - 1);
  out.basis.mean_offset = red.colwise().mean().transpose();
  const Matrix centered = red.rowwise() - out.basis.mean_offset.transpose();

  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  out.singular_values = svd.singularValues();
  const double eps = std::numeric_limits<double>::epsilon();
  const double sigma1 = out.singular_values.size() ? out.singular_values(0) : 0.0;
  if (!(sigma1 > double(n) * eps))
    throw Error(ErrorCode::DegenerateCloud, "intrinsic_projection: all points coincide");

  const double cutoff = double(n) * eps * sigma1;
  Index numeric_rank = 0;
  for (Index i = 0; i < out.singular_values.size(); ++i)
    if (out.singular_values(i) > cutoff) ++numeric_rank;

  out.basis.rank = std::min(rank_cap, numeric_rank);
  out.basis.basis = svd.matrixV().leftCols(out.basis.rank);
  out.points = centered * out.basis.basis;
  return out;
}

/// Coordinates of arbitrary simplex rows in an existing basis.
inline PointCloud project_onto(const ProjectionBasis& basis, const PointCloud& ystar) {
  const Matrix red = ystar.leftCols(ystar.cols() - 1);
  return (red.rowwise() - basis.mean_offset.transpose()) * basis.basis;
}

}  // namespace apportion::geometry
