#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>

#include "apportion/geometry/quickhull.hpp"
#include "apportion/types.hpp"

namespace apportion::geometry {

inline constexpr Index kHullDimMax = 8;

namespace detail {

inline IndexList hull_1d(const PointCloud& z) {
  Index lo = 0, hi = 0;
  for (Index i = 1; i < z.rows(); ++i) {
    if (z(i, 0) < z(lo, 0)) lo = i;
    if (z(i, 0) > z(hi, 0)) hi = i;
  }
  if (z(lo, 0) == z(hi, 0))
    throw Error(ErrorCode::DegenerateCloud, "hull_vertices: all points coincide");
  return lo < hi ? IndexList{lo, hi} : IndexList{hi, lo};
}

// Andrew's monotone chain. Points on hull edges are not vertices; among exact
// duplicates the smallest index represents the group.
inline IndexList hull_2d(const PointCloud& z) {
  IndexList order(z.rows());
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (z(a, 0) != z(b, 0)) return z(a, 0) < z(b, 0);
    if (z(a, 1) != z(b, 1)) return z(a, 1) < z(b, 1);
    return a < b;
  });
  IndexList pts;
  for (Index i : order)
    if (pts.empty() || z(pts.back(), 0) != z(i, 0) || z(pts.back(), 1) != z(i, 1))
      pts.push_back(i);
  if (pts.size() < 3)
    throw Error(ErrorCode::DegenerateCloud, "hull_vertices: fewer than three distinct points");

  auto cross = [&](Index o, Index a, Index b) {
    return (z(a, 0) - z(o, 0)) * (z(b, 1) - z(o, 1)) - (z(a, 1) - z(o, 1)) * (z(b, 0) - z(o, 0));
  };
  IndexList chain(2 * pts.size());
  size_t k = 0;
  for (Index p : pts) {
    while (k >= 2 && cross(chain[k - 2], chain[k - 1], p) <= 0) --k;
    chain[k++] = p;
  }
  for (size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    const Index p = pts[i];
    while (k >= t && cross(chain[k - 2], chain[k - 1], p) <= 0) --k;
    chain[k++] = p;
  }
  chain.resize(k - 1);
  if (chain.size() < 3)
    throw Error(ErrorCode::DegenerateCloud, "hull_vertices: points are collinear");
  std::sort(chain.begin(), chain.end());
  return chain;
}

// Deterministic relative perturbation in [-rel, rel] * scale.
inline PointCloud jitter(const PointCloud& z, double rel) {
  const double scale = std::max(z.cwiseAbs().maxCoeff(), 1e-300);
  PointCloud out = z;
  std::uint64_t state = 0x9E3779B97F4A7C15ULL;
  for (Index i = 0; i < z.rows(); ++i)
    for (Index j = 0; j < z.cols(); ++j) {
      state += 0x9E3779B97F4A7C15ULL;
      std::uint64_t x = state;
      x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
      x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
      x ^= x >> 31;
      const double u = double(x >> 11) * 0x1.0p-53 * 2.0 - 1.0;
      out(i, j) += rel * scale * u;
    }
  return out;
}

}  // namespace detail

/// Indices (ascending) of the extreme points of conv{z_1..z_n}.
///
/// Throws DegenerateCloud when the points do not span all z.cols() dimensions
/// and HullDimensionExceeded when z.cols() > hull_dim_max.
inline IndexList hull_vertices(const PointCloud& z, Warnings* warnings = nullptr,
                               Index hull_dim_max = kHullDimMax) {
  const Index d = z.cols();
  require(d >= 1, "hull_vertices: dimension must be positive");
  require(all_finite(z), "hull_vertices: non-finite coordinate");
  if (d > hull_dim_max || d > detail::QuickHull::kMaxDim)
    throw Error(ErrorCode::HullDimensionExceeded,
                "hull_vertices: dimension " + std::to_string(d) + " exceeds " +
                    std::to_string(hull_dim_max));
  if (z.rows() < d + 1)
    throw Error(ErrorCode::DegenerateCloud, "hull_vertices: fewer points than dimension + 1");
  if (d == 1) return detail::hull_1d(z);
  if (d == 2) return detail::hull_2d(z);

  try {
    return detail::QuickHull(z).vertices();
  } catch (const detail::FacetDegeneracy&) {
  }
  if (warnings)
    warnings->push_back({WarningCode::JitterFallback,
                         "hull_vertices: degenerate facet, retried on perturbed coordinates"});
  try {
    return detail::QuickHull(detail::jitter(z, 1e-12)).vertices();
  } catch (const detail::FacetDegeneracy&) {
    throw Error(ErrorCode::DegenerateCloud, "hull_vertices: facet construction failed after perturbation");
  }
}

}  // namespace apportion::geometry
