#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "apportion/types.hpp"

namespace apportion::geometry {

inline constexpr double kExhaustiveBudget = 2e6;
inline constexpr double kSwapGain = 1e-12;

/// K distinct row indices into a candidate set plus the log (K-1)-volume of
/// the simplex they span (-inf when degenerate).
struct VertexSubset {
  IndexList indices;
  double log_volume = -std::numeric_limits<double>::infinity();
};

namespace detail {

// log vol_{K-1} from the Gram determinant of edge vectors v_k - v_0, with
// the rows of `points` selected by idx[0..K).
inline double log_volume_rows(const PointCloud& points, const Index* idx, Index K) {
  const Index m = K - 1;
  const Index dim = points.cols();
  // K is small (sources); a fixed upper bound keeps this allocation-free.
  constexpr Index kMax = 32;
  std::array<double, kMax * kMax> gram{};
  auto g = [&](Index a, Index b) -> double& { return gram[size_t(a * kMax + b)]; };
  for (Index a = 0; a < m; ++a) {
    for (Index b = a; b < m; ++b) {
      double s = 0.0;
      for (Index j = 0; j < dim; ++j)
        s += (points(idx[a + 1], j) - points(idx[0], j)) * (points(idx[b + 1], j) - points(idx[0], j));
      g(a, b) = s;
      g(b, a) = s;
    }
  }
  // Gaussian elimination with partial pivoting; the Gram matrix is PSD so the
  // determinant is the product of the pivots.
  double log_det = 0.0;
  double det_sign = 1.0;
  for (Index c = 0; c < m; ++c) {
    Index piv = c;
    for (Index r = c + 1; r < m; ++r)
      if (std::abs(g(r, c)) > std::abs(g(piv, c))) piv = r;
    if (g(piv, c) == 0.0) return -std::numeric_limits<double>::infinity();
    if (piv != c) {
      for (Index q = 0; q < m; ++q) std::swap(g(c, q), g(piv, q));
      det_sign = -det_sign;
    }
    const double p = g(c, c);
    if (p < 0) det_sign = -det_sign;
    log_det += std::log(std::abs(p));
    for (Index r = c + 1; r < m; ++r) {
      const double f = g(r, c) / p;
      if (f == 0.0) continue;
      for (Index q = c; q < m; ++q) g(r, q) -= f * g(c, q);
    }
  }
  if (det_sign < 0 || log_det <= std::log(1e-300)) return -std::numeric_limits<double>::infinity();
  return 0.5 * log_det - std::lgamma(double(K));
}

inline void check_subset_args(const PointCloud& candidates, Index K) {
  require(K >= 2, "max-volume search: K must be at least 2");
  require(K <= 32, "max-volume search: K must not exceed 32");
  require(candidates.rows() >= K, "max-volume search: fewer candidates than K");
  require(all_finite(candidates), "max-volume search: non-finite coordinate");
}

}  // namespace detail

/// log of the (K-1)-dimensional volume of the simplex whose vertices are the
/// rows of `vertices` (K rows, r_B >= K-1 columns).
inline double simplex_log_volume(const PointCloud& vertices) {
  const Index K = vertices.rows();
  require(K >= 2, "simplex_log_volume: need at least two vertices");
  require(K <= 32, "simplex_log_volume: at most 32 vertices");
  require(vertices.cols() >= K - 1, "simplex_log_volume: ambient dimension below K-1");
  IndexList idx(K);
  std::iota(idx.begin(), idx.end(), Index{0});
  return detail::log_volume_rows(vertices, idx.data(), K);
}

/// Global maximum-volume K-subset by enumeration in lexicographic order; the
/// first maximizer found is the lexicographically smallest tuple.
inline VertexSubset max_volume_exhaustive(const PointCloud& candidates, Index K,
                                          double budget = kExhaustiveBudget) {
  detail::check_subset_args(candidates, K);
  const Index m = candidates.rows();
  if (binomial(m, K) > budget)
    throw Error(ErrorCode::BudgetExceeded,
                "max_volume_exhaustive: C(" + std::to_string(m) + "," + std::to_string(K) +
                    ") subsets exceed the budget");

  IndexList combo(K);
  std::iota(combo.begin(), combo.end(), Index{0});
  VertexSubset best;
  best.indices = combo;
  bool found = false;
  while (true) {
    const double v = detail::log_volume_rows(candidates, combo.data(), K);
    if (v > best.log_volume) {
      best.log_volume = v;
      best.indices = combo;
      found = true;
    }
    Index i = K - 1;
    while (i >= 0 && combo[i] == m - K + i) --i;
    if (i < 0) break;
    ++combo[i];
    for (Index j = i + 1; j < K; ++j) combo[j] = combo[j - 1] + 1;
  }
  if (!found)
    throw Error(ErrorCode::AllDegenerate, "max_volume_exhaustive: every subset is degenerate");
  return best;
}

/// Automatic Target Generation Process on homogeneous coordinates (z, 1):
/// the point of largest norm first, then repeatedly the point with the largest
/// residual after projection onto the span of the points already picked.
inline IndexList atgp(const PointCloud& candidates, Index K) {
  const Index m = candidates.rows();
  const Index dim = candidates.cols() + 1;
  Matrix x(m, dim);
  x.leftCols(dim - 1) = candidates;
  x.col(dim - 1).setOnes();

  IndexList picked;
  std::vector<char> used(m, 0);
  Matrix residual = x;
  for (Index t = 0; t < K; ++t) {
    Index best = -1;
    double best_norm = -1.0;
    for (Index i = 0; i < m; ++i) {
      if (used[i]) continue;
      const double nr = residual.row(i).squaredNorm();
      if (nr > best_norm) {
        best_norm = nr;
        best = i;
      }
    }
    picked.push_back(best);
    used[best] = 1;
    if (best_norm <= 0) continue;
    // Deflate every residual along the new direction (Gram-Schmidt).
    const Vector u = residual.row(best).transpose() / std::sqrt(best_norm);
    residual -= (residual * u) * u.transpose();
  }
  return picked;
}

/// N-FINDR style local search: ATGP start, then sweeps over vertex positions
/// taking the best single replacement when it raises the log-volume by more
/// than 1e-12. Stops after a sweep without swaps or after `max_sweeps`.
inline VertexSubset max_volume_greedy(const PointCloud& candidates, Index K, Index max_sweeps = 100) {
  detail::check_subset_args(candidates, K);
  const Index m = candidates.rows();

  IndexList current = atgp(candidates, K);
  std::vector<char> in_set(m, 0);
  for (Index i : current) in_set[i] = 1;
  double current_v = detail::log_volume_rows(candidates, current.data(), K);

  IndexList trial = current;
  for (Index sweep = 0; sweep < max_sweeps; ++sweep) {
    bool swapped = false;
    for (Index pos = 0; pos < K; ++pos) {
      Index best_i = -1;
      double best_v = current_v;
      trial = current;
      for (Index i = 0; i < m; ++i) {
        if (in_set[i]) continue;
        trial[pos] = i;
        const double v = detail::log_volume_rows(candidates, trial.data(), K);
        if (v > best_v) {
          best_v = v;
          best_i = i;
        }
      }
      if (best_i >= 0 && best_v > current_v + kSwapGain) {
        in_set[current[pos]] = 0;
        in_set[best_i] = 1;
        current[pos] = best_i;
        current_v = best_v;
        swapped = true;
      }
    }
    if (!swapped) break;
  }

  std::sort(current.begin(), current.end());
  VertexSubset out{current, detail::log_volume_rows(candidates, current.data(), K)};
  if (!std::isfinite(out.log_volume))
    throw Error(ErrorCode::AllDegenerate, "max_volume_greedy: no affinely independent K-subset found");
  return out;
}

}  // namespace apportion::geometry
