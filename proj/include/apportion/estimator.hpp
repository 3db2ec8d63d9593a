#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <boost/random/uniform_real_distribution.hpp>

#include "apportion/geometry.hpp"
#include "apportion/rng.hpp"
#include "apportion/types.hpp"

namespace apportion {

enum class SearchMode { Greedy, Exhaustive, Auto };
enum class MeanMethod { Proposition, AlgorithmS2 };
enum class ZeroRowPolicy { Drop, Error };

inline std::string to_string(SearchMode s) {
  switch (s) {
    case SearchMode::Greedy: return "greedy";
    case SearchMode::Exhaustive: return "exhaustive";
    case SearchMode::Auto: return "auto";
  }
  return "?";
}

inline std::string to_string(MeanMethod m) {
  return m == MeanMethod::Proposition ? "proposition" : "algorithmS2";
}

/// Observed n×J concentrations, one record per row.
struct ConcentrationMatrix {
  Matrix values;
  std::vector<std::string> pollutant_names;

  Index n() const { return values.rows(); }
  Index J() const { return values.cols(); }

  static ConcentrationMatrix from(Matrix values, std::vector<std::string> names = {}) {
    if (names.empty())
      for (Index j = 0; j < values.cols(); ++j) names.push_back("p" + std::to_string(j + 1));
    return {std::move(values), std::move(names)};
  }

  /// Type invariants. With `allow_zero_columns` only emptiness, shape and
  /// entry checks apply.
  void validate(bool allow_zero_columns = false) const {
    if (values.rows() < 1 || values.cols() < 1)
      throw Error(ErrorCode::EmptyData, "concentration matrix is empty");
    if (Index(pollutant_names.size()) != values.cols())
      throw Error(ErrorCode::ShapeMismatch, "pollutant name count does not match column count");
    for (Index j = 0; j < values.cols(); ++j) {
      bool nonzero = false;
      for (Index i = 0; i < values.rows(); ++i) {
        const double v = values(i, j);
        if (!std::isfinite(v))
          throw Error(ErrorCode::NonFinite, "non-finite concentration at row " + std::to_string(i) +
                                                ", column " + std::to_string(j));
        if (v < 0)
          throw Error(ErrorCode::NegativeValue, "negative concentration at row " + std::to_string(i) +
                                                    ", column " + std::to_string(j));
        nonzero = nonzero || v > 0;
      }
      if (!nonzero && !allow_zero_columns)
        throw Error(ErrorCode::InvalidArgument, "column " + pollutant_names[size_t(j)] + " is entirely zero");
    }
  }
};

/// Rows of Y divided by their totals; zero-total rows removed.
struct RowNormalizedData {
  Matrix ystar;        // n'×J, rows on the simplex
  Vector row_sums;     // n', original units
  IndexList kept_rows; // ystar row -> row of Y
  Index n_total = 0;   // n before dropping
  Warnings warnings;
};

struct EstimatorConfig {
  Index K = 0;
  SearchMode search = SearchMode::Auto;
  bool prune = false;
  Index cluster_count = 0;  // 0: 4*K clusters when pruning
  double epsilon_clip = 1e-10;
  Index rank_cap = 0;       // 0: K-1
  double exhaustive_budget = geometry::kExhaustiveBudget;
  Index max_sweeps = 100;
  MeanMethod mean_method = MeanMethod::Proposition;
  ZeroRowPolicy zero_row_policy = ZeroRowPolicy::Drop;
  std::uint64_t prune_seed = 0;
  Index hull_dim_max = geometry::kHullDimMax;

  Index effective_rank_cap() const { return rank_cap > 0 ? rank_cap : std::max<Index>(K - 1, 1); }
  Index effective_cluster_count() const { return cluster_count > 0 ? cluster_count : 4 * K; }

  void validate(Index J) const {
    require(K >= 1, "K must be at least 1");
    require(K < J, "K must be smaller than the number of pollutants");
    require(epsilon_clip > 0 && epsilon_clip <= 1e-3, "epsilon_clip must lie in (0, 1e-3]");
    require(rank_cap >= 0, "rank_cap must be non-negative");
    require(exhaustive_budget >= 0, "exhaustive_budget must be non-negative");
    require(max_sweeps >= 1, "max_sweeps must be positive");
    require(!prune || effective_cluster_count() >= K, "cluster_count must be at least K");
  }
};

/// K×J column-stochastic attribution fractions.
struct AttributionMatrix {
  Matrix values;
  std::vector<std::string> source_labels;
};

struct Diagnostics {
  Index r_B = 0;
  Index n_hull_vertices = 0;
  Index n_candidates_after_prune = 0;
  double log_volume = -std::numeric_limits<double>::infinity();
  SearchMode search_used = SearchMode::Auto;
  IndexList selected_rows;  // rows of Y that became the rows of H*
  IndexList dropped_rows;
  Warnings warnings;
};

struct ApportionmentEstimate {
  Matrix H_star_hat;  // K×J, row-stochastic
  Vector m_tilde;     // K
  AttributionMatrix phi_hat;
  Diagnostics diagnostics;
};

/// Candidate vertices for the max-volume search.
struct CandidateSet {
  Matrix ystar;                // m×J simplex rows
  PointCloud projected;        // m×r_B intrinsic coordinates
  IndexList rows;              // candidate -> row of RowNormalizedData::ystar
  geometry::Projection projection;
  Index n_hull_vertices = 0;
  Warnings warnings;
};

struct HStarEstimate {
  Matrix H;                    // K×J
  IndexList rows;              // rows of RowNormalizedData::ystar
  geometry::VertexSubset subset;
  SearchMode search_used = SearchMode::Greedy;
};

inline AttributionMatrix make_attribution(Matrix values) {
  AttributionMatrix out{std::move(values), {}};
  for (Index k = 0; k < out.values.rows(); ++k) out.source_labels.push_back("source" + std::to_string(k + 1));
  return out;
}

inline RowNormalizedData row_normalize(const ConcentrationMatrix& y,
                                       ZeroRowPolicy policy = ZeroRowPolicy::Drop) {
  y.validate(true);
  RowNormalizedData out;
  out.n_total = y.n();
  const Vector sums = y.values.rowwise().sum();
  IndexList dropped;
  for (Index i = 0; i < y.n(); ++i) {
    if (sums(i) > 0) {
      out.kept_rows.push_back(i);
    } else if (policy == ZeroRowPolicy::Error) {
      throw Error(ErrorCode::ZeroRow, "row " + std::to_string(i) + " has zero total concentration");
    } else {
      dropped.push_back(i);
    }
  }
  if (out.kept_rows.empty()) throw Error(ErrorCode::EmptyData, "every row has zero total concentration");
  if (!dropped.empty())
    out.warnings.push_back({WarningCode::ZeroRowsDropped,
                            std::to_string(dropped.size()) + " zero-total rows dropped"});

  const Index n = Index(out.kept_rows.size());
  out.ystar.resize(n, y.J());
  out.row_sums.resize(n);
  for (Index r = 0; r < n; ++r) {
    const Index i = out.kept_rows[size_t(r)];
    out.row_sums(r) = sums(i);
    out.ystar.row(r) = y.values.row(i) / sums(i);
  }
  return out;
}

/// Rows of Y dropped by row_normalize.
inline IndexList dropped_rows(const RowNormalizedData& data) {
  IndexList out;
  size_t k = 0;
  for (Index i = 0; i < data.n_total; ++i) {
    if (k < data.kept_rows.size() && data.kept_rows[k] == i)
      ++k;
    else
      out.push_back(i);
  }
  return out;
}

namespace detail {

// Lloyd's k-means (k-means++ seeding, at most 20 iterations); one member per
// non-empty cluster, the one farthest from the centroid of all points.
inline IndexList kmeans_representatives(const Matrix& points, Index clusters, std::uint64_t seed) {
  const Index m = points.rows();
  clusters = std::min(clusters, m);
  Engine eng = make_engine({seed, 0});
  boost::random::uniform_real_distribution<double> unif(0.0, 1.0);

  Matrix centers(clusters, points.cols());
  Vector best_d2 = Vector::Constant(m, std::numeric_limits<double>::infinity());
  Index first = std::min<Index>(Index(unif(eng) * double(m)), m - 1);
  centers.row(0) = points.row(first);
  for (Index c = 1; c < clusters; ++c) {
    for (Index i = 0; i < m; ++i)
      best_d2(i) = std::min(best_d2(i), (points.row(i) - centers.row(c - 1)).squaredNorm());
    const double total = best_d2.sum();
    Index pick = m - 1;
    if (total > 0) {
      double target = unif(eng) * total;
      for (Index i = 0; i < m; ++i) {
        target -= best_d2(i);
        if (target < 0) {
          pick = i;
          break;
        }
      }
    }
    centers.row(c) = points.row(pick);
  }

  std::vector<Index> label(m, -1);
  for (int iter = 0; iter < 20; ++iter) {
    bool changed = false;
    for (Index i = 0; i < m; ++i) {
      Index best = 0;
      double bd = (points.row(i) - centers.row(0)).squaredNorm();
      for (Index c = 1; c < clusters; ++c) {
        const double dd = (points.row(i) - centers.row(c)).squaredNorm();
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      if (label[i] != best) {
        label[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(clusters, points.cols());
    Vector counts = Vector::Zero(clusters);
    for (Index i = 0; i < m; ++i) {
      sums.row(label[i]) += points.row(i);
      counts(label[i]) += 1;
    }
    for (Index c = 0; c < clusters; ++c)
      if (counts(c) > 0) centers.row(c) = sums.row(c) / counts(c);
  }

  const Vector centroid = points.colwise().mean().transpose();
  std::vector<Index> rep(clusters, -1);
  std::vector<double> rep_d(clusters, -1.0);
  for (Index i = 0; i < m; ++i) {
    const double dd = (points.row(i).transpose() - centroid).squaredNorm();
    if (dd > rep_d[label[i]]) {
      rep_d[label[i]] = dd;
      rep[label[i]] = i;
    }
  }
  IndexList out;
  for (Index r : rep)
    if (r >= 0) out.push_back(r);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Hull vertices of the projected cloud (optionally pruned by clustering).
/// When the intrinsic dimension exceeds the hull limit every row becomes a
/// candidate and a warning is recorded.
inline CandidateSet extract_candidates(const RowNormalizedData& data, const EstimatorConfig& cfg) {
  const Index n = data.ystar.rows();
  if (n < cfg.K + 1)
    throw Error(ErrorCode::TooFewCandidates, "need at least K+1 non-zero records");

  CandidateSet out;
  out.projection = geometry::intrinsic_projection(data.ystar, cfg.effective_rank_cap());
  const PointCloud& z = out.projection.points;

  IndexList idx;
  try {
    idx = geometry::hull_vertices(z, &out.warnings, cfg.hull_dim_max);
    out.n_hull_vertices = Index(idx.size());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::HullDimensionExceeded) throw;
    out.warnings.push_back({WarningCode::HullDimensionExceeded,
                            std::string(e.what()) + "; using all rows as candidates"});
    idx.resize(size_t(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    out.n_hull_vertices = 0;
  }

  if (cfg.prune && Index(idx.size()) > cfg.effective_cluster_count()) {
    Matrix pts(Index(idx.size()), data.ystar.cols());
    for (size_t r = 0; r < idx.size(); ++r) pts.row(Index(r)) = data.ystar.row(idx[r]);
    IndexList keep = detail::kmeans_representatives(pts, cfg.effective_cluster_count(), cfg.prune_seed);
    IndexList pruned;
    for (Index r : keep) pruned.push_back(idx[size_t(r)]);
    idx = std::move(pruned);
  }

  if (Index(idx.size()) < cfg.K)
    throw Error(ErrorCode::TooFewCandidates, "sample hull has " + std::to_string(idx.size()) +
                                                 " candidate vertices, fewer than K");

  const Index m = Index(idx.size());
  out.rows = idx;
  out.ystar.resize(m, data.ystar.cols());
  out.projected.resize(m, z.cols());
  for (Index r = 0; r < m; ++r) {
    out.ystar.row(r) = data.ystar.row(idx[size_t(r)]);
    out.projected.row(r) = z.row(idx[size_t(r)]);
  }
  return out;
}

/// Max-volume K-subset of the candidates (exhaustive when affordable and
/// allowed by cfg.search, greedy otherwise); rows of H* are the selected
/// simplex rows.
inline HStarEstimate estimate_H_star(const CandidateSet& cands, const EstimatorConfig& cfg) {
  const Index m = cands.projected.rows();
  HStarEstimate out;
  const bool exhaustive = cfg.search != SearchMode::Greedy && binomial(m, cfg.K) <= cfg.exhaustive_budget;
  if (exhaustive) {
    out.subset = geometry::max_volume_exhaustive(cands.projected, cfg.K, cfg.exhaustive_budget);
    out.search_used = SearchMode::Exhaustive;
  } else {
    out.subset = geometry::max_volume_greedy(cands.projected, cfg.K, cfg.max_sweeps);
    out.search_used = SearchMode::Greedy;
  }
  out.H.resize(cfg.K, cands.ystar.cols());
  for (Index k = 0; k < cfg.K; ++k) {
    const Index c = out.subset.indices[size_t(k)];
    out.H.row(k) = cands.ystar.row(c);
    out.rows.push_back(cands.rows[size_t(c)]);
  }
  return out;
}

inline HStarEstimate estimate_H_star(const RowNormalizedData& data, const EstimatorConfig& cfg) {
  return estimate_H_star(extract_candidates(data, cfg), cfg);
}

/// Estimated mean of the rescaled emissions W~ = W D.
///
/// Proposition method: m^T = [mean(Y)^T, mean(r)] R. AlgorithmS2 method:
/// per-record weights [y*_i, 1] R clipped below at epsilon_clip and
/// renormalized, then the column means of diag(r) W*. Means run over all n
/// records (dropped zero rows contribute zero). Negative entries are clipped
/// to zero with a warning.
inline Vector estimate_mu_tilde(const ConcentrationMatrix& y, const RowNormalizedData& data,
                                const Matrix& hstar, const EstimatorConfig& cfg,
                                Warnings* warnings = nullptr) {
  require(hstar.cols() == y.J(), "estimate_mu_tilde: profile width does not match data");
  const Index K = hstar.rows();
  const Index J = y.J();
  const geometry::AffineInverse inv = geometry::affine_right_inverse(hstar, warnings);
  const double n_total = double(data.n_total);

  Vector m(K);
  if (cfg.mean_method == MeanMethod::Proposition) {
    Vector aug(J + 1);
    aug.head(J) = y.values.colwise().sum().transpose() / n_total;
    aug(J) = aug.head(J).sum();
    // One source carries the whole mean total whatever its profile.
    if (K == 1)
      m(0) = aug(J);
    else
      m = inv.R.transpose() * aug;
  } else {
    m.setZero();
    Vector aug(J + 1);
    for (Index i = 0; i < data.ystar.rows(); ++i) {
      aug.head(J) = data.ystar.row(i).transpose();
      aug(J) = 1.0;
      Vector w = inv.R.transpose() * aug;
      w = w.cwiseMax(cfg.epsilon_clip);
      w /= w.sum();
      m += data.row_sums(i) * w;
    }
    m /= n_total;
  }

  if ((m.array() < 0).any()) {
    if (warnings)
      warnings->push_back({WarningCode::NegativeMeanClipped,
                           "negative source mean estimates clipped to zero"});
    m = m.cwiseMax(0.0);
  }
  return m;
}

/// phi_kj = m_k H_kj / sum_l m_l H_lj.
inline AttributionMatrix compute_phi(const Vector& m_tilde, const Matrix& hstar) {
  require(m_tilde.size() == hstar.rows(), "compute_phi: mean length does not match profile rows");
  require((m_tilde.array() >= 0).all() && (m_tilde.array() > 0).any(),
          "compute_phi: means must be non-negative with a positive entry");
  const Matrix weighted = m_tilde.asDiagonal() * hstar;
  const Vector denom = weighted.colwise().sum().transpose();
  for (Index j = 0; j < hstar.cols(); ++j)
    if (!(denom(j) > 0))
      throw Error(ErrorCode::ZeroDenominator,
                  "pollutant " + std::to_string(j) + " is not explained by any source");
  Matrix phi = weighted * denom.cwiseInverse().asDiagonal();
  return make_attribution(std::move(phi));
}

namespace detail {

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  }
}

inline void append(Warnings& dst, const Warnings& src) { dst.insert(dst.end(), src.begin(), src.end()); }

}  // namespace detail

/// Full pipeline: row normalization, candidate extraction, max-volume
/// vertices, mean estimation and attribution fractions.
inline ApportionmentEstimate apportion(const ConcentrationMatrix& y, const EstimatorConfig& cfg) {
  detail::staged("input", [&] {
    y.validate();
    cfg.validate(y.J());
  });
  ApportionmentEstimate out;
  Diagnostics& diag = out.diagnostics;

  const RowNormalizedData data = detail::staged("row_normalize", [&] { return row_normalize(y, cfg.zero_row_policy); });
  detail::append(diag.warnings, data.warnings);
  diag.dropped_rows = dropped_rows(data);

  if (cfg.K == 1) {
    // A single source: every record is a multiple of the same profile.
    out.H_star_hat = (y.values.colwise().sum() / y.values.sum()).eval();
    diag.search_used = SearchMode::Auto;
    diag.log_volume = 0.0;
  } else {
    const CandidateSet cands = detail::staged("extract_candidates", [&] { return extract_candidates(data, cfg); });
    detail::append(diag.warnings, cands.warnings);
    diag.r_B = cands.projection.basis.rank;
    diag.n_hull_vertices = cands.n_hull_vertices;
    diag.n_candidates_after_prune = cands.projected.rows();

    const HStarEstimate h = detail::staged("estimate_H_star", [&] { return estimate_H_star(cands, cfg); });
    out.H_star_hat = h.H;
    diag.log_volume = h.subset.log_volume;
    diag.search_used = h.search_used;
    for (Index r : h.rows) diag.selected_rows.push_back(data.kept_rows[size_t(r)]);
  }

  out.m_tilde = detail::staged("estimate_mu_tilde", [&] {
    return estimate_mu_tilde(y, data, out.H_star_hat, cfg, &diag.warnings);
  });
  out.phi_hat = detail::staged("compute_phi", [&] { return compute_phi(out.m_tilde, out.H_star_hat); });
  return out;
}

}  // namespace apportion
