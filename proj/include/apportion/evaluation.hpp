#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "apportion/estimator.hpp"
#include "apportion/geometry.hpp"
#include "apportion/synthgen.hpp"

namespace apportion::eval {

/// aligned.row(k) = estimate.row(permutation[k]).
struct AlignmentResult {
  std::vector<Index> permutation;
  double total_sq_distance = 0.0;
};

namespace detail {

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::ShapeMismatch, std::string(who) + ": matrices differ in shape");
}

// Hungarian algorithm (potentials form) on a square cost matrix; returns
// assignment row -> column.
inline std::vector<Index> hungarian(const Matrix& cost) {
  const Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> p(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) minv[j] = cur, way[j] = j0;
        if (minv[j] < delta) delta = minv[j], j1 = j;
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<Index> assign(n, 0);
  for (Index j = 1; j <= n; ++j)
    if (p[j]) assign[p[j] - 1] = j - 1;
  return assign;
}

}  // namespace detail

/// Row permutation of `estimate` minimizing the total squared Euclidean
/// distance to `truth`. K <= 8: all K! permutations in lexicographic order
/// (first minimum wins); larger K: Hungarian assignment.
inline AlignmentResult align_rows(const Matrix& truth, const Matrix& estimate) {
  detail::check_same_shape(truth, estimate, "align_rows");
  const Index K = truth.rows();
  Matrix cost(K, K);
  for (Index a = 0; a < K; ++a)
    for (Index b = 0; b < K; ++b) cost(a, b) = (truth.row(a) - estimate.row(b)).squaredNorm();

  AlignmentResult out;
  if (K <= 8) {
    std::vector<Index> perm(K);
    std::iota(perm.begin(), perm.end(), Index{0});
    out.total_sq_distance = std::numeric_limits<double>::infinity();
    do {
      double total = 0.0;
      for (Index k = 0; k < K; ++k) total += cost(k, perm[k]);
      if (total < out.total_sq_distance) {
        out.total_sq_distance = total;
        out.permutation = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    out.permutation = detail::hungarian(cost);
    out.total_sq_distance = 0.0;
    for (Index k = 0; k < K; ++k) out.total_sq_distance += cost(k, out.permutation[k]);
  }
  return out;
}

inline Matrix apply_alignment(const Matrix& m, const std::vector<Index>& perm) {
  Matrix out(m.rows(), m.cols());
  for (Index k = 0; k < m.rows(); ++k) out.row(k) = m.row(perm[size_t(k)]);
  return out;
}

inline Vector apply_alignment(const Vector& v, const std::vector<Index>& perm) {
  Vector out(v.size());
  for (Index k = 0; k < v.size(); ++k) out(k) = v(perm[size_t(k)]);
  return out;
}

/// Row-averaged RMSE, each row scaled by the norm of the true row.
inline double nrmse(const Matrix& truth, const Matrix& aligned) {
  detail::check_same_shape(truth, aligned, "nrmse");
  const Index K = truth.rows();
  const double J = double(truth.cols());
  double total = 0.0;
  for (Index k = 0; k < K; ++k) {
    const double norm = truth.row(k).norm();
    if (!(norm > 0)) throw Error(ErrorCode::ZeroNormRow, "nrmse: true row " + std::to_string(k) + " is zero");
    total += std::sqrt((truth.row(k) - aligned.row(k)).squaredNorm() / J) / norm;
  }
  return total / double(K);
}

/// ||truth - aligned||_F / ||truth||_F.
inline double nfd(const Matrix& truth, const Matrix& aligned) {
  detail::check_same_shape(truth, aligned, "nfd");
  const double norm = truth.norm();
  require(norm > 0, "nfd: true matrix is zero");
  return (truth - aligned).norm() / norm;
}

struct HausdorffResult {
  double distance = 0.0;
  Index grid_points = 0;
  Warnings warnings;
};

/// All barycentric weight vectors with entries in {0, 1/res, ..., 1}.
inline Matrix barycentric_grid(Index K, Index resolution) {
  std::vector<std::vector<Index>> rows;
  std::vector<Index> cur(size_t(K), 0);
  auto rec = [&](auto&& self, Index pos, Index left) -> void {
    if (pos == K - 1) {
      cur[size_t(pos)] = left;
      rows.push_back(cur);
      return;
    }
    for (Index a = left; a >= 0; --a) {
      cur[size_t(pos)] = a;
      self(self, pos + 1, left - a);
    }
  };
  rec(rec, 0, resolution);
  Matrix out(Index(rows.size()), K);
  for (Index r = 0; r < out.rows(); ++r)
    for (Index k = 0; k < K; ++k) out(r, k) = double(rows[size_t(r)][size_t(k)]) / double(resolution);
  return out;
}

/// Directed Hausdorff distance sup_{y in conv(H*)} dist(y, conv{Y*}),
/// approximated by the maximum over a barycentric grid of conv(H*). Sample
/// hull distances use the hull vertices of Y* when they can be computed.
inline HausdorffResult hausdorff_to_polytope(const Matrix& ystar, const Matrix& hstar, Index resolution = 20) {
  require(ystar.cols() == hstar.cols(), "hausdorff_to_polytope: dimension mismatch");
  require(ystar.rows() >= 1 && hstar.rows() >= 1, "hausdorff_to_polytope: empty input");
  require(resolution >= 1, "hausdorff_to_polytope: resolution must be positive");
  HausdorffResult out;

  IndexList verts;
  if (ystar.rows() >= 2) {
    try {
      const auto proj = geometry::intrinsic_projection(ystar, ystar.cols() - 1);
      verts = geometry::hull_vertices(proj.points, &out.warnings);
    } catch (const Error&) {
      verts.clear();
    }
  }
  Matrix sample;
  if (verts.empty()) {
    sample = ystar;
  } else {
    sample.resize(Index(verts.size()), ystar.cols());
    for (size_t r = 0; r < verts.size(); ++r) sample.row(Index(r)) = ystar.row(verts[r]);
  }

  Index outside = 0;
  for (Index i = 0; i < ystar.rows(); ++i)
    if (geometry::nearest_point_in_hull(hstar, ystar.row(i).transpose()).distance > 1e-8) ++outside;
  if (outside > 0)
    out.warnings.push_back({WarningCode::NotContained, std::to_string(outside) +
                                                           " sample rows lie outside conv(H*) by more than 1e-8"});

  const Matrix grid = barycentric_grid(hstar.rows(), resolution) * hstar;
  out.grid_points = grid.rows();
  for (Index g = 0; g < grid.rows(); ++g)
    out.distance = std::max(out.distance, geometry::nearest_point_in_hull(sample, grid.row(g).transpose()).distance);
  return out;
}

struct MetricsRecord {
  Index n = 0;
  Index replicate = 0;
  double nrmse = std::numeric_limits<double>::quiet_NaN();
  double nfd = std::numeric_limits<double>::quiet_NaN();
  double runtime_seconds = 0.0;
  double log_volume = -std::numeric_limits<double>::infinity();
  std::string search_used;
  std::string error;        // empty on success
  std::string error_stage;

  bool ok() const { return error.empty(); }
};

struct StudyDesign {
  synth::Process process = synth::Process::AR1;
  Index J = 8;
  Index K = 3;
  std::vector<Index> n_grid{100, 300, 1500, 10000};
  Index replicates = 50;
  SearchMode search = SearchMode::Greedy;
  std::uint64_t master_seed = 1;
  Index workers = 1;
  EstimatorConfig estimator{};  // K and search are overwritten from the design
  Index n_candidates = 0;
};

/// Stream block of replicate r at grid position g.
inline RngSpec replicate_stream(const StudyDesign& d, size_t grid_pos, Index replicate) {
  const std::uint64_t block = std::uint64_t(grid_pos) * std::uint64_t(d.replicates) + std::uint64_t(replicate);
  return {d.master_seed, block * RngSpec::replicate_stride};
}

/// One replicate: fresh ground truth, apportion, align, score.
inline MetricsRecord run_replicate(const StudyDesign& d, size_t grid_pos, Index replicate) {
  MetricsRecord rec;
  rec.n = d.n_grid[grid_pos];
  rec.replicate = replicate;
  const auto t0 = std::chrono::steady_clock::now();
  std::string stage = "make_ground_truth";
  try {
    synth::GroundTruthOptions opts;
    opts.n_candidates = d.n_candidates;
    const auto [y, gt] = synth::make_ground_truth(rec.n, d.J, d.K, d.process, replicate_stream(d, grid_pos, replicate), opts);
    EstimatorConfig cfg = d.estimator;
    cfg.K = d.K;
    cfg.search = d.search;
    stage = "apportion";
    const ApportionmentEstimate est = apportion(y, cfg);
    stage = "evaluate";
    const AlignmentResult al = align_rows(gt.phi_true.values, est.phi_hat.values);
    const Matrix aligned = apply_alignment(est.phi_hat.values, al.permutation);
    rec.nrmse = nrmse(gt.phi_true.values, aligned);
    rec.nfd = nfd(gt.phi_true.values, aligned);
    rec.log_volume = est.diagnostics.log_volume;
    rec.search_used = to_string(est.diagnostics.search_used);
  } catch (const Error& e) {
    rec.error = std::string(to_string(e.code())) + ": " + e.what();
    rec.error_stage = e.stage().empty() ? stage : stage + "/" + e.stage();
  } catch (const std::exception& e) {
    rec.error = e.what();
    rec.error_stage = stage;
  }
  rec.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

/// Every (n, replicate) pair, fanned out over `workers` threads. Records are
/// ordered by grid position then replicate regardless of scheduling.
inline std::vector<MetricsRecord> convergence_study(const StudyDesign& d) {
  require(d.replicates >= 1, "convergence_study: replicates must be positive");
  require(!d.n_grid.empty(), "convergence_study: empty n grid");
  require(d.K >= 1 && d.K < d.J, "convergence_study: need 1 <= K < J");
  const size_t tasks = d.n_grid.size() * size_t(d.replicates);
  std::vector<MetricsRecord> out(tasks);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t t = next++; t < tasks; t = next++)
      out[t] = run_replicate(d, t / size_t(d.replicates), Index(t % size_t(d.replicates)));
  };
  const Index workers = std::max<Index>(1, std::min<Index>(d.workers, Index(tasks)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (Index w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

/// Linear-interpolation quantile of an unsorted sample.
inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), "quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * double(v.size() - 1);
  const size_t lo = size_t(std::floor(pos));
  const size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

struct SummaryRow {
  Index n = 0;
  Index ok = 0;
  Index failed = 0;
  double nrmse_q1 = 0, nrmse_median = 0, nrmse_q3 = 0;
  double nfd_q1 = 0, nfd_median = 0, nfd_q3 = 0;
};

/// Per-n median and interquartile range over successful replicates.
inline std::vector<SummaryRow> summarize(const std::vector<MetricsRecord>& records) {
  std::map<Index, std::pair<std::vector<double>, std::vector<double>>> by_n;
  std::map<Index, Index> failures;
  std::vector<Index> order;
  for (const auto& r : records) {
    if (!by_n.count(r.n) && !failures.count(r.n)) order.push_back(r.n);
    if (r.ok()) {
      by_n[r.n].first.push_back(r.nrmse);
      by_n[r.n].second.push_back(r.nfd);
    } else {
      ++failures[r.n];
      by_n[r.n];
    }
  }
  std::vector<SummaryRow> out;
  for (Index n : order) {
    SummaryRow s;
    s.n = n;
    const auto& [a, b] = by_n[n];
    s.ok = Index(a.size());
    s.failed = failures[n];
    if (!a.empty()) {
      s.nrmse_q1 = quantile(a, 0.25);
      s.nrmse_median = quantile(a, 0.5);
      s.nrmse_q3 = quantile(a, 0.75);
      s.nfd_q1 = quantile(b, 0.25);
      s.nfd_median = quantile(b, 0.5);
      s.nfd_q3 = quantile(b, 0.75);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace apportion::eval
