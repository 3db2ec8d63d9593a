#pragma once

#include <algorithm>
#include <limits>
#include <array>
#include <cmath>
#include <vector>

#include "apportion/types.hpp"

namespace apportion::geometry::detail {

/// Raised when a facet plane cannot be formed reliably; the caller retries
/// on perturbed input.
struct FacetDegeneracy {};

/// Quickhull vertex identification in 3 to 8 dimensions.
///
/// Facets are simplicial: `verts[i]` and `neighbors[i]` are paired so that
/// neighbor i lies across the ridge that omits vertex i. Orientation is fixed
/// against a strictly interior point (centroid of the initial simplex), so
/// vertex order inside a facet carries no meaning.
class QuickHull {
 public:
  static constexpr int kMaxDim = 8;

  explicit QuickHull(const PointCloud& cloud) : n_(int(cloud.rows())), d_(int(cloud.cols())) {
    coords_.resize(size_t(n_) * d_);
    double scale = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < d_; ++j) {
        coords_[size_t(i) * d_ + j] = cloud(i, j);
        scale = std::max(scale, std::abs(cloud(i, j)));
      }
    scale_ = scale > 0 ? scale : 1.0;
    tol_ = 64.0 * d_ * std::numeric_limits<double>::epsilon() * scale_;
  }

  IndexList vertices() {
    build_initial_simplex();
    std::vector<int> work;
    for (int f = 0; f < int(facets_.size()); ++f)
      if (!facets_[f].outside.empty()) work.push_back(f);

    while (!work.empty()) {
      const int f = work.back();
      work.pop_back();
      if (!facets_[f].alive || facets_[f].outside.empty()) continue;
      add_point(f, work);
    }

    std::vector<char> is_vertex(n_, 0);
    for (const auto& f : facets_)
      if (f.alive)
        for (int v : f.verts) is_vertex[v] = 1;
    IndexList out;
    for (int i = 0; i < n_; ++i)
      if (is_vertex[i]) out.push_back(i);
    return out;
  }

 private:
  struct Facet {
    std::vector<int> verts;
    std::vector<int> neighbors;
    std::vector<double> normal;
    double offset = 0.0;
    std::vector<int> outside;
    int furthest = -1;
    double furthest_dist = 0.0;
    bool alive = true;
    unsigned mark = 0;
    bool visible = false;
  };

  const double* point(int i) const { return &coords_[size_t(i) * d_]; }

  double distance(const Facet& f, const double* x) const {
    double s = -f.offset;
    for (int j = 0; j < d_; ++j) s += f.normal[j] * x[j];
    return s;
  }

  // Normal from Gram-Schmidt (applied twice) on the facet edges, then the
  // coordinate axis with the largest component orthogonal to them.
  void set_plane(Facet& f) const {
    double q[kMaxDim][kMaxDim];
    const double* p0 = point(f.verts[0]);
    double lead = 0.0;
    for (int c = 0; c < d_ - 1; ++c) {
      const double* pc = point(f.verts[c + 1]);
      double* e = q[c];
      for (int j = 0; j < d_; ++j) e[j] = pc[j] - p0[j];
      lead = std::max(lead, norm(e));
      for (int pass = 0; pass < 2; ++pass)
        for (int b = 0; b < c; ++b) project_out(e, q[b]);
      const double nr = norm(e);
      if (!(lead > 0) || nr <= 1e-12 * lead) throw FacetDegeneracy{};
      for (int j = 0; j < d_; ++j) e[j] /= nr;
    }

    double best[kMaxDim];
    double best_norm = -1.0;
    for (int k = 0; k < d_; ++k) {
      double r[kMaxDim] = {};
      r[k] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (int b = 0; b < d_ - 1; ++b) project_out(r, q[b]);
      const double nr = norm(r);
      if (nr > best_norm) {
        best_norm = nr;
        std::copy(r, r + d_, best);
      }
    }
    f.normal.resize(d_);
    for (int j = 0; j < d_; ++j) f.normal[j] = best[j] / best_norm;
    f.offset = 0.0;
    for (int j = 0; j < d_; ++j) f.offset += f.normal[j] * p0[j];

    const double side = distance(f, interior_.data());
    if (std::abs(side) <= tol_) throw FacetDegeneracy{};
    if (side > 0) {
      for (auto& v : f.normal) v = -v;
      f.offset = -f.offset;
    }
  }

  double norm(const double* v) const {
    double s = 0.0;
    for (int j = 0; j < d_; ++j) s += v[j] * v[j];
    return std::sqrt(s);
  }

  void project_out(double* v, const double* unit) const {
    double dot = 0.0;
    for (int j = 0; j < d_; ++j) dot += v[j] * unit[j];
    for (int j = 0; j < d_; ++j) v[j] -= dot * unit[j];
  }

  void assign(int fi, int p, double dist) {
    Facet& f = facets_[fi];
    f.outside.push_back(p);
    if (dist > f.furthest_dist || f.furthest < 0 ||
        (dist == f.furthest_dist && p < f.furthest)) {
      f.furthest = p;
      f.furthest_dist = dist;
    }
  }

  void build_initial_simplex() {
    if (n_ < d_ + 1)
      throw Error(ErrorCode::DegenerateCloud, "hull_vertices: fewer points than dimension + 1");

    std::vector<int> chosen;
    int first = 0;
    for (int i = 1; i < n_; ++i)
      if (point(i)[0] < point(first)[0]) first = i;
    chosen.push_back(first);

    // Grow an affinely independent set by maximal residual distance.
    std::vector<std::vector<double>> basis;
    const double degenerate_tol = 1e-10 * scale_;
    std::vector<double> r(d_);
    for (int t = 1; t <= d_; ++t) {
      int best = -1;
      double best_norm = -1.0;
      std::vector<double> best_r;
      for (int i = 0; i < n_; ++i) {
        const double* x = point(i);
        const double* x0 = point(first);
        for (int j = 0; j < d_; ++j) r[j] = x[j] - x0[j];
        for (const auto& b : basis) {
          double dot = 0.0;
          for (int j = 0; j < d_; ++j) dot += r[j] * b[j];
          for (int j = 0; j < d_; ++j) r[j] -= dot * b[j];
        }
        double nr = 0.0;
        for (int j = 0; j < d_; ++j) nr += r[j] * r[j];
        nr = std::sqrt(nr);
        if (nr > best_norm) {
          best_norm = nr;
          best = i;
          best_r = r;
        }
      }
      if (best_norm <= degenerate_tol)
        throw Error(ErrorCode::DegenerateCloud,
                    "hull_vertices: points are affinely dependent below dimension " +
                        std::to_string(d_));
      for (auto& v : best_r) v /= best_norm;
      basis.push_back(best_r);
      chosen.push_back(best);
    }

    interior_.assign(d_, 0.0);
    for (int c : chosen)
      for (int j = 0; j < d_; ++j) interior_[j] += point(c)[j] / double(d_ + 1);

    // Facet i omits simplex vertex i; its neighbor across the ridge omitting
    // vertex v is facet v.
    facets_.resize(d_ + 1);
    for (int i = 0; i <= d_; ++i) {
      Facet& f = facets_[i];
      for (int v = 0; v <= d_; ++v) {
        if (v == i) continue;
        f.verts.push_back(chosen[v]);
        f.neighbors.push_back(v);
      }
      set_plane(f);
    }

    std::vector<char> in_simplex(n_, 0);
    for (int c : chosen) in_simplex[c] = 1;
    for (int p = 0; p < n_; ++p) {
      if (in_simplex[p]) continue;
      for (int f = 0; f <= d_; ++f) {
        const double dist = distance(facets_[f], point(p));
        if (dist > tol_) {
          assign(f, p, dist);
          break;
        }
      }
    }
  }

  void add_point(int start, std::vector<int>& work) {
    const int apex = facets_[start].furthest;
    const double* x = point(apex);
    ++epoch_;

    std::vector<int> visible{start};
    facets_[start].mark = epoch_;
    facets_[start].visible = true;
    std::vector<std::pair<int, int>> horizon;  // (visible facet, slot)
    for (size_t k = 0; k < visible.size(); ++k) {
      const int vf = visible[k];
      for (int s = 0; s < d_; ++s) {
        const int nb = facets_[vf].neighbors[s];
        Facet& nf = facets_[nb];
        if (nf.mark != epoch_) {
          nf.mark = epoch_;
          nf.visible = distance(nf, x) > tol_;
          if (nf.visible) visible.push_back(nb);
        }
        if (!nf.visible) horizon.emplace_back(vf, s);
      }
    }

    std::vector<int> created;
    created.reserve(horizon.size());
    struct Ridge {
      std::array<int, kMaxDim> key;
      int facet;
      int slot;
    };
    std::vector<Ridge> ridges;
    ridges.reserve(horizon.size() * size_t(d_ - 1));
    for (const auto& [vf, s] : horizon) {
      Facet nf;
      nf.verts.reserve(d_);
      for (int j = 0; j < d_; ++j)
        if (j != s) nf.verts.push_back(facets_[vf].verts[j]);
      nf.verts.push_back(apex);
      nf.neighbors.assign(d_, -1);
      const int below = facets_[vf].neighbors[s];
      nf.neighbors[d_ - 1] = below;
      set_plane(nf);
      const int id = int(facets_.size());
      facets_.push_back(std::move(nf));
      for (auto& link : facets_[below].neighbors)
        if (link == vf) link = id;
      created.push_back(id);

      for (int j = 0; j < d_ - 1; ++j) {
        Ridge r{};
        r.key.fill(-1);
        int w = 0;
        for (int q = 0; q < d_ - 1; ++q)
          if (q != j) r.key[w++] = facets_[id].verts[q];
        std::sort(r.key.begin(), r.key.begin() + w);
        r.facet = id;
        r.slot = j;
        ridges.push_back(r);
      }
    }
    // Every new ridge is shared by exactly two new facets.
    std::sort(ridges.begin(), ridges.end(),
              [](const Ridge& a, const Ridge& b) { return a.key < b.key; });
    for (size_t i = 0; i < ridges.size(); i += 2) {
      if (i + 1 >= ridges.size() || ridges[i].key != ridges[i + 1].key ||
          (i + 2 < ridges.size() && ridges[i + 2].key == ridges[i].key))
        throw FacetDegeneracy{};
      facets_[ridges[i].facet].neighbors[ridges[i].slot] = ridges[i + 1].facet;
      facets_[ridges[i + 1].facet].neighbors[ridges[i + 1].slot] = ridges[i].facet;
    }

    for (int vf : visible) {
      Facet& f = facets_[vf];
      f.alive = false;
      for (int p : f.outside) {
        if (p == apex) continue;
        const double* xp = point(p);
        for (int c : created) {
          const double dist = distance(facets_[c], xp);
          if (dist > tol_) {
            assign(c, p, dist);
            break;
          }
        }
      }
      std::vector<int>().swap(f.outside);
    }
    for (int c : created)
      if (!facets_[c].outside.empty()) work.push_back(c);
  }

  int n_;
  int d_;
  std::vector<double> coords_;
  double scale_ = 1.0;
  double tol_ = 0.0;
  std::vector<double> interior_;
  std::vector<Facet> facets_;
  unsigned epoch_ = 0;
};

}  // namespace apportion::geometry::detail
