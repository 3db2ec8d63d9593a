#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "apportion/estimator.hpp"
#include "apportion/geometry.hpp"
#include "apportion/rng.hpp"

namespace apportion::synth {

/// Latent Gaussian AR(1) per source; W = exp(g).
struct LogAR1Params {
  Vector phi;
  Vector mu_g;
  Vector sigma_eps;

  void validate() const {
    require(phi.size() == mu_g.size() && phi.size() == sigma_eps.size(), "LogAR1Params: length mismatch");
    require((phi.array().abs() < 1).all(), "LogAR1Params: |phi| must be < 1");
    require((sigma_eps.array() >= 0).all(), "LogAR1Params: sigma_eps must be non-negative");
  }
};

struct MixtureComponent {
  double weight;
  double mu;
  double sigma;
};

/// Independent lognormal mixture per source.
struct LognormalMixtureParams {
  std::vector<std::vector<MixtureComponent>> sources;

  void validate() const {
    for (const auto& comps : sources) {
      require(!comps.empty(), "LognormalMixtureParams: a source has no components");
      double total = 0.0;
      for (const auto& c : comps) {
        require(c.weight >= 0, "LognormalMixtureParams: negative weight");
        require(c.sigma >= 0, "LognormalMixtureParams: negative sigma");
        total += c.weight;
      }
      require(std::abs(total - 1.0) <= 1e-12, "LognormalMixtureParams: weights must sum to 1");
    }
  }
};

enum class Process { AR1, Mixture };

inline std::string to_string(Process p) { return p == Process::AR1 ? "ar1" : "mixture"; }

struct GroundTruth {
  Matrix W;      // n×K emissions
  Matrix H;      // K×J profiles, rows on the simplex
  Vector mu;     // population means of the emissions
  AttributionMatrix phi_true;
  std::variant<LogAR1Params, LognormalMixtureParams> params;
};

/// Substream offsets within one replicate's stream block.
inline constexpr std::uint64_t kProfileStream = 0xFF00;
inline constexpr std::uint64_t kParamStream = 0xFF01;

namespace detail {

// Largest pairwise-minimum-distance K-subset of the rows indexed by `pool`.
// Exhaustive (lexicographic tie-break) when affordable, otherwise farthest-point
// traversal followed by single swaps.
inline IndexList maximin_subset(const Matrix& pts, const IndexList& pool, Index K) {
  const Index m = Index(pool.size());
  Matrix dist(m, m);
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < m; ++b) dist(a, b) = (pts.row(pool[a]) - pts.row(pool[b])).norm();

  auto score = [&](const IndexList& s) {
    double v = std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < s.size(); ++a)
      for (size_t b = a + 1; b < s.size(); ++b) v = std::min(v, dist(s[a], s[b]));
    return v;
  };

  IndexList best(K);
  std::iota(best.begin(), best.end(), Index{0});
  if (K == 1) return {pool[0]};

  if (binomial(m, K) <= geometry::kExhaustiveBudget) {
    IndexList combo = best;
    double best_v = -1.0;
    while (true) {
      const double v = score(combo);
      if (v > best_v) {
        best_v = v;
        best = combo;
      }
      Index i = K - 1;
      while (i >= 0 && combo[i] == m - K + i) --i;
      if (i < 0) break;
      ++combo[i];
      for (Index j = i + 1; j < K; ++j) combo[j] = combo[j - 1] + 1;
    }
  } else {
    Index a0 = 0, b0 = 1;
    for (Index a = 0; a < m; ++a)
      for (Index b = a + 1; b < m; ++b)
        if (dist(a, b) > dist(a0, b0)) a0 = a, b0 = b;
    best = {a0, b0};
    while (Index(best.size()) < K) {
      Index pick = -1;
      double pick_v = -1.0;
      for (Index i = 0; i < m; ++i) {
        if (std::find(best.begin(), best.end(), i) != best.end()) continue;
        double v = std::numeric_limits<double>::infinity();
        for (Index s : best) v = std::min(v, dist(i, s));
        if (v > pick_v) pick_v = v, pick = i;
      }
      best.push_back(pick);
    }
    for (bool improved = true; improved;) {
      improved = false;
      double cur = score(best);
      for (Index pos = 0; pos < K; ++pos)
        for (Index i = 0; i < m; ++i) {
          if (std::find(best.begin(), best.end(), i) != best.end()) continue;
          IndexList trial = best;
          trial[pos] = i;
          const double v = score(trial);
          if (v > cur + 1e-15) best = trial, cur = v, improved = true;
        }
    }
    std::sort(best.begin(), best.end());
  }
  IndexList out;
  for (Index b : best) out.push_back(pool[b]);
  return out;
}

}  // namespace detail

/// K profile rows chosen among hull vertices of n_candidates Exp(1) vectors
/// normalized onto the simplex, maximizing the smallest pairwise distance.
/// Redraws (up to 100 attempts) when the hull has fewer than K vertices or
/// the selected rows are not of full row rank.
inline Matrix generate_profile_matrix(Index J, Index K, Index n_candidates, const RngSpec& rng) {
  require(K >= 1 && K <= J, "generate_profile_matrix: need 1 <= K <= J");
  require(n_candidates >= 10 * K, "generate_profile_matrix: need n_candidates >= 10 K");
  Engine eng = make_engine(rng);
  boost::random::exponential_distribution<double> expo(1.0);

  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix cand(n_candidates, J);
    for (Index i = 0; i < n_candidates; ++i)
      for (Index j = 0; j < J; ++j) cand(i, j) = expo(eng);
    for (Index i = 0; i < n_candidates; ++i) cand.row(i) /= cand.row(i).sum();

    const IndexList pool = geometry::extreme_points_lp(cand);
    if (Index(pool.size()) < K) continue;

    const IndexList chosen = detail::maximin_subset(cand, pool, K);
    Matrix h(K, J);
    for (Index k = 0; k < K; ++k) h.row(k) = cand.row(chosen[size_t(k)]);
    Eigen::JacobiSVD<Matrix> svd(h);
    const Vector& s = svd.singularValues();
    if (s(s.size() - 1) > 1e-10 * s(0)) return h;
  }
  throw Error(ErrorCode::DegenerateCloud, "generate_profile_matrix: no full-rank profile after 100 draws");
}

/// Stationary start g_1 ~ N(mu, sigma^2 / (1 - phi^2)), then
/// g_i = mu + phi (g_{i-1} - mu) + eps_i. Source k draws from substream k.
inline Matrix simulate_log_ar1_latent(Index n, const LogAR1Params& p, const RngSpec& rng) {
  p.validate();
  const Index K = p.phi.size();
  Matrix g(n, K);
  for (Index k = 0; k < K; ++k) {
    Engine eng = make_engine(rng.substream(std::uint64_t(k)));
    boost::random::normal_distribution<double> norm(0.0, 1.0);
    const double stat_sd = p.sigma_eps(k) / std::sqrt(1.0 - p.phi(k) * p.phi(k));
    double prev = p.mu_g(k) + stat_sd * norm(eng);
    for (Index i = 0; i < n; ++i) {
      if (i > 0) prev = p.mu_g(k) + p.phi(k) * (prev - p.mu_g(k)) + p.sigma_eps(k) * norm(eng);
      g(i, k) = prev;
    }
  }
  return g;
}

inline Matrix simulate_log_ar1(Index n, const LogAR1Params& p, const RngSpec& rng) {
  return simulate_log_ar1_latent(n, p, rng).array().exp().matrix();
}

inline Vector population_mean_log_ar1(const LogAR1Params& p) {
  p.validate();
  Vector mu(p.phi.size());
  for (Index k = 0; k < mu.size(); ++k)
    mu(k) = std::exp(p.mu_g(k) + 0.5 * p.sigma_eps(k) * p.sigma_eps(k) / (1.0 - p.phi(k) * p.phi(k)));
  return mu;
}

inline LogAR1Params draw_ar1_params(Index K, const RngSpec& rng) {
  require(K >= 1, "draw_ar1_params: K must be positive");
  Engine eng = make_engine(rng);
  boost::random::uniform_real_distribution<double> loc(-0.5, 0.5);
  boost::random::uniform_real_distribution<double> scale(0.15, 0.5);
  LogAR1Params p{Vector::Constant(K, 0.8), Vector(K), Vector(K)};
  for (Index k = 0; k < K; ++k) {
    p.mu_g(k) = loc(eng);
    p.sigma_eps(k) = scale(eng);
  }
  return p;
}

/// Rows iid; per source the component is drawn first, then the log-normal.
inline Matrix simulate_lognormal_mixture(Index n, const LognormalMixtureParams& p, const RngSpec& rng) {
  p.validate();
  const Index K = Index(p.sources.size());
  Matrix w(n, K);
  for (Index k = 0; k < K; ++k) {
    const auto& comps = p.sources[size_t(k)];
    Engine eng = make_engine(rng.substream(std::uint64_t(k)));
    boost::random::uniform_real_distribution<double> unif(0.0, 1.0);
    boost::random::normal_distribution<double> norm(0.0, 1.0);
    for (Index i = 0; i < n; ++i) {
      const double u = unif(eng);
      size_t c = 0;
      double acc = comps[0].weight;
      while (u >= acc && c + 1 < comps.size()) acc += comps[++c].weight;
      w(i, k) = std::exp(comps[c].mu + comps[c].sigma * norm(eng));
    }
  }
  return w;
}

inline Vector population_mean_mixture(const LognormalMixtureParams& p) {
  p.validate();
  Vector mu = Vector::Zero(Index(p.sources.size()));
  for (size_t k = 0; k < p.sources.size(); ++k)
    for (const auto& c : p.sources[k]) mu(Index(k)) += c.weight * std::exp(c.mu + 0.5 * c.sigma * c.sigma);
  return mu;
}

inline LognormalMixtureParams draw_mixture_params(Index K, const RngSpec& rng) {
  require(K >= 1, "draw_mixture_params: K must be positive");
  Engine eng = make_engine(rng);
  boost::random::poisson_distribution<int, double> pois(3.0);
  boost::random::exponential_distribution<double> expo(1.0);
  boost::random::uniform_real_distribution<double> loc(-1.0, 1.0);
  boost::random::uniform_real_distribution<double> scale(0.1, 1.0);
  LognormalMixtureParams p;
  for (Index k = 0; k < K; ++k) {
    const int count = pois(eng) + 1;
    std::vector<MixtureComponent> comps(static_cast<size_t>(count));
    double total = 0.0;
    // Dirichlet(1, ..., 1) as normalized unit exponentials.
    for (auto& c : comps) total += (c.weight = expo(eng));
    for (auto& c : comps) {
      c.weight /= total;
      c.mu = loc(eng);
      c.sigma = scale(eng);
    }
    // Absorb rounding so the weights sum to one to the last bit we can.
    double s = 0.0;
    for (size_t c = 0; c + 1 < comps.size(); ++c) s += comps[c].weight;
    comps.back().weight = 1.0 - s;
    p.sources.push_back(std::move(comps));
  }
  return p;
}

/// phi_kj = mu_k H_kj / sum_l mu_l H_lj.
inline AttributionMatrix true_phi(const Vector& mu, const Matrix& h) {
  require(mu.size() == h.rows(), "true_phi: mean length does not match profile rows");
  require((mu.array() >= 0).all() && (mu.array() > 0).any(), "true_phi: means must be non-negative");
  Matrix phi(h.rows(), h.cols());
  for (Index j = 0; j < h.cols(); ++j) {
    double denom = 0.0;
    for (Index l = 0; l < h.rows(); ++l) denom += mu(l) * h(l, j);
    if (!(denom > 0))
      throw Error(ErrorCode::ZeroDenominator, "true_phi: pollutant " + std::to_string(j) + " has no source");
    for (Index k = 0; k < h.rows(); ++k) phi(k, j) = mu(k) * h(k, j) / denom;
  }
  return make_attribution(std::move(phi));
}

struct GroundTruthOptions {
  Index n_candidates = 0;     // 0: max(100, 10 K)
  bool plant_corners = false; // append rows mu_k e_k to W
};

/// Y = W H for one replicate. rng.stream_id is the replicate's block base:
/// sources use base + k, the profile draw base + 0xFF00, parameters base + 0xFF01.
inline std::pair<ConcentrationMatrix, GroundTruth> make_ground_truth(Index n, Index J, Index K, Process process,
                                                                     const RngSpec& rng,
                                                                     const GroundTruthOptions& opts = {}) {
  require(n >= 1, "make_ground_truth: n must be positive");
  require(K >= 1 && K < J, "make_ground_truth: need 1 <= K < J");
  GroundTruth gt;
  const Index n_cand = opts.n_candidates > 0 ? opts.n_candidates : std::max<Index>(100, 10 * K);
  gt.H = generate_profile_matrix(J, K, n_cand, rng.substream(kProfileStream));
  if (process == Process::AR1) {
    auto p = draw_ar1_params(K, rng.substream(kParamStream));
    gt.W = simulate_log_ar1(n, p, rng);
    gt.mu = population_mean_log_ar1(p);
    gt.params = std::move(p);
  } else {
    auto p = draw_mixture_params(K, rng.substream(kParamStream));
    gt.W = simulate_lognormal_mixture(n, p, rng);
    gt.mu = population_mean_mixture(p);
    gt.params = std::move(p);
  }
  if (opts.plant_corners) {
    Matrix w(n + K, K);
    w.topRows(n) = gt.W;
    w.bottomRows(K) = gt.mu.asDiagonal();
    gt.W = std::move(w);
  }
  gt.phi_true = true_phi(gt.mu, gt.H);
  Matrix y = gt.W * gt.H;
  return {ConcentrationMatrix::from(std::move(y)), std::move(gt)};
}

/// Attribution fractions of the realized sample: true_phi at the column
/// means of W.
inline AttributionMatrix sample_phi(const GroundTruth& gt) {
  return true_phi(gt.W.colwise().mean().transpose(), gt.H);
}

}  // namespace apportion::synth
