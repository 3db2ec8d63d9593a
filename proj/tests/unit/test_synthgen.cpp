#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "apportion/synthgen.hpp"
#include "../support/oracles.hpp"

using namespace apportion;
using namespace apportion::synth;

namespace {

double lag1_autocorrelation(const Vector& g) {
  const double m = g.mean();
  double num = 0, den = 0;
  for (Index i = 0; i < g.size(); ++i) {
    den += (g(i) - m) * (g(i) - m);
    if (i > 0) num += (g(i) - m) * (g(i - 1) - m);
  }
  return num / den;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// One-sample Kolmogorov-Smirnov statistic against N(0, 1).
double ks_standard_normal(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = double(x.size());
  double d = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf(x[i]);
    d = std::max({d, double(i + 1) / n - f, f - double(i) / n});
  }
  return d;
}

LogAR1Params ar1(double phi, double mu, double sigma, Index K = 1) {
  return {Vector::Constant(K, phi), Vector::Constant(K, mu), Vector::Constant(K, sigma)};
}

}  // namespace

TEST(ProfileMatrix, TwoPollutantsGiveTheExtremePair) {
  const RngSpec rng{3, 0};
  const Matrix h = generate_profile_matrix(2, 2, 40, rng);
  // Reproduce the candidate draw and compare with its min/max on the 1-simplex.
  Engine eng = make_engine(rng);
  boost::random::exponential_distribution<double> expo(1.0);
  Matrix cand(40, 2);
  for (Index i = 0; i < 40; ++i) {
    for (Index j = 0; j < 2; ++j) cand(i, j) = expo(eng);
    cand.row(i) /= cand.row(i).sum();
  }
  const double lo = cand.col(0).minCoeff(), hi = cand.col(0).maxCoeff();
  EXPECT_DOUBLE_EQ(std::min(h(0, 0), h(1, 0)), lo);
  EXPECT_DOUBLE_EQ(std::max(h(0, 0), h(1, 0)), hi);
}

TEST(ProfileMatrix, FullRankRowsOnTheSimplex) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Matrix h = generate_profile_matrix(8, 3, 500, {seed, 0});
    EXPECT_EQ(oracle::rank(h), 3);
    EXPECT_GT(h.minCoeff(), 0.0);
    EXPECT_LE((h.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  }
}

TEST(ProfileMatrix, SelectionMaximizesMinimumDistanceAmongVertices) {
  // With the minimum candidate count every hull-vertex triple is checked by brute force.
  const RngSpec rng{8, 0};
  const Matrix h = generate_profile_matrix(4, 3, 30, rng);
  Engine eng = make_engine(rng);
  boost::random::exponential_distribution<double> expo(1.0);
  Matrix cand(30, 4);
  for (Index i = 0; i < 30; ++i) {
    for (Index j = 0; j < 4; ++j) cand(i, j) = expo(eng);
    cand.row(i) /= cand.row(i).sum();
  }
  auto min_dist = [](const Matrix& m) {
    double d = 1e9;
    for (Index a = 0; a < m.rows(); ++a)
      for (Index b = a + 1; b < m.rows(); ++b) d = std::min(d, (m.row(a) - m.row(b)).norm());
    return d;
  };
  const auto verts = oracle::extreme_points(cand.leftCols(3));
  double best = 0;
  for (size_t a = 0; a < verts.size(); ++a)
    for (size_t b = a + 1; b < verts.size(); ++b)
      for (size_t c = b + 1; c < verts.size(); ++c) {
        Matrix t(3, 4);
        t << cand.row(verts[a]), cand.row(verts[b]), cand.row(verts[c]);
        best = std::max(best, min_dist(t));
      }
  EXPECT_DOUBLE_EQ(min_dist(h), best);
}

TEST(ProfileMatrix, DeterministicAndValidated) {
  EXPECT_EQ(generate_profile_matrix(8, 3, 100, {5, 7}), generate_profile_matrix(8, 3, 100, {5, 7}));
  EXPECT_NE(generate_profile_matrix(8, 3, 100, {5, 7}), generate_profile_matrix(8, 3, 100, {5, 8}));
  EXPECT_THROW(generate_profile_matrix(8, 3, 29, {5, 7}), Error);
  EXPECT_THROW(generate_profile_matrix(3, 4, 100, {5, 7}), Error);
}

TEST(ProfileMatrix, WorksAboveTheQuickhullDimensionCap) {
  const Matrix h = generate_profile_matrix(10, 5, 100, {2, 0});
  EXPECT_EQ(oracle::rank(h), 5);
}

TEST(LogAR1, ZeroNoiseIsConstant) {
  const Matrix w = simulate_log_ar1(50, ar1(0.8, 0.3, 0.0), {1, 0});
  EXPECT_TRUE((w.array() == std::exp(0.3)).all());
}

TEST(LogAR1, LagOneAutocorrelation) {
  const Vector white = simulate_log_ar1_latent(100000, ar1(0.0, 0.0, 0.3), {2, 0}).col(0);
  EXPECT_LT(std::abs(lag1_autocorrelation(white)), 0.05);
  const Vector g = simulate_log_ar1_latent(100000, ar1(0.8, 0.1, 0.3), {2, 0}).col(0);
  EXPECT_NEAR(lag1_autocorrelation(g), 0.8, 0.02);
}

TEST(LogAR1, StationaryMarginalAtFixedTimes) {
  // Across independent replicates, g_i is N(mu, sigma^2 / (1 - phi^2)) at every i.
  const auto p = ar1(0.8, 0.2, 0.4);
  const double sd = 0.4 / std::sqrt(1.0 - 0.64);
  const int reps = 20000;
  std::vector<double> first(reps), later(reps);
  for (int r = 0; r < reps; ++r) {
    const Matrix g = simulate_log_ar1_latent(40, p, {11, std::uint64_t(r) * RngSpec::replicate_stride});
    first[size_t(r)] = (g(0, 0) - 0.2) / sd;
    later[size_t(r)] = (g(39, 0) - 0.2) / sd;
  }
  // alpha = 0.001 critical value.
  const double critical = 1.95 / std::sqrt(double(reps));
  EXPECT_LT(ks_standard_normal(first), critical);
  EXPECT_LT(ks_standard_normal(later), critical);
}

TEST(LogAR1, PopulationMean) {
  EXPECT_DOUBLE_EQ(population_mean_log_ar1(ar1(0.8, 0.0, 0.0))(0), 1.0);
  EXPECT_NEAR(population_mean_log_ar1(ar1(0.8, 0.0, 0.6))(0), std::exp(0.5), 1e-15);
}

TEST(LogAR1, SampleMeanNearClosedForm) {
  const auto p = draw_ar1_params(3, {4, 0xFF01});
  const Matrix w = simulate_log_ar1(500000, p, {4, 0});
  const Vector mu = population_mean_log_ar1(p);
  for (Index k = 0; k < 3; ++k) EXPECT_LE(std::abs(w.col(k).mean() - mu(k)) / mu(k), 0.02);
}

TEST(AR1Params, RangesAndReproducibility) {
  double mean_mu = 0;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    const auto p = draw_ar1_params(3, {7, std::uint64_t(t)});
    EXPECT_TRUE((p.phi.array() == 0.8).all());
    EXPECT_TRUE((p.sigma_eps.array() >= 0.15).all() && (p.sigma_eps.array() <= 0.5).all());
    EXPECT_TRUE((p.mu_g.array().abs() <= 0.5).all());
    mean_mu += p.mu_g(0);
  }
  EXPECT_NEAR(mean_mu / draws, 0.0, 0.02);
  const auto a = draw_ar1_params(3, {7, 1}), b = draw_ar1_params(3, {7, 1});
  EXPECT_EQ(a.mu_g, b.mu_g);
  EXPECT_EQ(a.sigma_eps, b.sigma_eps);
}

TEST(Mixture, DegenerateComponentsAreConstant) {
  LognormalMixtureParams p{{{{1.0, 0.4, 0.0}}}};
  EXPECT_TRUE((simulate_lognormal_mixture(30, p, {1, 0}).array() == std::exp(0.4)).all());
  EXPECT_DOUBLE_EQ(population_mean_mixture({{{{1.0, 0.0, 0.0}}}})(0), 1.0);
  EXPECT_DOUBLE_EQ(population_mean_mixture({{{{0.5, 0.0, 0.0}, {0.5, 0.0, 0.0}}}})(0), 1.0);
}

TEST(Mixture, PopulationMeanMatchesQuadrature) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto p = draw_mixture_params(2, {seed, 0});
    const Vector mu = population_mean_mixture(p);
    for (size_t k = 0; k < p.sources.size(); ++k) {
      // Trapezoid rule for E[exp(T)] with T the Gaussian mixture.
      const double lo = -15, hi = 15;
      const int steps = 300000;
      const double h = (hi - lo) / steps;
      double sum = 0;
      for (int s = 0; s <= steps; ++s) {
        const double t = lo + h * s;
        double dens = 0;
        for (const auto& c : p.sources[k])
          dens += c.weight * std::exp(-0.5 * std::pow((t - c.mu) / c.sigma, 2)) / (c.sigma * std::sqrt(2 * M_PI));
        sum += (s == 0 || s == steps ? 0.5 : 1.0) * std::exp(t) * dens;
      }
      EXPECT_NEAR(sum * h, mu(Index(k)), 1e-6 * mu(Index(k)));
    }
  }
}

TEST(Mixture, SampleMeanNearClosedFormAndDeterministic) {
  const auto p = draw_mixture_params(5, {6, 0xFF01});
  const Matrix w = simulate_lognormal_mixture(500000, p, {6, 0});
  const Vector mu = population_mean_mixture(p);
  for (Index k = 0; k < 5; ++k) EXPECT_LE(std::abs(w.col(k).mean() - mu(k)) / mu(k), 0.02);
  EXPECT_EQ(simulate_lognormal_mixture(100, p, {6, 0}), w.topRows(100));
  EXPECT_GT(w.minCoeff(), 0.0);
}

TEST(MixtureParams, ComponentCountsAndWeights) {
  double mean_c = 0;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    const auto p = draw_mixture_params(1, {9, std::uint64_t(t)});
    const auto& comps = p.sources[0];
    ASSERT_GE(comps.size(), 1u);
    double total = 0;
    for (const auto& c : comps) {
      total += c.weight;
      EXPECT_GE(c.weight, 0.0);
      EXPECT_TRUE(c.mu >= -1 && c.mu <= 1);
      EXPECT_TRUE(c.sigma >= 0.1 && c.sigma <= 1);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    mean_c += double(comps.size());
  }
  EXPECT_NEAR(mean_c / draws, 4.0, 0.1);
}

TEST(TruePhi, SpecExamplesAndRescaling) {
  Matrix h1(1, 3);
  h1 << 0.3, 0.3, 0.4;
  EXPECT_EQ(true_phi(Vector::Constant(1, 3.0), h1).values, Matrix::Ones(1, 3));
  EXPECT_EQ(true_phi(Vector::Ones(2), Matrix::Identity(2, 2)).values, Matrix::Identity(2, 2));
  const Matrix h = generate_profile_matrix(6, 3, 60, {1, 0});
  Vector mu(3), d(3);
  mu << 1.5, 0.7, 2.2;
  d << 0.01, 3.0, 250.0;
  const Matrix a = true_phi(mu, h).values;
  const Matrix b = true_phi(mu.cwiseQuotient(d), d.asDiagonal() * h).values;
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((a - oracle::phi(mu, h)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(true_phi(Vector::Ones(2), Matrix::Zero(2, 2)), Error);
}

TEST(GroundTruth, ConfigurationsAndDeterminism) {
  auto [y, gt] = make_ground_truth(200, 8, 3, Process::AR1, {3, 0});
  EXPECT_EQ(y.values.rows(), 200);
  EXPECT_EQ(y.values.cols(), 8);
  EXPECT_EQ(gt.W.cols(), 3);
  EXPECT_TRUE(std::holds_alternative<LogAR1Params>(gt.params));
  EXPECT_LE((y.values - gt.W * gt.H).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((gt.phi_true.values - oracle::phi(gt.mu, gt.H)).cwiseAbs().maxCoeff(), 1e-12);

  auto [y2, gt2] = make_ground_truth(200, 10, 5, Process::Mixture, {3, 0});
  EXPECT_EQ(gt2.H.rows(), 5);
  EXPECT_EQ(gt2.H.cols(), 10);
  EXPECT_TRUE(std::holds_alternative<LognormalMixtureParams>(gt2.params));
  EXPECT_TRUE(y2.values.allFinite());
  EXPECT_GE(y2.values.minCoeff(), 0.0);

  auto [y3, gt3] = make_ground_truth(200, 8, 3, Process::AR1, {3, 0});
  EXPECT_EQ(y.values, y3.values);
  EXPECT_EQ(gt.H, gt3.H);
  EXPECT_EQ(gt.mu, gt3.mu);
}

TEST(GroundTruth, PlantedCorners) {
  GroundTruthOptions opts;
  opts.plant_corners = true;
  auto [y, gt] = make_ground_truth(100, 8, 3, Process::AR1, {3, 0}, opts);
  ASSERT_EQ(gt.W.rows(), 103);
  EXPECT_EQ(Matrix(gt.W.bottomRows(3)), Matrix(gt.mu.asDiagonal()));
  const Matrix sp = sample_phi(gt).values;
  EXPECT_LE((sp - oracle::phi(gt.W.colwise().mean().transpose(), gt.H)).cwiseAbs().maxCoeff(), 1e-15);
}
