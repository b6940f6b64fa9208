#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "csflock/engine.hpp"
#include "csflock/models.hpp"

using namespace csflock;

namespace {

// Pairwise alignment sum (1/N) sum_j psi_ij (v_j - v_i), written independently of the library.
std::vector<double> pairwise_drift(const std::vector<double> &x, const std::vector<double> &v, double lambda,
                                   double beta) {
  const std::size_t n = v.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double s = x[i] - x[j];
      out[i] += lambda / static_cast<double>(n) * std::pow(1.0 + s * s, -beta) * (v[j] - v[i]);
    }
  return out;
}

} // namespace

TEST(SplitInitialData, SignsAndBalance) {
  const auto v = split_initial_data(20);
  EXPECT_EQ(std::accumulate(v.begin(), v.end(), 0.0), 0.0);
  for (std::size_t i = 0; i < 20; ++i)
    EXPECT_EQ(v[i], i < 10 ? -1.0 : 1.0);
  EXPECT_THROW(split_initial_data(3), ValidationError);
}

TEST(ModelSpec, Validation) {
  ModelSpec m;
  EXPECT_NO_THROW(m.validate());
  m.lambda = 0.0;
  EXPECT_THROW(m.validate(), ValidationError);
  m.lambda = 1.0;
  m.beta = -1.0;
  EXPECT_THROW(m.validate(), ValidationError);
  m.beta = 0.0;
  m.variant = ModelVariant::CSFixed;
  EXPECT_THROW(m.validate(), ValidationError);
  m.n_agents = 2;
  m.sigma = {0.0, 0.0};
  m.initial_v = {-1.0, 1.0};
  EXPECT_NO_THROW(m.validate());
  m.variant = ModelVariant::CSFull;
  EXPECT_THROW(m.validate(), ValidationError);
  m.initial_x = {0.0, 0.0};
  EXPECT_NO_THROW(m.validate());
}

TEST(DgbmRhs, Examples) {
  EXPECT_EQ(dgbm_rhs(0.0, 1.0, 0.5), std::make_pair(0.0, 0.0));
  EXPECT_EQ(dgbm_rhs(2.0, 1.0, 0.5), std::make_pair(-2.0, 1.0));
}

TEST(CsFixedRhs, ConsensusIsInvariant) {
  const auto lap = build_laplacian(RateMatrix::complete(5));
  const std::vector<double> v(5, 3.25), sig(5, 0.7);
  const auto r = cs_fixed_rhs(v, lap, 1.0, sig);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(r.drift[i], 0.0);
    EXPECT_EQ(r.diffusion[i], 0.0);
  }
}

TEST(CsFixedRhs, TwoAgentExample) {
  const auto lap = build_laplacian(RateMatrix::complete(2));
  const std::vector<double> v{-1.0, 1.0}, sig{0.0, 0.0};
  const auto r = cs_fixed_rhs(v, lap, 1.0, sig);
  // brute force: A v = (1*-1 + -1*1, -1*-1 + 1*1) = (-2, 2)
  const double av0 = lap(0, 0) * v[0] + lap(0, 1) * v[1];
  const double av1 = lap(1, 0) * v[0] + lap(1, 1) * v[1];
  EXPECT_EQ(r.drift[0], -0.5 * av0);
  EXPECT_EQ(r.drift[1], -0.5 * av1);
  EXPECT_EQ(r.drift[0], 1.0);
  EXPECT_EQ(r.drift[1], -1.0);
}

TEST(CsFixedRhs, DriftSumsToZero) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 8;
    std::vector<double> psi(n * n, 1.0), v(n), sig(n, 0.4);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        psi[i * n + j] = psi[j * n + i] = u(rng);
    for (auto &x : v)
      x = g(rng);
    const auto r = cs_fixed_rhs(v, build_laplacian(RateMatrix(n, psi)), 1.3, sig);
    EXPECT_NEAR(std::accumulate(r.drift.begin(), r.drift.end(), 0.0), 0.0, 1e-12);
  }
}

TEST(CsFixedSystem, FastPathMatchesGeneralLaplacian) {
  // The complete unit graph takes the O(N) path; a rate matrix with one entry
  // just below one takes the dense path. Compare against the dense product.
  const std::size_t n = 6;
  const auto lap = build_laplacian(RateMatrix::complete(n));
  ASSERT_TRUE(lap.is_complete_unit());
  const std::vector<double> sig(n, 0.3), v{0.1, -2.0, 0.7, 1.5, -0.3, 0.0};
  CsFixedSystem sys(lap, 1.0, sig, v);
  std::vector<double> drift(n), diff(n);
  sys.evaluate(v, v, drift, diff);
  const auto ref = cs_fixed_rhs(v, lap, 1.0, sig);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(drift[i], ref.drift[i], 1e-14);
    EXPECT_NEAR(diff[i], ref.diffusion[i], 1e-14);
  }
}

TEST(CsFullRhs, FlockedStateIsInvariant) {
  const std::vector<double> x{0.0, 1.0, -3.0}, v(3, 0.4), sig(3, 1.0);
  const auto r = cs_full_rhs(x, v, v, 1.0, sig, 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r.v_drift[i], 0.0);
    EXPECT_EQ(r.v_diffusion[i], 0.0);
    EXPECT_EQ(r.x_drift[i], 0.4);
  }
}

TEST(CsFullRhs, BetaZeroReducesToFixedModel) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  const std::size_t n = 7;
  std::vector<double> x(n), v(n), sig(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = 5.0 * g(rng);
    v[i] = g(rng);
    sig[i] = std::abs(g(rng));
  }
  const auto full = cs_full_rhs(x, v, v, 1.7, sig, 0.0);
  const auto fixed = cs_fixed_rhs(v, build_laplacian(RateMatrix::complete(n)), 1.7, sig);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(full.v_drift[i], fixed.drift[i], 1e-13);
    EXPECT_NEAR(full.v_diffusion[i], fixed.diffusion[i], 1e-13);
  }
}

TEST(CsFullRhs, TwoAgentExample) {
  const std::vector<double> x{0.0, 0.0}, v{-1.0, 1.0}, sig{0.0, 0.0};
  const auto r = cs_full_rhs(x, v, v, 1.0, sig, 1.0);
  const auto ref = pairwise_drift(x, v, 1.0, 1.0);
  EXPECT_EQ(r.v_drift[0], 1.0);
  EXPECT_EQ(r.v_drift[1], -1.0);
  EXPECT_NEAR(r.v_drift[0], ref[0], 1e-15);
  EXPECT_NEAR(r.v_drift[1], ref[1], 1e-15);
}

TEST(CsFullRhs, MatchesPairwiseOracle) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 9;
    std::vector<double> x(n), v(n), sig(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = 3.0 * g(rng);
      v[i] = g(rng);
    }
    const double beta = 0.1 * trial;
    const auto r = cs_full_rhs(x, v, v, 1.0, sig, beta);
    const auto ref = pairwise_drift(x, v, 1.0, beta);
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_NEAR(r.v_drift[i], ref[i], 1e-12);
  }
}

TEST(CsFullRhs, PermutationAndTranslationInvariance) {
  const std::vector<double> x{0.3, -1.2, 2.0, 0.9}, v{1.0, -0.5, 0.2, 0.8}, sig(4, 0.0);
  const auto base = cs_full_rhs(x, v, v, 1.0, sig, 0.8);
  std::vector<double> xs(x), vs(v);
  for (auto &e : xs)
    e += 11.0;
  for (auto &e : vs)
    e += 2.5;
  const auto shifted = cs_full_rhs(xs, vs, vs, 1.0, sig, 0.8);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(shifted.v_drift[i], base.v_drift[i], 1e-13);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<double> xp(4), vp(4);
  for (std::size_t i = 0; i < 4; ++i) {
    xp[i] = x[perm[i]];
    vp[i] = v[perm[i]];
  }
  const auto permuted = cs_full_rhs(xp, vp, vp, 1.0, sig, 0.8);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(permuted.v_drift[i], base.v_drift[perm[i]], 1e-13);
}

TEST(CsFullSystem, PositionsIntegrateCurrentVelocity) {
  CsFullSystem sys(1.0, {0.0, 0.0}, 1.0, {0.0, 0.0}, {-1.0, 1.0});
  const auto tr = simulate_path(sys, IntegrationGrid::make(1e-3, 1.0, 0.5), SeedMaterial{1, 0, 0, 0});
  for (std::size_t k = 0; k + 1 < tr.rows(); ++k) {
    const auto a = tr.row(k), b = tr.row(k + 1);
    EXPECT_NEAR(b[0], a[0] + 1e-3 * a[2], 1e-15);
    EXPECT_NEAR(b[1], a[1] + 1e-3 * a[3], 1e-15);
  }
}

TEST(CsFullSystem, EvaluateMatchesRhs) {
  const std::vector<double> x{0.0, 0.5, -1.0}, v{1.0, -1.0, 0.3}, sig{0.2, 0.4, 0.6};
  CsFullSystem sys(1.5, sig, 0.7, x, v);
  std::vector<double> state(x);
  state.insert(state.end(), v.begin(), v.end());
  std::vector<double> drift(6), diff(6);
  sys.evaluate(state, state, drift, diff);
  const auto ref = cs_full_rhs(x, v, v, 1.5, sig, 0.7);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(drift[i], v[i]);
    EXPECT_EQ(diff[i], 0.0);
    EXPECT_NEAR(drift[3 + i], ref.v_drift[i], 1e-14);
    EXPECT_NEAR(diff[3 + i], ref.v_diffusion[i], 1e-14);
  }
}

TEST(CsFullSystem, RateTimingSwitch) {
  // Delayed and current positions differ, so the two timings give different drifts.
  const std::vector<double> sig{0.0, 0.0};
  CsFullSystem delayed_sys(1.0, sig, 1.0, {0.0, 0.0}, {-1.0, 1.0}, 1, RateTiming::Delayed);
  CsFullSystem current_sys(1.0, sig, 1.0, {0.0, 0.0}, {-1.0, 1.0}, 1, RateTiming::Current);
  const std::vector<double> cur{-2.0, 2.0, -1.0, 1.0}, del{0.0, 0.0, -1.0, 1.0};
  std::vector<double> d1(4), d2(4), g(4);
  delayed_sys.evaluate(cur, del, d1, g);
  current_sys.evaluate(cur, del, d2, g);
  EXPECT_EQ(d1[2], 1.0);
  EXPECT_NEAR(d2[2], 1.0 / 17.0, 1e-15);
}

TEST(MakeSystem, DispatchesOnVariant) {
  ModelSpec m;
  EXPECT_TRUE(std::holds_alternative<DgbmSystem>(make_system(m)));
  m.variant = ModelVariant::CSFixed;
  m.n_agents = 2;
  m.sigma = {0.1, 0.1};
  m.initial_v = {-1.0, 1.0};
  EXPECT_TRUE(std::holds_alternative<CsFixedSystem>(make_system(m)));
  m.variant = ModelVariant::CSFull;
  m.initial_x = {0.0, 0.0};
  EXPECT_TRUE(std::holds_alternative<CsFullSystem>(make_system(m)));
}
