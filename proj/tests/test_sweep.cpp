#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "csflock/sweep.hpp"

using namespace csflock;

namespace {

SweepSpec dgbm_spec() {
  SweepSpec s;
  s.axis1 = {SweepParam::Sigma, 0.0, 2.0, 2};
  s.axis2 = {SweepParam::Tau, 0.0, 2.0, 2};
  s.q_paths = 2;
  s.dt = 1e-2;
  s.t_end = 5.0;
  return s;
}

} // namespace

TEST(AxisSpec, LinspaceIncludesEndpoints) {
  const AxisSpec a{SweepParam::Tau, 0.0, 2.0, 20};
  const auto v = a.values();
  ASSERT_EQ(v.size(), 20u);
  EXPECT_EQ(v.front(), 0.0);
  EXPECT_EQ(v.back(), 2.0);
  EXPECT_NEAR(v[1], 2.0 / 19.0, 1e-15);
}

TEST(SweepSpec, Validation) {
  auto s = dgbm_spec();
  EXPECT_NO_THROW(s.validate());
  s.axis2.param = SweepParam::Sigma;
  EXPECT_THROW(s.validate(), ValidationError);
  s = dgbm_spec();
  s.axis1.count = 1;
  EXPECT_THROW(s.validate(), ValidationError);
  s = dgbm_spec();
  s.axis2.param = SweepParam::Beta;
  EXPECT_THROW(s.validate(), ValidationError);
  s = dgbm_spec();
  s.theta = 0.0;
  EXPECT_THROW(s.validate(), ValidationError);
}

TEST(SweepSpec, TauValuesSnappedToGrid) {
  SweepSpec s = dgbm_spec();
  s.dt = 1e-3;
  s.axis2.count = 20;
  for (double tau : s.axis_values(s.axis2))
    EXPECT_NO_THROW(IntegrationGrid::make(s.dt, s.t_end, tau));
}

TEST(RunSweep, RerunIsBitIdentical) {
  const auto s = dgbm_spec();
  const auto a = run_sweep(s), b = run_sweep(s);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.diverged, b.diverged);
  auto s2 = s;
  s2.workers = 4;
  EXPECT_EQ(run_sweep(s2).values, a.values);
}

TEST(RunSweep, NoiseFreeCellsUseOnePath) {
  const auto g = run_sweep(dgbm_spec());
  EXPECT_EQ(g.paths[0], 1u);
  EXPECT_EQ(g.paths[1], 1u);
  EXPECT_EQ(g.paths[2], 2u);
}

TEST(RunSweep, CellMatchesDirectEnsemble) {
  auto s = dgbm_spec();
  const auto g = run_sweep(s);
  // cell (1, 1): sigma = 2, tau = 2, seed cell index 3
  EnsembleOptions opt;
  opt.record_moments = false;
  opt.cell = 3;
  const auto ens = run_ensemble(DgbmSystem(1.0, 2.0, 1.0), IntegrationGrid::make(s.dt, s.t_end, 2.0), 2, 1, opt);
  EXPECT_EQ(g.at(1, 1), flocking_indicator(ens).value);
}

TEST(RunSweep, DgbmDeterministicCells) {
  SweepSpec s;
  s.axis1 = {SweepParam::Sigma, 0.0, 0.1, 2};
  s.axis2 = {SweepParam::Tau, 0.1, 2.0, 2};
  s.q_paths = 4;
  const auto g = run_sweep(s);
  EXPECT_LT(g.at(0, 0), 1e-2);
  EXPECT_GT(g.at(0, 1), 1e-2);
}

TEST(FlockingRegion, MaskAndBoundary) {
  PhaseGrid g;
  g.axis1_values = {0.0, 1.0};
  g.axis2_values = {0.0, 0.5, 1.0};
  g.values = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  g.diverged.assign(6, 0);
  auto r = flocking_region(g);
  for (bool b : r.mask)
    EXPECT_TRUE(b);
  EXPECT_EQ(*r.boundary[0], 1.0);
  g.values = {1e-3, 1e-3, 1.0, 1e-3, 1.0, kInf};
  r = flocking_region(g);
  EXPECT_EQ(*r.boundary[0], 0.5);
  EXPECT_EQ(*r.boundary[1], 0.0);
  g.values = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  r = flocking_region(g);
  EXPECT_FALSE(r.boundary[0]);
}
