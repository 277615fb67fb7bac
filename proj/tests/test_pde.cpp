#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gen.hpp"
#include "homeostat/experiments.hpp"
#include "homeostat/ode.hpp"
#include "homeostat/pde.hpp"

using namespace homeostat;

namespace {

double mass(const std::vector<double>& v) { return compensated_sum(v); }

// Direct interval intersection |alpha C_k ∩ C_j| / (alpha dx) in units of dx.
std::vector<double> remap_oracle(std::size_t nx, std::size_t k, double alpha) {
  std::vector<double> out(nx, 0.0);
  const double lo = alpha * static_cast<double>(k), hi = alpha * static_cast<double>(k + 1);
  for (std::size_t j = 0; j < nx; ++j) {
    const double overlap = std::max(0.0, std::min(hi, j + 1.0) - std::max(lo, static_cast<double>(j)));
    out[j] = overlap / alpha;
  }
  return out;
}

ModelParams transport_only() {
  auto m = reference_params();
  m.lambda_p.baseline = 0.0;
  m.lambda_r.baseline = 0.0;
  m.delta = DeathProfile::uniform(0.0);
  return m;
}

}  // namespace

TEST(Remap, MassPreservedForFixedFractions) {
  gen::Source g(1);
  for (double alpha : {0.5, 0.3, 0.7}) {
    const auto in = g.density(800);
    const auto out = dilation_remap(in, alpha);
    EXPECT_LE(std::abs(mass(out) - mass(in)) / mass(in), 2.3e-16) << "alpha " << alpha;
  }
}

TEST(Remap, ZeroInZeroOut) {
  const std::vector<double> z(100, 0.0);
  for (double v : dilation_remap(z, 0.37)) EXPECT_EQ(v, 0.0);
}

TEST(Remap, SingleCellHalfFractionMatchesIntersection) {
  // alpha = 0.5 maps an even cell k onto the left half of target cell k/2.
  const std::size_t nx = 40, k = 12;
  std::vector<double> in(nx, 0.0);
  in[k] = 1.0;
  const auto out = dilation_remap(in, 0.5);
  const auto expect = remap_oracle(nx, k, 0.5);
  for (std::size_t j = 0; j < nx; ++j) EXPECT_DOUBLE_EQ(out[j], expect[j]) << j;
  EXPECT_DOUBLE_EQ(out[6], 1.0);
}

TEST(Remap, SingleCellSplitsByOverlapLength) {
  // 0.3 * [7, 8] = [2.1, 2.4]: one target; 0.3 * [3, 4] = [0.9, 1.2]: two.
  const std::size_t nx = 20;
  for (std::size_t k : {7u, 3u, 13u}) {
    std::vector<double> in(nx, 0.0);
    in[k] = 1.0;
    const auto out = dilation_remap(in, 0.3);
    const auto expect = remap_oracle(nx, k, 0.3);
    for (std::size_t j = 0; j < nx; ++j) EXPECT_NEAR(out[j], expect[j], 1e-15) << k << " " << j;
  }
  std::vector<double> in(nx, 0.0);
  in[3] = 1.0;
  const auto out = dilation_remap(in, 0.3);
  EXPECT_NEAR(out[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(out[1], 2.0 / 3.0, 1e-15);
}

TEST(Remap, FractionOutsideOpenIntervalRejected) {
  const std::vector<double> v(10, 1.0);
  EXPECT_THROW(dilation_remap(v, 0.0), DomainError);
  EXPECT_THROW(dilation_remap(v, 1.0), DomainError);
  EXPECT_THROW(dilation_remap(v, -0.2), DomainError);
}

TEST(Remap, PropertyConservationFiftyDensitiesFiftyFractions) {
  gen::Source g(20240917);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto in = g.density(g.index(10, 2000));
    for (int a = 0; a < 50; ++a) {
      const double alpha = g.uniform(1e-3, 1.0 - 1e-3);
      const auto out = dilation_remap(in, alpha);
      worst = std::max(worst, std::abs(mass(out) - mass(in)) / mass(in));
    }
  }
  EXPECT_LE(worst, 5e-16);
}

TEST(Birth, TotalMassIsTwiceDivisionFlux) {
  const auto s = gaussian_initial_state({10.0, 800});
  const auto m = reference_params();
  const auto b = birth_operators(s, m);
  const double dx = s.grid.dx();
  const double lp = m.lambda_p(s.wbar());
  const double total = (mass(b.b_p) + mass(b.b_w)) * dx;
  EXPECT_NEAR(total, 2.0 * lp * s.pbar(), 1e-14 * total);
  const double w = s.wbar();
  EXPECT_NEAR(mass(b.b_p) * dx, (2.0 * m.p1(w) + m.p3(w)) * lp * s.pbar(), 1e-14 * total);
  EXPECT_NEAR(mass(b.b_w) * dx, (2.0 * m.p2(w) + m.p3(w)) * lp * s.pbar(), 1e-14 * total);
}

TEST(Birth, PropertyMassIdentitiesRandomFractions) {
  gen::Source g(5);
  for (int i = 0; i < 50; ++i) {
    auto m = reference_params();
    const double a = g.uniform(0.05, 0.95), b = g.uniform(0.05, 0.95), c = g.uniform(0.05, 0.95);
    m.alpha = {a, 1.0 - a};
    m.beta = {b, 1.0 - b};
    m.gamma = {c, 1.0 - c};
    const auto p = g.density(400);
    const double w = g.log_uniform(0.1, 20.0);
    const auto bt = birth_operators_at(p, m, w);
    const double lhs = mass(bt.b_p) + mass(bt.b_w);
    const double rhs = 2.0 * m.lambda_p(w) * mass(p);
    EXPECT_NEAR(lhs, rhs, 1e-14 * rhs);
  }
}

TEST(Birth, ZeroStemDensityGivesNoBirths) {
  const std::vector<double> p(200, 0.0);
  const auto b = birth_operators_at(p, reference_params(), 3.0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    EXPECT_EQ(b.b_p[j], 0.0);
    EXPECT_EQ(b.b_w[j], 0.0);
  }
}

TEST(Birth, AsymmetricBranchIsolatedWhenSymmetricProbabilitiesVanish) {
  auto m = reference_params();
  m.p1.baseline = 0.0;
  m.p2.baseline = 0.0;
  m.gamma = {0.3, 0.7};
  gen::Source g(9);
  const auto p = g.density(300);
  const double w = 2.0;
  const auto b = birth_operators_at(p, m, w);
  const auto g1 = dilation_remap(p, 0.3), g2 = dilation_remap(p, 0.7);
  const double lp = m.lambda_p(w);
  for (std::size_t j = 0; j < p.size(); ++j) {
    EXPECT_DOUBLE_EQ(b.b_p[j], lp * g1[j]);
    EXPECT_DOUBLE_EQ(b.b_w[j], lp * g2[j]);
  }
}

TEST(Step, PureTransportConservesMassAwayFromBoundary) {
  const auto m = transport_only();
  auto s = gaussian_initial_state({20.0, 1600});
  const double before = s.pbar() + s.wbar();
  const double dt = stable_dt(s.grid, m);
  for (int n = 0; n < 10; ++n) s = step(std::move(s), m, dt);
  EXPECT_NEAR(s.pbar() + s.wbar(), before, 1e-15 * before);
}

TEST(Step, PureTransportLosesOnlyOutflow) {
  const auto m = transport_only();
  Grid1D g{1.0, 10};
  PdeState s{g, std::vector<double>(10, 0.0), std::vector<double>(10, 0.0), 0.0, 0.0};
  s.p[9] = 1.0;
  const double dt = stable_dt(g, m);
  const auto out = step(s, m, dt);
  // Outflow through x = xmax is v p_{nx-1} dt.
  EXPECT_NEAR(out.pbar(), g.dx() - dt, 1e-15);
}

TEST(Step, CflViolationIsConfigError) {
  const auto m = reference_params();
  const auto s = gaussian_initial_state({10.0, 100});
  EXPECT_THROW(step(s, m, 1.01 * stable_dt(s.grid, m)), ConfigError);
  EXPECT_THROW(step(s, m, 0.05, 1.5), ConfigError);
}

TEST(Step, TotalsFollowClosureToFirstOrder) {
  const auto m = reference_params();
  for (std::size_t nx : {400u, 800u, 1600u}) {
    const auto s = gaussian_initial_state({10.0, nx});
    const double dt = stable_dt(s.grid, m);
    const auto n = step(s, m, dt);
    const auto d = rhs_closure(m, {s.pbar(), s.wbar(), 0.0});
    const double ep = std::abs((n.pbar() - s.pbar()) / dt - d.dp);
    const double ew = std::abs((n.wbar() - s.wbar()) / dt - d.dw);
    // O(dt) + O(dx) with dt = 0.8 dx.
    EXPECT_LT(std::max(ep, ew), 2.0 * s.grid.dx()) << nx;
  }
}

TEST(Run, Nx800MatchesRefinedGridAtTableScale) {
  const auto m = reference_params();
  const auto rows = grid_convergence_study(m, 10.0, {800, 1600}, 5.0);
  ASSERT_EQ(rows.size(), 1u);
  // Halving dx roughly halves the 4.27e-4 gap between 400 and 800.
  EXPECT_LT(rows[0].err_p, 4.27e-4);
  EXPECT_GT(rows[0].err_p, 4.27e-4 / 6.0);
}

TEST(Run, UniformDeathEffectiveMortalityConstant) {
  const auto r = run(reference_params(), gaussian_initial_state({20.0, 800}), 5.0);
  for (double d : r.diagnostics.delta_eff) EXPECT_NEAR(d, 0.5, 0.5e-13);
}

TEST(Run, BalanceResidualsOrderOneThousandthAndDecreasing) {
  const auto m = reference_params();
  const auto coarse = run(m, gaussian_initial_state({20.0, 800}), 5.0);
  const auto fine = run(m, gaussian_initial_state({20.0, 1600}), 5.0);
  const auto& c = coarse.diagnostics;
  const auto& f = fine.diagnostics;
  EXPECT_LT(std::max({f.sup_r_p, f.sup_r_w, f.sup_r_m}), 1e-2);
  EXPECT_LT(f.sup_r_p, c.sup_r_p);
  EXPECT_LT(f.sup_r_w, c.sup_r_w);
  EXPECT_LT(f.sup_r_m, c.sup_r_m);
  EXPECT_LE(f.max_rm_disagreement, 1e-14);
}

TEST(Run, RampDeathBreaksClosure) {
  auto ramp = reference_params();
  ramp.delta = DeathProfile::linear_ramp(0.5, 20.0);
  const auto base = run(reference_params(), gaussian_initial_state({20.0, 1600}), 5.0);
  const auto r = run(ramp, gaussian_initial_state({20.0, 1600}), 5.0);
  const auto [lo, hi] = std::minmax_element(r.diagnostics.delta_eff.begin(), r.diagnostics.delta_eff.end());
  EXPECT_GT((*hi - *lo) / *lo, 0.01);
  EXPECT_EQ(r.diagnostics.delta_closure, 0.5);
  const double b = std::max(base.diagnostics.sup_r_w, base.diagnostics.sup_r_m);
  const double v = std::max(r.diagnostics.sup_r_w, r.diagnostics.sup_r_m);
  EXPECT_GE(v, 10.0 * b);
}

TEST(Run, PositivityAndMassDefect) {
  const auto r = run(reference_params(), gaussian_initial_state({10.0, 400}), 15.0);
  for (double v : r.final_state.p) EXPECT_GE(v, 0.0);
  for (double v : r.final_state.w) EXPECT_GE(v, 0.0);
  const double total = r.pbar.back() + r.wbar.back();
  for (double d : r.mass_defect) EXPECT_LE(d, 1e-12 * total);
}

TEST(Run, StepCountAndTimeStamps) {
  const auto m = reference_params();
  const Grid1D g{10.0, 100};
  const auto r = run(m, gaussian_initial_state(g), 1.0);
  const double dt = stable_dt(g, m);
  // floor(1/0.08) = 12 full steps plus a 0.04 remainder.
  ASSERT_EQ(r.t.size(), 14u);
  EXPECT_EQ(r.t[5], 5 * dt);
  EXPECT_EQ(r.t.back(), 1.0);
}

TEST(Run, SnapshotsAtRequestedTimes) {
  PdeRunSettings rs;
  rs.snapshot_times = {0.0, 0.5, 1.0};
  const auto r = run(reference_params(), gaussian_initial_state({10.0, 100}), 1.0, rs);
  ASSERT_EQ(r.snapshots.size(), 3u);
  EXPECT_EQ(r.snapshots[0].t, 0.0);
  EXPECT_EQ(r.snapshots[2].t, 1.0);
  rs.snapshot_times.assign(51, 0.5);
  EXPECT_THROW(run(reference_params(), gaussian_initial_state({10.0, 100}), 1.0, rs), ConfigError);
}

TEST(Grid, CellWidthConsistent) {
  const Grid1D g{20.0, 1600};
  EXPECT_NEAR(g.dx() * 1600, 20.0, 1e-12 * 20.0);
  EXPECT_DOUBLE_EQ(g.center(0), 0.5 * g.dx());
}
