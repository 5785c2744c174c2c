#include "kslab/asymptotics.hpp"
#include "kslab/synthesize.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace kslab;
using namespace kslab::asym;

namespace {

struct Synth {
  pde::RadialGrid grid;
  pde::Trajectory traj;
};

Synth u0_synth(double growth = 0.01) {
  Synth s;
  s.grid = pde::make_grid(3, 30.0, 1e-6, growth, true);
  s.traj = synth::self_similar(profiles::ProfileCurve::psi0(3), s.grid, 1.0, 0.5, 1e-8, 400);
  return s;
}

Synth flat_synth() {
  Synth s;
  s.grid = pde::make_grid(3, 1.0, 1e-4, 0.05);
  s.traj = synth::flat(s.grid, 1.0, 0.5, 1e-6, 200);
  return s;
}

// Time-independent field w = 2 / r^2 regularized inside r = r_c.
Synth frozen_chandrasekhar() {
  Synth s;
  s.grid = pde::make_grid(3, 1.0, 1e-6, 0.01);
  const double rc = 0.5e-6;
  pde::MassState f;
  for (double r : s.grid.r) f.w.push_back(r < rc ? 2.0 / (rc * rc) : 2.0 / (r * r));
  f.m = f.w[0];
  for (int k = 0; k < 5; ++k) {
    f.t = 0.5 + 0.1 * k;
    s.traj.frames.push_back(f);
    s.traj.history.push_back({f.t, f.m, 0.1, 0.0});
  }
  s.traj.config.n = 3;
  return s;
}

}  // namespace

TEST(TypeOne, FlatSolutionIsExactlyOne) {
  const auto s = flat_synth();
  const auto r = type_one_check(s.traj, 1.0);
  EXPECT_NEAR(r.M_fit, 1.0, 1e-9);
  EXPECT_NEAR(r.lower, 1.0, 1e-9);
  EXPECT_TRUE(r.type_one);
}

TEST(TypeOne, SelfSimilarSupIsU0AtOrigin) {
  const auto s = u0_synth();
  const auto r = type_one_check(s.traj, 1.0);
  // T - t is resolved to ~1e-16 / 1e-8 at the last frame.
  EXPECT_NEAR(r.M_fit, profiles::eval_U0(3, 0), 1e-6);
  EXPECT_NEAR(r.lower, 6.0, 1e-6);
}

TEST(Macroscopic, SelfSimilarDataHasVanishingEps) {
  const auto coarse = u0_synth(0.02), fine = u0_synth(0.01);
  const auto c = profiles::ProfileCurve::psi0(3);
  const auto mc = macroscopic_ratio(coarse.traj, coarse.grid, c, 1.0, 4e-3, 1e-5);
  const auto mf = macroscopic_ratio(fine.traj, fine.grid, c, 1.0, 4e-3, 1e-5);
  EXPECT_GT(mf.points, 0u);
  EXPECT_LT(mf.eps_sup[0], 1e-3);
  // The residual is discretization error.
  EXPECT_GT(mc.eps_sup[0] / mf.eps_sup[0], 3.0);
}

TEST(Macroscopic, FlatAgainstU0IsBoundedAway) {
  const auto s = flat_synth();
  const auto m = macroscopic_ratio(s.traj, s.grid, profiles::ProfileCurve::psi0(3), 1.0, 0.01, 1e-3);
  // eps = 1 / U0(y) - 1, which is -5/6 at the origin.
  EXPECT_NEAR(m.eps_sup[2], 5.0 / 6.0, 1e-6);
}

TEST(TwoSided, FlatSolutionInUnitBracket) {
  const auto s = flat_synth();
  const double rho = std::sqrt(1e-6);
  const auto r = two_sided_fit(s.traj, s.grid, 1.0, rho);
  // (T - t) / (T - t + x^2) lies in [1/2, 1] for |x| <= sqrt(T - t).
  EXPECT_NEAR(1.0 / r.C1_fit, 1.0, 1e-9);
  EXPECT_GE(1.0 / r.C2_fit, 0.5 - 1e-9);
}

TEST(TwoSided, SelfSimilarBracketsClosedForm) {
  const auto s = u0_synth();
  const double rho = 4e-3;
  const auto r = two_sided_fit(s.traj, s.grid, 1.0, rho);
  const auto [lo, hi] = closed_form::extrema([](double y) { return closed_form::two_sided_weight(3, y); },
                                             rho / std::sqrt(1e-8));
  EXPECT_LE(r.C1_fit, r.C2_fit);
  EXPECT_NEAR(r.C1_fit / lo, 1.0, 1e-2);
  EXPECT_NEAR(r.C2_fit / hi, 1.0, 1e-3);
}

TEST(FinalProfile, SelfSimilarTailIsFour) {
  const auto s = u0_synth();
  const auto f = final_profile_fit(s.traj, s.grid, 1.0, 0.01);
  ASSERT_TRUE(f.found);
  EXPECT_NEAR(f.L_fit, 4.0, 0.08);
  EXPECT_LE(f.L_lo, f.L_fit);
  EXPECT_GE(f.L_hi, f.L_fit);
}

TEST(FinalProfile, ChandrasekharFieldGivesExactConstant) {
  const auto s = frozen_chandrasekhar();
  const auto f = final_profile_fit(s.traj, s.grid, 10.0, 0.01);
  ASSERT_TRUE(f.found);
  // Only the recovery of u from w on the innermost decade (h ~ r) is inexact.
  EXPECT_NEAR(f.L_fit, 2.0 * (3 - 2), 0.04);
  EXPECT_NEAR(f.L_hi, 2.0, 0.01);
}

TEST(UtBound, FlatSolutionNotApplicable) {
  const auto s = flat_synth();
  EXPECT_FALSE(ut_bound_check(s.traj, s.grid, 1.0, 0.01, 0.5).applicable);
}

TEST(UtBound, SelfSimilarMatchesSymbolicOracle) {
  const auto s = u0_synth();
  const double eta = 4e-3;
  const auto r = ut_bound_check(s.traj, s.grid, 1.0, eta, 1.0 - 1e-3);
  ASSERT_TRUE(r.applicable);
  EXPECT_TRUE(r.stable);
  const auto [lo, hi] = closed_form::extrema([](double y) { return closed_form::x4_ut(3, y); }, eta / std::sqrt(1e-8));
  EXPECT_NEAR(r.sup / hi, 1.0, 0.05);
}

TEST(Gradient, FlatIsZeroAndSelfSimilarMatchesClosedForm) {
  const auto f = flat_synth();
  EXPECT_LT(gradient_bound_check(f.traj, f.grid), 1e-10);
  const auto s = u0_synth();
  EXPECT_NEAR(gradient_bound_check(s.traj, s.grid) / closed_form::gradient_ratio(3), 1.0, 1e-3);
}

TEST(LowerBound, SelfSimilarMatchesMinimum) {
  const auto s = u0_synth();
  const double rho = 4e-3;
  const auto [lo, hi] = closed_form::extrema([](double y) { return closed_form::lower_bound_weight(3, y); },
                                             rho / std::sqrt(1e-8));
  EXPECT_NEAR(lower_bound_monotone_check(s.traj, s.grid, 1.0, rho), lo, 1e-6);
}

TEST(LowerBound, ChandrasekharRegime) {
  const auto s = frozen_chandrasekhar();
  // Away from the core, u (1/u(0) + x^2) -> 2(n-2).
  const auto& f = s.traj.frames.back();
  const auto u = pde::recover_u(f, s.grid);
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    const double r = s.grid.r[i];
    if (r < 1e-2 || r > 0.5) continue;
    EXPECT_NEAR(u[i] * (1.0 / u[0] + r * r), 2.0, 1e-3);
  }
}

TEST(ClosedForm, X4UtMatchesDifferentiation) {
  // d/dt [(T-t)^{-1} U0(x / sqrt(T-t))] at T - t = 1 is U0 + (y/2) U0'.
  for (double y = 0.1; y < 30; y *= 1.3) {
    const double h = 1e-5 * y;
    const double dU = (profiles::eval_U0(3, y + h) - profiles::eval_U0(3, y - h)) / (2 * h);
    const double ut = profiles::eval_U0(3, y) + 0.5 * y * dU;
    EXPECT_NEAR(closed_form::x4_ut(3, y), std::pow(y, 4) * std::abs(ut), 1e-6 * std::max(1.0, closed_form::x4_ut(3, y)));
  }
}

TEST(Report, ChecksArePure) {
  const auto s = u0_synth();
  const auto a = two_sided_fit(s.traj, s.grid, 1.0, 4e-3);
  const auto b = two_sided_fit(s.traj, s.grid, 1.0, 4e-3);
  EXPECT_EQ(a.C1_fit, b.C1_fit);
  EXPECT_EQ(a.C2_fit, b.C2_fit);
}
