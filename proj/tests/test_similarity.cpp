#include "kslab/atlas.hpp"
#include "kslab/similarity.hpp"
#include "kslab/synthesize.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

using namespace kslab;

namespace {

std::vector<sim::RescaledState> rescale_all(const pde::Trajectory& traj, const pde::RadialGrid& g, double T,
                                            double Y_max = 20, int cells = 400) {
  std::vector<sim::RescaledState> out;
  for (std::size_t k = 0; k < traj.frames.size(); ++k)
    out.push_back(sim::rescale_frame(traj.frames[k], g, T, Y_max, cells, long(k)));
  return out;
}

sim::RescaledState injected(int n, const profiles::ProfileCurve& c, double Y_max, int cells) {
  sim::RescaledState st;
  st.n = n;
  st.y = sim::similarity_grid(Y_max, cells);
  for (double y : st.y) st.phi.push_back(c.psi(y));
  st.origin_value = st.phi[0];
  return st;
}

double step_change(const sim::RescaledState& st, double ds) {
  const auto next = sim::step_rescaled(st, ds);
  double d = 0;
  for (std::size_t i = 0; i < st.y.size(); ++i) d = std::max(d, std::abs(next.phi[i] - st.phi[i]));
  return d / ds;
}

struct GaussianRun {
  pde::RadialGrid grid;
  pde::Trajectory traj;
  pde::BlowupEstimate est;
};

const GaussianRun& gaussian_run() {
  static const GaussianRun run = [] {
    GaussianRun r;
    pde::SolverConfig c;
    c.n = 3;
    c.h0 = 1e-8;
    c.growth = 0.01;
    c.cfl_factor = 0.01;
    c.m_stop_factor = 1e9;
    c.save_every = 5;
    r.grid = pde::make_grid(3, 1.0, c.h0, c.growth);
    std::vector<double> u0(r.grid.size());
    for (std::size_t i = 0; i < u0.size(); ++i) u0[i] = 100 * std::exp(-r.grid.r[i] * r.grid.r[i] / 0.25);
    std::tie(r.traj, r.est) = pde::run_to_blowup(pde::build_mass_from_u0(u0, r.grid), r.grid, c);
    return r;
  }();
  return run;
}

}  // namespace

TEST(Rescale, FlatSolutionIsConstant) {
  const auto g = pde::make_grid(3, 1.0, 1e-4, 0.05);
  const auto traj = synth::flat(g, 1.0, 0.5, 1e-4, 20);
  for (const auto& st : rescale_all(traj, g, 1.0))
    for (double v : st.phi) EXPECT_NEAR(v, 1.0 / 3.0, 1e-13);
}

TEST(Rescale, Psi0FrameGivesPsi0) {
  const auto g = pde::make_grid(3, 1.0, 1e-5, 0.01);
  const auto traj = synth::self_similar(profiles::ProfileCurve::psi0(3), g, 1.0, 0.01, 1e-4, 5);
  for (const auto& st : rescale_all(traj, g, 1.0, 10.0))
    for (std::size_t i = 0; i < st.y.size(); ++i) EXPECT_NEAR(st.phi[i], profiles::eval_Psi0(3, st.y[i]), 1e-5);
}

TEST(Rescale, BlowupTimeOffsetShiftsOrigin) {
  const auto g = pde::make_grid(3, 1.0, 1e-4, 0.05);
  const auto traj = synth::flat(g, 1.0, 0.5, 1e-2, 10);
  const double T_off = 1.01;
  for (const auto& f : traj.frames) {
    const auto st = sim::rescale_frame(f, g, T_off, 5.0);
    EXPECT_NEAR(st.origin_value, (T_off - f.t) / (3.0 * (1.0 - f.t)), 1e-13);
  }
}

TEST(Rescale, RejectsFramesPastT) {
  const auto g = pde::make_grid(3, 1.0, 1e-3, 0.05);
  pde::MassState f;
  f.t = 2;
  f.w.assign(g.size(), 1.0);
  EXPECT_THROW(sim::rescale_frame(f, g, 1.0, 10.0), InvalidInput);
  EXPECT_THROW(sim::similarity_grid(10.0, 2), InvalidInput);
}

TEST(StepRescaled, ConstantProfileIsFixed) {
  const auto st = injected(3, profiles::ProfileCurve::constant(3), 20, 400);
  EXPECT_LT(step_change(st, 0.05), 1e-12);
}

TEST(StepRescaled, ZeroStaysZero) {
  sim::RescaledState st;
  st.y = sim::similarity_grid(20, 100);
  st.phi.assign(st.y.size(), 0.0);
  const auto next = sim::step_rescaled(st, 0.1);
  for (double v : next.phi) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(sim::step_rescaled(st, 0.0), InvalidInput);
}

TEST(StepRescaled, Psi0FixedToDiscretizationOrder) {
  const auto c = profiles::ProfileCurve::psi0(3);
  const double r1 = step_change(injected(3, c, 20, 200), 0.01);
  const double r2 = step_change(injected(3, c, 20, 400), 0.01);
  EXPECT_LT(r1, 0.2);
  EXPECT_GT(r1 / r2, 3.0);
}

TEST(StepRescaled, AtlasProfilesAreFixedPoints) {
  std::ifstream is(KSLAB_PRESETS_DIR "/atlas-3to9.txt");
  ASSERT_TRUE(is);
  const auto entries = atlas::load_entries(atlas::read(is), 3);
  ASSERT_GE(entries.size(), 3u);
  for (const auto& e : entries) {
    const auto coarse = injected(3, e.curve, 20, 200), fine = injected(3, e.curve, 20, 400);
    const double r1 = sim::steady_residual(coarse, 10), r2 = sim::steady_residual(fine, 10);
    if (e.record.constant) {
      EXPECT_LT(r2, 1e-12);
      continue;
    }
    // Halving the cells cuts the residual by about four: it is discretization error.
    EXPECT_GT(r1 / r2, 3.0) << to_double(e.record.alpha);
    EXPECT_LT(r2, 10 * (r1 - r2) / 3) << to_double(e.record.alpha);
  }
}

TEST(DetectSteady, FlatHistoryMatchesConstant) {
  const auto g = pde::make_grid(3, 1.0, 1e-4, 0.05);
  const auto traj = synth::flat(g, 1.0, 0.5, 1e-4, 30);
  const std::vector<sim::AtlasEntry> atlas{{1.0 / 3.0, profiles::ProfileCurve::constant(3)},
                                           {2.0, profiles::ProfileCurve::psi0(3)}};
  const auto v = sim::detect_steady(rescale_all(traj, g, 1.0), atlas);
  EXPECT_TRUE(v.converged);
  EXPECT_DOUBLE_EQ(v.matched_alpha, 1.0 / 3.0);
  EXPECT_EQ(v.all_errors.size(), 2u);
}

TEST(DetectSteady, Psi0HistoryMatchesPsi0) {
  const auto g = pde::make_grid(3, 30.0, 1e-6, 0.01, true);
  const auto traj = synth::self_similar(profiles::ProfileCurve::psi0(3), g, 1.0, 0.5, 1e-4, 30);
  const std::vector<sim::AtlasEntry> atlas{{1.0 / 3.0, profiles::ProfileCurve::constant(3)},
                                           {2.0, profiles::ProfileCurve::psi0(3)}};
  const auto v = sim::detect_steady(rescale_all(traj, g, 1.0), atlas);
  EXPECT_TRUE(v.converged);
  EXPECT_DOUBLE_EQ(v.matched_alpha, 2.0);
}

TEST(DetectSteady, NeedsEnoughHistory) {
  const auto g = pde::make_grid(3, 1.0, 1e-4, 0.05);
  const std::vector<sim::AtlasEntry> atlas{{1.0 / 3.0, profiles::ProfileCurve::constant(3)}};
  EXPECT_THROW(sim::detect_steady(rescale_all(synth::flat(g, 1.0, 0.5, 0.1, 5), g, 1.0), atlas), InvalidInput);
  EXPECT_THROW(sim::detect_steady(rescale_all(synth::flat(g, 1.0, 0.5, 0.1, 20), g, 1.0), atlas), InvalidInput);
}

TEST(DetectSteady, GaussianRunMatchesNonconstantProfile) {
  const auto& run = gaussian_run();
  ASSERT_EQ(run.est.outcome, pde::RunOutcome::Blowup);
  const double T = run.est.T_est;
  std::vector<sim::RescaledState> hist;
  const double s_last = -std::log(T - run.traj.frames.back().t);
  for (std::size_t k = 0; k < run.traj.frames.size(); ++k) {
    const double tau = T - run.traj.frames[k].t;
    if (-std::log(tau) >= s_last - 4) hist.push_back(sim::rescale_frame(run.traj.frames[k], run.grid, T, 20));
  }
  const std::vector<sim::AtlasEntry> atlas{{1.0 / 3.0, profiles::ProfileCurve::constant(3)},
                                           {2.0, profiles::ProfileCurve::psi0(3)}};
  const auto v = sim::detect_steady(hist, atlas);
  EXPECT_DOUBLE_EQ(v.matched_alpha, 2.0);
  EXPECT_GT(v.all_errors[0], 10 * v.all_errors[1]);
}

TEST(Invariants, RescaledRunIsBoundedAndDecreasing) {
  const auto& run = gaussian_run();
  const double T = run.est.T_est;
  double M = 0;
  for (const auto& h : run.traj.history) M = std::max(M, (T - h.t) * 3 * h.m);
  for (std::size_t k = 0; k < run.traj.frames.size(); k += 10) {
    const auto st = sim::rescale_frame(run.traj.frames[k], run.grid, T, 20);
    for (std::size_t i = 1; i < st.phi.size(); ++i) {
      EXPECT_LE(st.phi[i], st.phi[i - 1] + 1e-12);
      EXPECT_LE(st.phi[i], M / 3 + 1e-9);
      EXPECT_GE(st.phi[i], 0.0);
    }
  }
}

TEST(Invariants, DirectRescaledEvolutionAgreesWithRadialRoute) {
  const auto& run = gaussian_run();
  const double T = run.est.T_est;
  const auto& frames = run.traj.frames;
  const double s_last = -std::log(T - frames.back().t);
  std::size_t k0 = 0;
  while (-std::log(T - frames[k0].t) < s_last - 2) ++k0;
  auto st = sim::rescale_frame(frames[k0], run.grid, T, 20, 800);
  const auto target = sim::rescale_frame(frames.back(), run.grid, T, 20, 800);
  while (st.s < target.s - 1e-12) st = sim::step_rescaled(st, std::min(0.005, target.s - st.s));
  double d = 0;
  for (std::size_t i = 0; i < st.y.size() && st.y[i] <= 5; ++i) d = std::max(d, std::abs(st.phi[i] - target.phi[i]));
  EXPECT_LT(d, 0.02 * target.origin_value);
}

TEST(TypeTwo, ExactRescaledW1HasZeroDistance) {
  const auto w1 = profiles::integrate_W1(3, 50, 1e-14);
  const auto g = pde::make_grid(3, 1.0, 1e-6, 0.01);
  const double m = 1e4;
  MonotoneInterpolant W(w1.r, w1.w1);
  pde::MassState f;
  for (double r : g.r) f.w.push_back(m * W(r * std::sqrt(m)));
  EXPECT_LT(sim::type_two_rescaling(f, g, w1), 1e-6);
}

TEST(TypeTwo, FlatSolutionDistanceIsOneMinusW1AtWindowEdge) {
  const auto w1 = profiles::integrate_W1(3, 50, 1e-14);
  const auto g = pde::make_grid(3, 1.0, 1e-6, 0.01);
  pde::MassState f;
  f.w.assign(g.size(), 1e4);
  std::size_t edge = 0;
  while (w1.r[edge + 1] <= 5.0) ++edge;
  EXPECT_NEAR(sim::type_two_rescaling(f, g, w1), 1.0 - w1.w1[edge], 1e-12);
}

TEST(TypeTwo, GaussianRunStaysAwayFromW1) {
  const auto& run = gaussian_run();
  const auto w1 = profiles::integrate_W1(3, 50, 1e-14);
  const auto& frames = run.traj.frames;
  const double first = sim::type_two_rescaling(frames[frames.size() - 20], run.grid, w1);
  EXPECT_GT(first, 0.01);
  for (std::size_t k = frames.size() - 20; k < frames.size(); ++k)
    EXPECT_GT(sim::type_two_rescaling(frames[k], run.grid, w1), 0.9 * first);
}
