#ifndef KSLAB_RADIAL_PDE_HPP
#define KSLAB_RADIAL_PDE_HPP

// Averaged-mass formulation of the radial Keller-Segel system:
//
//   w_t = w_rr + (n+1)/r w_r + (n w + r w_r) w,   u = n w + r w_r,
//
// i.e. a semilinear heat equation in n+2 dimensions. Finite volumes on the
// measure r^{n+1} dr make the origin a regular cell. Diffusion and reaction
// are both taken implicitly with the reaction coefficient u lagged, which
// reproduces the spatially homogeneous flow m' = n m^2 exactly.

#include "kslab/core.hpp"
#include "kslab/zero_number.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace kslab::pde {

enum class Mode { Ball, TruncatedWholeSpace };

inline std::string to_string(Mode m) { return m == Mode::Ball ? "Ball" : "TruncatedWholeSpace"; }

struct RadialGrid {
  int n = 3;
  double R = 1;
  bool truncated = false;
  std::vector<double> r;
  /// Control volumes and face areas of the (n+2)-dimensional measure.
  std::vector<double> volume;
  std::vector<double> face_area;  // face i sits between nodes i and i+1
  std::vector<double> face_r;

  std::size_t size() const { return r.size(); }
};

/// Graded mesh: spacing h(r) = max(h0, growth * r), adjusted to end exactly at R.
inline RadialGrid make_grid(int n, double R, double h0, double growth, bool truncated = false) {
  if (n < 3) throw InvalidInput("grid dimension must be >= 3");
  if (!(R > 0) || !(h0 > 0) || h0 >= R) throw InvalidInput("grid needs 0 < h0 < R");
  if (!(growth >= 0 && growth <= 0.2)) throw InvalidInput("grid growth must lie in [0, 0.2]");
  RadialGrid g;
  g.n = n;
  g.R = R;
  g.truncated = truncated;
  std::vector<double> r{0.0};
  while (true) {
    const double h = std::max(h0, growth * r.back());
    if (r.back() + 1.5 * h >= R) break;
    r.push_back(r.back() + h);
  }
  // Stretch the tail so the last node lands on R without a sliver cell.
  const double scale = (R - r.front()) / (r.back() + std::max(h0, growth * r.back()) - r.front());
  for (double& x : r) x *= scale;
  r.push_back(R);
  g.r = std::move(r);

  const std::size_t M = g.r.size();
  const double d = n + 2;
  g.face_r.resize(M - 1);
  g.face_area.resize(M - 1);
  for (std::size_t i = 0; i + 1 < M; ++i) {
    g.face_r[i] = 0.5 * (g.r[i] + g.r[i + 1]);
    g.face_area[i] = std::pow(g.face_r[i], n + 1);
  }
  g.volume.resize(M);
  for (std::size_t i = 0; i < M; ++i) {
    const double lo = i == 0 ? 0.0 : g.face_r[i - 1];
    const double hi = i + 1 < M ? g.face_r[i] : g.r[i];
    g.volume[i] = (std::pow(hi, d) - std::pow(lo, d)) / d;
  }
  return g;
}

struct MassState {
  double t = 0;
  std::vector<double> w;
  double mu = 0;
  double m = 0;
};

struct SolverConfig {
  int n = 3;
  double R = 1;
  double h0 = 1e-3;
  double growth = 0.05;
  /// Upper bound on the time step.
  double dt_init = 1e-2;
  double cfl_factor = 0.02;
  /// Absolute stop threshold; 0 selects m_stop_factor * m(0).
  double m_stop = 0;
  double m_stop_factor = 1e6;
  int save_every = 10;
  double tol = 1e-9;
  Mode mode = Mode::Ball;
  std::size_t max_steps = 2000000;
  /// Horizon after which a run without blow-up is declared NoBlowup.
  double t_max = 1e3;
  /// NoBlowup once m has not grown for this long.
  double no_growth_horizon = 1.0;
  /// Test hook: drop the Laplacian (spatially homogeneous ODE at each node).
  bool diffusion = true;

  void validate() const {
    if (n < 3) throw InvalidInput("n must be >= 3");
    if (!(R > 0)) throw InvalidInput("R must be positive");
    if (!(cfl_factor > 0 && cfl_factor <= 1)) throw InvalidInput("cfl_factor must lie in (0, 1]");
    if (!(dt_init > 0)) throw InvalidInput("dt_init must be positive");
    if (save_every < 1) throw InvalidInput("save_every must be >= 1");
    if (!(tol > 0)) throw InvalidInput("tol must be positive");
    if (m_stop < 0 || !(m_stop_factor > 1)) throw InvalidInput("m_stop must exceed the initial center value");
  }
};

struct StepRecord {
  double t, m, dt, mass;
};

struct Trajectory {
  std::vector<MassState> frames;
  /// Every accepted step, including the initial state.
  std::vector<StepRecord> history;
  SolverConfig config;
  std::vector<std::string> events;
  /// Largest relative change of w at R/2 (whole-space truncation monitor).
  double boundary_influence = 0;
};

enum class RunOutcome { Blowup, NoBlowup, MaxSteps };

inline std::string to_string(RunOutcome o) {
  switch (o) {
    case RunOutcome::Blowup: return "Blowup";
    case RunOutcome::NoBlowup: return "NoBlowup";
    case RunOutcome::MaxSteps: return "MaxSteps";
  }
  return "?";
}

struct BlowupEstimate {
  RunOutcome outcome = RunOutcome::NoBlowup;
  double T_est = 0;
  double T_err = 0;
  /// 1/m ~ a (T - t) over the fit window.
  double slope_a = 0;
  double fit_rms = 0;
  std::size_t fit_points = 0;
  /// a within [1/M, n], M = sup (T - t) u(0, t) over the window.
  bool slope_consistent = false;
};

// ---------------------------------------------------------------------------

/// w(r_i) = r_i^{-n} int_0^{r_i} u0(s) s^{n-1} ds, exact for piecewise linear u0.
inline MassState build_mass_from_u0(std::span<const double> u0, const RadialGrid& grid) {
  const std::size_t M = grid.size();
  if (u0.size() != M) throw InvalidInput("u0 sample count does not match the grid");
  for (double v : u0)
    if (!(v >= 0)) throw InvalidInput("u0 must be nonnegative");
  const int n = grid.n;
  MassState s;
  s.w.assign(M, 0.0);
  s.w[0] = u0[0] / n;
  double acc = 0;
  for (std::size_t i = 1; i < M; ++i) {
    const double a = grid.r[i - 1], b = grid.r[i];
    // u = u_a + k (s - a); integrate exactly against s^{n-1}.
    const double k = (u0[i] - u0[i - 1]) / (b - a);
    const double c0 = u0[i - 1] - k * a;
    const double pn_b = std::pow(b, n), pn_a = std::pow(a, n);
    acc += c0 * (pn_b - pn_a) / n + k * (pn_b * b - pn_a * a) / (n + 1);
    s.w[i] = acc / pn_b;
  }
  s.m = s.w[0];
  s.mu = s.w[M - 1];
  return s;
}

/// u = n w + r w_r with second order differences; u(0) = n w(0).
inline std::vector<double> recover_u(const MassState& state, const RadialGrid& grid) {
  const auto dw = nonuniform_derivative(grid.r, state.w);
  std::vector<double> u(state.w.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = grid.n * state.w[i] + grid.r[i] * dw[i];
  u[0] = grid.n * state.w[0];
  return u;
}

/// Mass integral int_0^R u s^{n-1} ds by the trapezoid rule on the grid.
inline double mass_integral(std::span<const double> u, const RadialGrid& grid) {
  double s = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double a = grid.r[i - 1], b = grid.r[i];
    s += 0.5 * (u[i - 1] * std::pow(a, grid.n - 1) + u[i] * std::pow(b, grid.n - 1)) * (b - a);
  }
  return s;
}

/// Time step rule: dt = cfl / max(n m, max u), capped by dt_init.
inline double choose_dt(const MassState& state, std::span<const double> u, const SolverConfig& cfg) {
  double rate = cfg.n * state.m;
  for (double v : u) rate = std::max(rate, v);
  if (rate <= 0) return cfg.dt_init;
  return std::min(cfg.dt_init, cfg.cfl_factor / rate);
}

/// One step of (I - dt L - dt diag(u^k)) w^{k+1} = w^k.
inline MassState step(const MassState& state, const RadialGrid& grid, const SolverConfig& cfg, double dt) {
  const std::size_t M = grid.size();
  if (state.w.size() != M) throw InvalidInput("state does not match the grid");
  const auto u = recover_u(state, grid);
  std::vector<double> lo(M, 0.0), di(M, 1.0), up(M, 0.0), rhs(state.w);
  for (std::size_t i = 0; i < M; ++i) di[i] -= dt * u[i];
  if (cfg.diffusion) {
    for (std::size_t i = 0; i + 1 < M; ++i) {
      const double k = grid.face_area[i] / (grid.r[i + 1] - grid.r[i]);
      di[i] += dt * k / grid.volume[i];
      up[i] -= dt * k / grid.volume[i];
      if (i + 1 < M - 1) {
        di[i + 1] += dt * k / grid.volume[i + 1];
        lo[i + 1] -= dt * k / grid.volume[i + 1];
      }
    }
    // Dirichlet at R.
    lo[M - 1] = 0;
    di[M - 1] = 1;
    rhs[M - 1] = state.mu;
  }
  if (!solve_tridiagonal(lo, di, up, rhs)) throw SolverDiverged("tridiagonal solve failed", state.t);
  MassState next;
  next.t = state.t + dt;
  next.mu = state.mu;
  next.w = std::move(rhs);
  for (double v : next.w)
    if (!std::isfinite(v)) throw SolverDiverged("non-finite value in w", state.t);
  next.m = next.w[0];
  if (!cfg.diffusion) next.mu = next.w[M - 1];
  return next;
}

/// Exact flow of m' = n m^2 over dt (infinite past the blow-up time).
inline double homogeneous_flow(int n, double m, double dt) {
  const double d = 1.0 - dt * n * m;
  return d > 0 ? m / d : std::numeric_limits<double>::infinity();
}

namespace detail {

inline BlowupEstimate fit_blowup_time(const std::vector<StepRecord>& hist, int n) {
  BlowupEstimate est;
  const double m_last = hist.back().m;
  std::vector<double> t, inv;
  for (const auto& h : hist) {
    if (h.m >= 0.1 * m_last) {
      t.push_back(h.t);
      inv.push_back(1.0 / h.m);
    }
  }
  if (t.size() < 3) throw NumericalInconsistency("blow-up fit window holds fewer than 3 steps");
  const auto fit = fit_line(t, inv);
  est.slope_a = -fit.slope;
  // T = mean(t) + mean(1/m) / a; centered estimates are uncorrelated.
  double mt = 0, mi = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i];
    mi += inv[i];
  }
  mt /= double(t.size());
  mi /= double(t.size());
  est.T_est = mt + mi / est.slope_a;
  est.fit_rms = fit.rms_residual;
  est.fit_points = t.size();
  // Error bar: disagreement with the fit over the later half of the window,
  // plus the linearized standard error.
  const std::size_t half = t.size() / 2;
  double T_half = est.T_est;
  if (t.size() - half >= 3) {
    const auto f2 = fit_line(std::span<const double>(t).subspan(half), std::span<const double>(inv).subspan(half));
    T_half = f2.intercept / -f2.slope;
  }
  const double se = std::hypot(fit.rms_residual / std::sqrt(double(t.size())) / est.slope_a,
                               mi * fit.slope_stderr / (est.slope_a * est.slope_a));
  est.T_err = std::abs(T_half - est.T_est) + se;
  // M = sup (T - t) u(0, t) on the window.
  double M = 0;
  for (std::size_t i = 0; i < t.size(); ++i) M = std::max(M, (est.T_est - t[i]) * n / inv[i]);
  est.slope_consistent = M > 0 && est.slope_a >= 1.0 / M * (1 - 1e-6) && est.slope_a <= n * (1 + 1e-6);
  return est;
}

}  // namespace detail

/// Steps until m >= m_stop (Blowup), t > t_max or no growth of m over
/// no_growth_horizon (NoBlowup), or max_steps.
inline std::pair<Trajectory, BlowupEstimate> run_to_blowup(const MassState& initial, const RadialGrid& grid,
                                                           const SolverConfig& cfg) {
  cfg.validate();
  if (grid.n != cfg.n) throw InvalidInput("grid and config disagree on n");
  Trajectory traj;
  traj.config = cfg;
  MassState state = initial;
  state.m = state.w[0];
  const double m_stop = cfg.m_stop > 0 ? cfg.m_stop : cfg.m_stop_factor * state.m;
  if (!(m_stop > state.m)) throw InvalidInput("m_stop must exceed the initial center value");

  std::size_t monitor = 0;
  if (cfg.mode == Mode::TruncatedWholeSpace) {
    while (monitor + 1 < grid.size() && grid.r[monitor] < 0.5 * grid.R) ++monitor;
  }
  const double w_monitor0 = state.w[monitor];

  auto u = recover_u(state, grid);
  traj.frames.push_back(state);
  traj.history.push_back({state.t, state.m, 0.0, mass_integral(u, grid)});
  double next_decade = state.m > 0 ? state.m * 10 : std::numeric_limits<double>::infinity();

  BlowupEstimate est;
  est.outcome = RunOutcome::MaxSteps;
  // Extended accumulator: T - t reaches ~1e-14 T in deep runs.
  long double clock = state.t;
  double prev_m = state.m, t_last_growth = state.t;
  std::size_t k = 0;
  for (; k < cfg.max_steps; ++k) {
    const double dt = choose_dt(state, u, cfg);
    MassState next = step(state, grid, cfg, dt);
    clock += dt;
    next.t = double(clock);
    u = recover_u(next, grid);
    state = std::move(next);
    traj.history.push_back({state.t, state.m, dt, mass_integral(u, grid)});
    if (cfg.mode == Mode::TruncatedWholeSpace && w_monitor0 > 0) {
      traj.boundary_influence =
          std::max(traj.boundary_influence, std::abs(state.w[monitor] - w_monitor0) / w_monitor0);
    }
    if ((k + 1) % std::size_t(cfg.save_every) == 0) traj.frames.push_back(state);
    while (state.m >= next_decade) {
      traj.events.push_back("m crossed " + std::to_string(next_decade) + " at t=" + std::to_string(state.t));
      next_decade *= 10;
    }
    if (state.m >= m_stop) {
      est.outcome = RunOutcome::Blowup;
      break;
    }
    // Growth means a relative rate above 1e-3; slow creep toward a steady state does not count.
    if (state.m - prev_m > 1e-3 * prev_m * dt) t_last_growth = state.t;
    prev_m = state.m;
    if (state.t > cfg.t_max || state.t - t_last_growth > cfg.no_growth_horizon) {
      est.outcome = RunOutcome::NoBlowup;
      break;
    }
  }
  if (traj.frames.back().t != state.t) traj.frames.push_back(state);
  if (est.outcome == RunOutcome::Blowup) {
    const auto fit = detail::fit_blowup_time(traj.history, cfg.n);
    est.T_est = fit.T_est;
    est.T_err = fit.T_err;
    est.slope_a = fit.slope_a;
    est.fit_rms = fit.fit_rms;
    est.fit_points = fit.fit_points;
    est.slope_consistent = fit.slope_consistent;
  }
  traj.events.push_back("stopped: " + to_string(est.outcome) + " after " + std::to_string(traj.history.size() - 1) +
                        " steps");
  return {std::move(traj), est};
}

// ---------------------------------------------------------------------------
// Diagnostics

struct ConservationReport {
  /// Per frame: relative drift of the mass integral against frame 0.
  std::vector<double> mass_drift;
  /// Per frame: largest positive part of discrete u_r and w_r.
  std::vector<double> max_pos_ur, max_pos_wr;
  /// Largest drift over frames with m <= 1e3 m(0).
  double drift_until_1e3 = 0;
  bool monotone = true;
};

inline ConservationReport check_conservation_and_monotonicity(const Trajectory& traj, const RadialGrid& grid,
                                                             double mono_tol = 1e-8) {
  ConservationReport rep;
  if (traj.frames.empty()) return rep;
  const auto u0 = recover_u(traj.frames.front(), grid);
  const double mass0 = mass_integral(u0, grid);
  const double m0 = traj.frames.front().m;
  for (const auto& f : traj.frames) {
    const auto u = recover_u(f, grid);
    const double mass = mass_integral(u, grid);
    const double drift = mass0 != 0 ? std::abs(mass - mass0) / std::abs(mass0) : std::abs(mass);
    rep.mass_drift.push_back(drift);
    if (f.m <= 1e3 * m0) rep.drift_until_1e3 = std::max(rep.drift_until_1e3, drift);
    const auto ur = nonuniform_derivative(grid.r, u);
    const auto wr = nonuniform_derivative(grid.r, f.w);
    double pu = 0, pw = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      pu = std::max(pu, ur[i] / std::max(1.0, u[0]));
      pw = std::max(pw, wr[i] / std::max(1.0, f.w[0]));
    }
    rep.max_pos_ur.push_back(pu);
    rep.max_pos_wr.push_back(pw);
    if (pw > mono_tol) rep.monotone = false;
  }
  return rep;
}

struct I2Result {
  bool pass = true;
  double worst = 0;
  double worst_r = 0;
};

/// r^{n-1} u0'(r) + u0(r) int_0^r u0 s^{n-1} ds >= 0 on the grid. The
/// derivative is differenced when not supplied.
inline I2Result check_i2(std::span<const double> u0, const RadialGrid& grid,
                         std::optional<std::vector<double>> du0 = std::nullopt) {
  const auto d = du0 ? *du0 : nonuniform_derivative(grid.r, u0);
  const MassState mass = build_mass_from_u0(u0, grid);
  I2Result res;
  res.worst = std::numeric_limits<double>::infinity();
  double scale = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double r = grid.r[i];
    const double rn1 = std::pow(r, grid.n - 1);
    const double integral = mass.w[i] * rn1 * r;
    const double v = rn1 * d[i] + u0[i] * integral;
    scale = std::max(scale, std::abs(rn1 * d[i]) + std::abs(u0[i] * integral));
    if (v < res.worst) {
      res.worst = v;
      res.worst_r = r;
    }
  }
  res.pass = res.worst >= -1e-10 * std::max(scale, 1e-300);
  return res;
}

struct WtDiagnostics {
  std::vector<double> t_mid;
  /// Finite-difference w_t(0, t) between consecutive frames.
  std::vector<double> wt0;
  /// Per frame: zero number of w(., t) - 2/r^2 on [r1, R].
  std::vector<int> zero_count;
  std::vector<double> frame_t;
};

inline WtDiagnostics track_wt_diagnostics(const Trajectory& traj, const RadialGrid& grid, double r1) {
  if (traj.frames.size() < 3) throw InvalidInput("track_wt_diagnostics needs >= 3 frames");
  WtDiagnostics d;
  for (std::size_t k = 1; k < traj.frames.size(); ++k) {
    const auto& a = traj.frames[k - 1];
    const auto& b = traj.frames[k];
    d.t_mid.push_back(0.5 * (a.t + b.t));
    d.wt0.push_back((b.w[0] - a.w[0]) / (b.t - a.t));
  }
  std::vector<double> ws(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    ws[i] = grid.r[i] > 0 ? 2.0 / (grid.r[i] * grid.r[i]) : std::numeric_limits<double>::quiet_NaN();
  for (const auto& f : traj.frames) {
    d.frame_t.push_back(f.t);
    d.zero_count.push_back(
        count_intersections(grid.r, f.w, ws, Interval{r1, grid.R}, 0.0));
  }
  return d;
}

}  // namespace kslab::pde

#endif  // KSLAB_RADIAL_PDE_HPP
