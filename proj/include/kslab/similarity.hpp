#ifndef KSLAB_SIMILARITY_HPP
#define KSLAB_SIMILARITY_HPP

// Similarity variables y = r / sqrt(T - t), s = -log(T - t),
// phi(y, s) = (T - t) w(y sqrt(T - t), t). The rescaled equation
//
//   phi_s = phi_yy + ((n+1)/y - y/2) phi_y - phi + n phi^2 + y phi phi_y
//
// is solved on a fixed window [0, Y_max] with phi(Y_max) frozen.

#include "kslab/core.hpp"
#include "kslab/profiles.hpp"
#include "kslab/radial_pde.hpp"

#include <optional>
#include <string>
#include <vector>

namespace kslab::sim {

struct RescaledState {
  int n = 3;
  double s = 0;
  std::vector<double> y;
  std::vector<double> phi;
  double origin_value = 0;
  double T_est = 0;
  long source_frame = -1;
  /// Part of [0, Y_max] mapped beyond the frame domain (filled with w(R)).
  bool truncated = false;
};

/// Uniform similarity grid with `cells` cells on [0, Y_max].
inline std::vector<double> similarity_grid(double Y_max, int cells) {
  if (!(Y_max > 0) || cells < 4) throw InvalidInput("similarity grid needs Y_max > 0 and >= 4 cells");
  std::vector<double> y(std::size_t(cells) + 1);
  for (int i = 0; i <= cells; ++i) y[std::size_t(i)] = Y_max * double(i) / cells;
  return y;
}

inline RescaledState rescale_frame(const pde::MassState& frame, const pde::RadialGrid& grid, double T_est,
                                   double Y_max, int cells = 400, long frame_id = -1) {
  if (!(frame.t < T_est)) throw InvalidInput("rescale_frame requires t < T_est");
  const double tau = T_est - frame.t;
  const double sq = std::sqrt(tau);
  MonotoneInterpolant w(grid.r, frame.w);
  RescaledState st;
  st.n = grid.n;
  st.s = -std::log(tau);
  st.T_est = T_est;
  st.source_frame = frame_id;
  st.y = similarity_grid(Y_max, cells);
  st.phi.resize(st.y.size());
  for (std::size_t i = 0; i < st.y.size(); ++i) {
    const double r = st.y[i] * sq;
    if (r > grid.R) st.truncated = true;
    st.phi[i] = tau * w(r);
  }
  st.origin_value = st.phi[0];
  return st;
}

/// Lays out the discrete operator phi -> phi_yy + ((n+1)/y - y/2) phi_y - phi
/// as a tridiagonal (lo, di, up) in finite-volume form on the y^{n+1} measure.
namespace detail {

struct Operator {
  std::vector<double> lo, di, up;
};

inline Operator linear_operator(int n, const std::vector<double>& y) {
  const std::size_t M = y.size();
  Operator op{std::vector<double>(M, 0.0), std::vector<double>(M, 0.0), std::vector<double>(M, 0.0)};
  const double d = n + 2;
  std::vector<double> face(M - 1), area(M - 1), vol(M);
  for (std::size_t i = 0; i + 1 < M; ++i) {
    face[i] = 0.5 * (y[i] + y[i + 1]);
    area[i] = std::pow(face[i], n + 1);
  }
  for (std::size_t i = 0; i < M; ++i) {
    const double a = i == 0 ? 0.0 : face[i - 1];
    const double b = i + 1 < M ? face[i] : y[i];
    vol[i] = (std::pow(b, d) - std::pow(a, d)) / d;
  }
  for (std::size_t i = 0; i + 1 < M; ++i) {
    const double k = area[i] / (y[i + 1] - y[i]);
    op.di[i] -= k / vol[i];
    op.up[i] += k / vol[i];
    if (i + 1 < M - 1) {
      op.di[i + 1] -= k / vol[i + 1];
      op.lo[i + 1] += k / vol[i + 1];
    }
  }
  // Drift -y/2 phi_y by central differences, and -phi.
  for (std::size_t i = 1; i + 1 < M; ++i) {
    const double c = -0.5 * y[i] / (y[i + 1] - y[i - 1]);
    op.up[i] += c;
    op.lo[i] -= c;
  }
  for (std::size_t i = 0; i + 1 < M; ++i) op.di[i] -= 1.0;
  return op;
}

inline std::vector<double> u_of(int n, const std::vector<double>& y, const std::vector<double>& phi) {
  const auto d = nonuniform_derivative(y, phi);
  std::vector<double> u(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) u[i] = n * phi[i] + y[i] * d[i];
  u[0] = n * phi[0];
  return u;
}

}  // namespace detail

/// One linearly implicit step of size ds; phi(Y_max) is held fixed.
inline RescaledState step_rescaled(const RescaledState& state, double ds) {
  if (!(ds > 0)) throw InvalidInput("ds must be positive");
  const std::size_t M = state.y.size();
  const auto op = detail::linear_operator(state.n, state.y);
  const auto u = detail::u_of(state.n, state.y, state.phi);
  std::vector<double> lo(M), di(M), up(M), rhs(state.phi);
  for (std::size_t i = 0; i + 1 < M; ++i) {
    lo[i] = -ds * op.lo[i];
    up[i] = -ds * op.up[i];
    di[i] = 1.0 - ds * op.di[i] - ds * u[i];
  }
  lo[M - 1] = 0;
  di[M - 1] = 1;
  up[M - 1] = 0;
  if (!solve_tridiagonal(lo, di, up, rhs)) throw SolverDiverged("rescaled tridiagonal solve failed", state.s);
  RescaledState next = state;
  next.s = state.s + ds;
  next.phi = std::move(rhs);
  for (double v : next.phi)
    if (!std::isfinite(v)) throw SolverDiverged("non-finite value in phi", state.s);
  next.origin_value = next.phi[0];
  next.source_frame = -1;
  return next;
}

/// Max-norm of the discrete steady operator L phi + phi u on [0, Y_check].
inline double steady_residual(const RescaledState& st, double Y_check) {
  const auto op = detail::linear_operator(st.n, st.y);
  const auto u = detail::u_of(st.n, st.y, st.phi);
  double res = 0;
  for (std::size_t i = 0; i + 1 < st.y.size() && st.y[i] <= Y_check; ++i) {
    double v = op.di[i] * st.phi[i] + st.phi[i] * u[i];
    if (i > 0) v += op.lo[i] * st.phi[i - 1];
    v += op.up[i] * st.phi[i + 1];
    res = std::max(res, std::abs(v));
  }
  return res;
}

struct AtlasEntry {
  double alpha;
  profiles::ProfileCurve curve;
};

struct SteadyVerdict {
  bool converged = false;
  double tv_origin = 0;
  double steady_residual = 0;
  double matched_alpha = std::numeric_limits<double>::quiet_NaN();
  double match_error = std::numeric_limits<double>::infinity();
  bool t_sensitivity_stable = true;
  /// Match error against every atlas entry, in atlas order.
  std::vector<double> all_errors;
};

struct SteadyOptions {
  double Y_check = 10;
  /// Thresholds for the converged flag, relative to phi(0).
  double tv_tol = 0.02;
  double match_tol = 0.05;
  double residual_tol = 0.05;
};

inline SteadyVerdict detect_steady(const std::vector<RescaledState>& history, const std::vector<AtlasEntry>& atlas,
                                   const SteadyOptions& opt = {}) {
  if (history.size() < 10) throw InvalidInput("detect_steady needs >= 10 states");
  const double s_last = history.back().s;
  if (s_last - history.front().s < 3) throw InvalidInput("detect_steady needs a history spanning ds >= 3");
  SteadyVerdict v;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (const auto& h : history) {
    if (h.s < s_last - 1.0) continue;
    if (!std::isnan(prev)) v.tv_origin += std::abs(h.origin_value - prev);
    prev = h.origin_value;
  }
  const auto& last = history.back();
  v.steady_residual = steady_residual(last, opt.Y_check);
  double best_tie = std::numeric_limits<double>::infinity();
  for (const auto& e : atlas) {
    double err = 0;
    for (std::size_t i = 0; i < last.y.size() && last.y[i] <= opt.Y_check; ++i)
      err = std::max(err, std::abs(last.phi[i] - e.curve.psi(last.y[i])));
    v.all_errors.push_back(err);
    const double tie = std::abs(last.phi[0] - e.alpha);
    if (err < v.match_error || (err == v.match_error && tie < best_tie)) {
      v.match_error = err;
      v.matched_alpha = e.alpha;
      best_tie = tie;
    }
  }
  const double scale = std::max(std::abs(last.origin_value), 1e-300);
  v.converged = v.tv_origin <= opt.tv_tol * scale && v.match_error <= opt.match_tol * scale &&
                v.steady_residual <= opt.residual_tol * scale;
  return v;
}

/// sup over r in [0, r_window] of |w(r / sqrt(m)) / m - W1(r)|.
inline double type_two_rescaling(const pde::MassState& frame, const pde::RadialGrid& grid,
                                 const profiles::SteadyStatePair& w1, double r_window = 5.0) {
  const double m = frame.w[0];
  if (!(m > 0)) throw InvalidInput("type_two_rescaling requires m > 0");
  MonotoneInterpolant w(grid.r, frame.w);
  const double sq = std::sqrt(m);
  double d = 0;
  for (std::size_t i = 0; i < w1.r.size() && w1.r[i] <= r_window; ++i) {
    const double r = w1.r[i] / sq;
    if (r > grid.R) break;
    d = std::max(d, std::abs(w(r) / m - w1.w1[i]));
  }
  return d;
}

}  // namespace kslab::sim

#endif  // KSLAB_SIMILARITY_HPP
