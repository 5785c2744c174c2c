#ifndef KSLAB_ASYMPTOTICS_HPP
#define KSLAB_ASYMPTOTICS_HPP

// Quantitative checks on a finished blow-up trajectory: type-I rate,
// convergence to a self-similar profile, two-sided space-time bounds, the
// final profile L |x|^{-2}, the |x|^4 |u_t| decay, the gradient estimate and
// the lower bound for monotone data.

#include "kslab/core.hpp"
#include "kslab/profiles.hpp"
#include "kslab/radial_pde.hpp"

#include <string>
#include <vector>

namespace kslab::asym {

using pde::RadialGrid;
using pde::Trajectory;

namespace detail {

inline std::vector<std::vector<double>> all_u(const Trajectory& traj, const RadialGrid& grid) {
  std::vector<std::vector<double>> out;
  out.reserve(traj.frames.size());
  for (const auto& f : traj.frames) out.push_back(pde::recover_u(f, grid));
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct TypeOne {
  double M_fit = 0;
  double lower = 0;
  /// sup over the later half of the window; close to M_fit when stable.
  double M_half = 0;
  std::size_t points = 0;
  bool type_one = false;
};

/// (T - t) u(0, t) over every step with m >= 0.1 m_last. Steps too close to
/// T_est for its error bar to resolve (T - t < 100 T_err) are left out.
inline TypeOne type_one_check(const Trajectory& traj, double T_est, double T_err = 0.0) {
  TypeOne r;
  const int n = traj.config.n;
  const double m_last = traj.history.back().m;
  std::vector<double> vals;
  for (const auto& h : traj.history) {
    if (h.m < 0.1 * m_last) continue;
    const double tau = T_est - h.t;
    if (tau <= 100 * T_err) continue;
    vals.push_back(tau * n * h.m);
  }
  if (vals.empty()) return r;
  r.points = vals.size();
  r.M_fit = *std::max_element(vals.begin(), vals.end());
  r.lower = *std::min_element(vals.begin(), vals.end());
  r.M_half = *std::max_element(vals.begin() + std::ptrdiff_t(vals.size() / 2), vals.end());
  r.type_one = std::isfinite(r.M_fit) && r.M_fit > 0 && std::abs(r.M_half - r.M_fit) <= 0.05 * r.M_fit;
  return r;
}

// ---------------------------------------------------------------------------

struct Macroscopic {
  double matched_alpha = 0;
  /// sup |eps| on the nested windows (rho, delta), (rho/2, delta/2), (rho/4, delta/4).
  std::vector<double> eps_sup;
  bool decreasing = false;
  /// A window reached beyond the profile data and was shrunk.
  bool window_shrunk = false;
  std::size_t points = 0;
};

/// eps(x, t) = u(x, t) (T - t) / U(|x| / sqrt(T - t)) - 1 on the saved frames.
inline Macroscopic macroscopic_ratio(const Trajectory& traj, const RadialGrid& grid,
                                     const profiles::ProfileCurve& profile, double T_est, double rho, double delta) {
  Macroscopic out;
  out.matched_alpha = profile.alpha();
  const auto us = detail::all_u(traj, grid);
  for (int level = 0; level < 3; ++level) {
    const double rr = rho / double(1 << level);
    const double dd = delta / double(1 << level);
    double sup = 0;
    for (std::size_t k = 0; k < traj.frames.size(); ++k) {
      const double tau = T_est - traj.frames[k].t;
      if (!(tau > 0) || tau > dd) continue;
      const double sq = std::sqrt(tau);
      for (std::size_t i = 0; i < grid.size() && grid.r[i] <= rr; ++i) {
        const double y = grid.r[i] / sq;
        if (y > profile.reach()) {
          out.window_shrunk = true;
          break;
        }
        const double U = profile.U(y);
        const double e = us[k][i] * tau / U - 1.0;
        sup = std::max(sup, std::abs(e));
        ++out.points;
      }
    }
    out.eps_sup.push_back(sup);
  }
  out.decreasing = out.eps_sup[1] <= out.eps_sup[0] && out.eps_sup[2] <= out.eps_sup[1];
  return out;
}

// ---------------------------------------------------------------------------

struct TwoSided {
  double C1_fit = 0;
  double C2_fit = 0;
};

/// inf / sup of (T - t + |x|^2) u over |x| <= rho and t in [T/2, last frame].
inline TwoSided two_sided_fit(const Trajectory& traj, const RadialGrid& grid, double T_est, double rho) {
  TwoSided out;
  out.C1_fit = std::numeric_limits<double>::infinity();
  out.C2_fit = 0;
  for (const auto& f : traj.frames) {
    if (f.t < 0.5 * T_est) continue;
    const double tau = T_est - f.t;
    if (!(tau > 0)) continue;
    const auto u = pde::recover_u(f, grid);
    for (std::size_t i = 0; i < grid.size() && grid.r[i] <= rho; ++i) {
      const double v = (tau + grid.r[i] * grid.r[i]) * u[i];
      out.C1_fit = std::min(out.C1_fit, v);
      out.C2_fit = std::max(out.C2_fit, v);
    }
  }
  if (!std::isfinite(out.C1_fit)) out.C1_fit = 0;
  return out;
}

// ---------------------------------------------------------------------------

struct FinalProfile {
  bool found = false;
  double L_fit = 0;
  double L_lo = 0;
  double L_hi = 0;
  /// The fitted decade [eps_r, 10 eps_r].
  double eps_r = 0;
};

/// |x|^2 u(x, t_last) on the innermost decade where u has stopped evolving,
/// i.e. |u_t| (T - t_last) < tol u with u_t from the last two frames.
inline FinalProfile final_profile_fit(const Trajectory& traj, const RadialGrid& grid, double T_est,
                                      double tol = 0.01) {
  FinalProfile out;
  if (traj.frames.size() < 2) return out;
  const auto& a = traj.frames[traj.frames.size() - 2];
  const auto& b = traj.frames.back();
  const auto ua = pde::recover_u(a, grid);
  const auto ub = pde::recover_u(b, grid);
  const double tau = T_est - b.t;
  const double dt = b.t - a.t;
  if (!(dt > 0) || !(tau > 0)) return out;
  std::vector<char> frozen(grid.size(), 0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double ut = (ub[i] - ua[i]) / dt;
    frozen[i] = std::abs(ut) * tau < tol * ub[i];
  }
  // Innermost start i0 such that every node in [r_i0, 10 r_i0] is frozen and
  // the decade ends well inside the domain.
  for (std::size_t i0 = 1; i0 < grid.size(); ++i0) {
    const double e = grid.r[i0];
    if (10 * e > 0.5 * grid.R) break;
    bool ok = true;
    std::vector<double> vals;
    for (std::size_t i = i0; i < grid.size() && grid.r[i] <= 10 * e; ++i) {
      if (!frozen[i]) {
        ok = false;
        break;
      }
      vals.push_back(grid.r[i] * grid.r[i] * ub[i]);
    }
    if (!ok || vals.size() < 3) continue;
    std::sort(vals.begin(), vals.end());
    out.found = true;
    out.eps_r = e;
    out.L_lo = vals.front();
    out.L_hi = vals.back();
    const std::size_t m = vals.size();
    out.L_fit = m % 2 ? vals[m / 2] : 0.5 * (vals[m / 2 - 1] + vals[m / 2]);
    return out;
  }
  return out;
}

// ---------------------------------------------------------------------------

struct UtBound {
  double sup = 0;
  /// Same sup with every other frame dropped.
  double sup_coarse = 0;
  bool stable = false;
  bool applicable = true;
};

namespace detail {

inline double ut_sup(const Trajectory& traj, const RadialGrid& grid, double T_est, double eta,
                     const std::vector<std::size_t>& idx, const std::vector<std::vector<double>>& us) {
  double sup = 0;
  for (std::size_t j = 1; j + 1 < idx.size(); ++j) {
    const auto& fa = traj.frames[idx[j - 1]];
    const auto& fc = traj.frames[idx[j + 1]];
    if (!(T_est - fc.t > 0)) continue;
    const auto& ua = us[idx[j - 1]];
    const auto& uc = us[idx[j + 1]];
    const double dt = fc.t - fa.t;
    for (std::size_t i = 1; i < grid.size() && grid.r[i] <= eta; ++i) {
      const double x4 = std::pow(grid.r[i], 4);
      sup = std::max(sup, x4 * std::abs((uc[i] - ua[i]) / dt));
    }
  }
  return sup;
}

}  // namespace detail

/// sup over the late frames (t >= t_from) and 0 < |x| <= eta of |x|^4 |u_t|,
/// with u_t by central frame differences.
inline UtBound ut_bound_check(const Trajectory& traj, const RadialGrid& grid, double T_est, double eta,
                              double t_from) {
  UtBound out;
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < traj.frames.size(); ++k)
    if (traj.frames[k].t >= t_from && traj.frames[k].t < T_est) idx.push_back(k);
  if (idx.size() < 3) {
    out.applicable = false;
    return out;
  }
  // Spatially flat data carries no decay in |x| to test.
  const auto& last = traj.frames[idx.back()];
  if (last.w.front() - last.w.back() <= 1e-12 * std::abs(last.w.front())) {
    out.applicable = false;
    return out;
  }
  const auto us = detail::all_u(traj, grid);
  out.sup = detail::ut_sup(traj, grid, T_est, eta, idx, us);
  std::vector<std::size_t> coarse;
  for (std::size_t j = 0; j < idx.size(); j += 2) coarse.push_back(idx[j]);
  out.sup_coarse = coarse.size() >= 3 ? detail::ut_sup(traj, grid, T_est, eta, coarse, us) : out.sup;
  out.stable = std::isfinite(out.sup) && std::abs(out.sup - out.sup_coarse) <= 0.1 * std::max(out.sup, 1e-300);
  return out;
}

// ---------------------------------------------------------------------------

/// max over frames of sup_r |w_r| / m^{3/2}.
inline double gradient_bound_check(const Trajectory& traj, const RadialGrid& grid) {
  double best = 0;
  for (const auto& f : traj.frames) {
    if (!(f.m > 0)) continue;
    const auto d = nonuniform_derivative(grid.r, f.w);
    double sup = 0;
    for (double v : d) sup = std::max(sup, std::abs(v));
    best = std::max(best, sup / std::pow(f.m, 1.5));
  }
  return best;
}

/// inf of u(x, t) (1 / u(0, t) + |x|^2) over |x| <= rho, t in [T/2, last].
inline double lower_bound_monotone_check(const Trajectory& traj, const RadialGrid& grid, double T_est, double rho) {
  double inf = std::numeric_limits<double>::infinity();
  for (const auto& f : traj.frames) {
    if (f.t < 0.5 * T_est) continue;
    const auto u = pde::recover_u(f, grid);
    if (!(u[0] > 0)) continue;
    for (std::size_t i = 0; i < grid.size() && grid.r[i] <= rho; ++i)
      inf = std::min(inf, u[i] * (1.0 / u[0] + grid.r[i] * grid.r[i]));
  }
  return std::isfinite(inf) ? inf : 0.0;
}

// ---------------------------------------------------------------------------
// Closed-form values for the explicit self-similar solution
// u = (T - t)^{-1} U0(|x| / sqrt(T - t)).

namespace closed_form {

/// y^4 |U0(y) + (y/2) U0'(y)|, which equals |x|^4 |u_t| for the explicit solution.
inline double x4_ut(int n, double y) {
  const double a = 2.0 * (n - 2);
  const double q = y * y;
  return q * q * 8.0 * (n - 2) * std::abs(n * (2.0 * n - 4.0) + (n - 4.0) * q) / std::pow(a + q, 3);
}

/// (1 + y^2) U0(y).
inline double two_sided_weight(int n, double y) { return (1 + y * y) * profiles::eval_U0(n, y); }

/// U0(y) (1 / U0(0) + y^2).
inline double lower_bound_weight(int n, double y) {
  return profiles::eval_U0(n, y) * (1.0 / profiles::eval_U0(n, 0.0) + y * y);
}

/// sup_y |Psi0'(y)| / Psi0(0)^{3/2}.
inline double gradient_ratio(int n) {
  // |Psi0'| = 8 y / (a + y^2)^2 peaks at y^2 = a / 3.
  const double a = 2.0 * (n - 2);
  const double y = std::sqrt(a / 3.0);
  return std::abs(profiles::eval_dPsi0(n, y)) / std::pow(profiles::eval_Psi0(n, 0.0), 1.5);
}

/// min and max of f on [0, y_max] by dense sampling plus golden-section polish.
template <class F>
std::pair<double, double> extrema(F&& f, double y_max, int samples = 20000) {
  double lo = f(0.0), hi = lo;
  double y_lo = 0, y_hi = 0;
  const double h = y_max / samples;
  for (int i = 1; i <= samples; ++i) {
    const double y = h * i, v = f(y);
    if (v < lo) { lo = v; y_lo = y; }
    if (v > hi) { hi = v; y_hi = y; }
  }
  auto polish = [&](double c, int sign) {
    double a = std::max(0.0, c - h), b = std::min(y_max, c + h);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100; ++it) {
      const double x1 = b - g * (b - a), x2 = a + g * (b - a);
      if (sign * f(x1) > sign * f(x2)) b = x2; else a = x1;
    }
    return f(0.5 * (a + b));
  };
  lo = std::min(lo, polish(y_lo, -1));
  hi = std::max(hi, polish(y_hi, 1));
  return {lo, hi};
}

}  // namespace closed_form

}  // namespace kslab::asym

#endif  // KSLAB_ASYMPTOTICS_HPP
