#ifndef KSLAB_PROFILES_HPP
#define KSLAB_PROFILES_HPP

// Backward self-similar profiles. Psi solves
//
//   Psi'' + ((n+1)/y - y/2) Psi' - Psi + Psi (y Psi' + n Psi) = 0,  Psi'(0) = 0,
//
// and U = n Psi + y Psi' is the profile of u. Integration is by Taylor series
// started at y = 0 from the regular power series, so the singular coefficient
// (n+1)/y never has to be evaluated. Decaying profiles are unstable for the
// forward problem (perturbations grow like e^{y^2/4} y^{-n}); use Real =
// Precise whenever the profile is needed accurately beyond y ~ 10.

#include "kslab/core.hpp"
#include "kslab/taylor.hpp"
#include "kslab/zero_number.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace kslab::profiles {

// ---------------------------------------------------------------------------
// Closed forms

/// Explicit profile U0(y) = 4(n-2)(2n+y^2) / (2(n-2)+y^2)^2.
inline double eval_U0(int n, double y) {
  if (n < 3) throw InvalidInput("eval_U0 requires n >= 3");
  const double a = 2.0 * (n - 2);
  const double q = y * y;
  return 4.0 * (n - 2) * (2.0 * n + q) / ((a + q) * (a + q));
}

/// Psi0(y) = 4 / (2(n-2) + y^2), the mass profile whose U is U0.
inline double eval_Psi0(int n, double y) { return 4.0 / (2.0 * (n - 2) + y * y); }
inline double eval_dPsi0(int n, double y) {
  const double d = 2.0 * (n - 2) + y * y;
  return -8.0 * y / (d * d);
}

/// Center value of Psi0.
template <class Real = double>
Real psi0_alpha(int n) {
  return Real(2) / Real(n - 2);
}

/// Residual of the profile ODE at (y, psi, psi', psi''); y > 0.
template <class Real>
Real profile_residual(int n, const Real& y, const Real& psi, const Real& dpsi, const Real& d2psi) {
  return d2psi + (Real(n + 1) / y - y / Real(2)) * dpsi - psi + psi * (y * dpsi + Real(n) * psi);
}

// ---------------------------------------------------------------------------
// Taylor fields

/// Coefficient recursion of the profile ODE multiplied by y:
///   y Psi'' + (n+1) Psi' - (y^2/2) Psi' - y Psi + y Psi U = 0.
template <class Real>
struct ProfileField {
  int n;

  void expand(const Real& y0, std::vector<Real>& p, int order) const {
    const std::size_t K = std::size_t(order);
    std::vector<Real> d(K + 1, Real(0)), U(K + 1, Real(0)), Q(K + 1, Real(0));
    const Real rn(n);
    auto at = [](const std::vector<Real>& v, long i) { return i < 0 ? Real(0) : v[std::size_t(i)]; };
    if (y0 == Real(0)) {
      // Regular expansion at the origin; requires p[1] = 0.
      d[0] = p[1];
      U[0] = rn * p[0];
      Q[0] = p[0] * U[0];
      for (std::size_t k = 1; k + 1 <= K; ++k) {
        // (k+n+1) d_k = d_{k-2}/2 + p_{k-1} - Q_{k-1}
        const Real rhs = at(d, long(k) - 2) / Real(2) + p[k - 1] - Q[k - 1];
        d[k] = rhs / Real(int(k) + n + 1);
        p[k + 1] = d[k] / Real(int(k) + 1);
        U[k] = d[k - 1] + rn * p[k];
        Real q(0);
        for (std::size_t j = 0; j <= k; ++j) q += p[j] * U[k - j];
        Q[k] = q;
      }
      return;
    }
    const Real y0sq = y0 * y0;
    for (std::size_t k = 0; k + 2 <= K; ++k) {
      d[k] = Real(int(k) + 1) * p[k + 1];
      U[k] = y0 * d[k] + at(d, long(k) - 1) + rn * p[k];
      Real q(0);
      for (std::size_t j = 0; j <= k; ++j) q += p[j] * U[k - j];
      Q[k] = q;
      const long ik = long(k);
      Real rhs = -Real(int(k) + n + 1) * d[k] +
                 (y0sq * d[k] + Real(2) * y0 * at(d, ik - 1) + at(d, ik - 2)) / Real(2) + y0 * p[k] +
                 at(p, ik - 1) - y0 * Q[k] - at(Q, ik - 1);
      const Real dnext = rhs / (y0 * Real(int(k) + 1));
      p[k + 2] = dnext / Real(int(k) + 2);
    }
  }
};

/// Regular steady state of the averaged-mass equation, multiplied by r:
///   r W'' + (n+1) W' + n r W^2 + r^2 W W' = 0.
template <class Real>
struct SteadyField {
  int n;

  void expand(const Real& r0, std::vector<Real>& p, int order) const {
    const std::size_t K = std::size_t(order);
    std::vector<Real> d(K + 1, Real(0)), S(K + 1, Real(0)), Q(K + 1, Real(0));
    const Real rn(n);
    auto at = [](const std::vector<Real>& v, long i) { return i < 0 ? Real(0) : v[std::size_t(i)]; };
    auto conv = [](const std::vector<Real>& a, const std::vector<Real>& b, std::size_t k) {
      Real s(0);
      for (std::size_t j = 0; j <= k; ++j) s += a[j] * b[k - j];
      return s;
    };
    if (r0 == Real(0)) {
      d[0] = p[1];
      S[0] = p[0] * p[0];
      Q[0] = p[0] * d[0];
      for (std::size_t k = 1; k + 1 <= K; ++k) {
        d[k] = -(rn * S[k - 1] + at(Q, long(k) - 2)) / Real(int(k) + n + 1);
        p[k + 1] = d[k] / Real(int(k) + 1);
        S[k] = conv(p, p, k);
        Q[k] = conv(p, d, k);
      }
      return;
    }
    for (std::size_t k = 0; k + 2 <= K; ++k) {
      d[k] = Real(int(k) + 1) * p[k + 1];
      S[k] = conv(p, p, k);
      Q[k] = conv(p, d, k);
      const long ik = long(k);
      const Real rhs = -Real(int(k) + n + 1) * d[k] - rn * (r0 * S[k] + at(S, ik - 1)) -
                       (r0 * r0 * Q[k] + Real(2) * r0 * at(Q, ik - 1) + at(Q, ik - 2));
      const Real dnext = rhs / (r0 * Real(int(k) + 1));
      p[k + 2] = dnext / Real(int(k) + 2);
    }
  }
};

/// Deviation v = r^2 W - 2 in s = log r; autonomous:
///   v'' + (n-2+v) v' + (n-2) v (2+v) = 0.
template <class Real>
struct SteadyGapField {
  int n;

  void expand(const Real&, std::vector<Real>& p, int order) const {
    const std::size_t K = std::size_t(order);
    std::vector<Real> d(K + 1, Real(0));
    const Real m(n - 2);
    for (std::size_t k = 0; k + 2 <= K; ++k) {
      d[k] = Real(int(k) + 1) * p[k + 1];
      Real vd(0), vv(0);
      for (std::size_t j = 0; j <= k; ++j) {
        vd += p[j] * d[k - j];
        vv += p[j] * p[k - j];
      }
      const Real dnext = -(m * d[k] + vd + m * (Real(2) * p[k] + vv)) / Real(int(k) + 1);
      p[k + 2] = dnext / Real(int(k) + 2);
    }
  }
};

// ---------------------------------------------------------------------------
// Profile integration

template <class Real>
struct ProfileParams {
  int n = 3;
  Real alpha = Real(0);
  Real y_max = Real(20);
  Real tol = Real(1e-12);
  /// Output spacing; 0 selects y_max / 1000.
  double sample_dy = 0.0;

  void validate() const {
    if (n < 3) throw InvalidInput("profile dimension must be >= 3");
    if (!(y_max > Real(0))) throw InvalidInput("y_max must be positive");
    if (!(tol > Real(0) && tol < Real(1))) throw InvalidInput("tol must lie in (0, 1)");
    if (alpha < Real(0)) throw InvalidInput("alpha must be >= 0");
  }
};

enum class Outcome { GlobalPositive, TouchesZero, OdeBlowup };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::GlobalPositive: return "GlobalPositive";
    case Outcome::TouchesZero: return "TouchesZero";
    case Outcome::OdeBlowup: return "OdeBlowup";
  }
  return "?";
}

struct Classification {
  Outcome outcome = Outcome::GlobalPositive;
  /// r_alpha for TouchesZero, y* for OdeBlowup, the reached y_max otherwise.
  double radius = 0;
  /// Sign of the divergence for OdeBlowup, 0 otherwise.
  int sign = 0;
  /// Sign changes of Psi - 1/n before the event. Together with the outcome it
  /// forms the shooting signature: profiles sit where the signature jumps.
  int crossings = 0;
  /// Psi dipped into [-tol, 0] without crossing below -tol.
  bool grazed = false;

  bool same_signature(const Classification& o) const {
    return outcome == o.outcome && crossings == o.crossings && sign == o.sign;
  }
  std::string tag() const {
    switch (outcome) {
      case Outcome::GlobalPositive: return "GlobalPositive";
      case Outcome::TouchesZero: return "TouchesZero";
      case Outcome::OdeBlowup: return sign > 0 ? "OdeBlowup+" : "OdeBlowup-";
    }
    return "?";
  }
};

template <class Real>
struct ProfileSolution {
  ProfileParams<Real> params;
  std::vector<Real> y, psi, dpsi, u;
  Classification classification;
  std::vector<TaylorPatch<Real>> patches;

  int n() const { return params.n; }
  double y_end() const { return to_double(y.back()); }

  /// Dense evaluation of (Psi, Psi', Psi'') anywhere in the integrated range.
  std::array<Real, 3> state_at(const Real& at) const {
    std::size_t lo = 0, hi = patches.size();
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (patches[mid].x0 <= at) lo = mid; else hi = mid;
    }
    const auto& p = patches[lo];
    const Real t = at - p.x0;
    return {p.value(t), p.derivative(t), p.second_derivative(t)};
  }
  Real psi_at(const Real& at) const { return state_at(at)[0]; }
};

namespace detail {

inline constexpr double kDivergenceCap = 1e6;
inline constexpr int kScanPoints = 8;

template <class Real, class F>
Real bisect_patch(const TaylorPatch<Real>& p, Real lo, Real hi, F&& positive_side) {
  for (int it = 0; it < 200; ++it) {
    const Real mid = (lo + hi) / Real(2);
    if (mid == lo || mid == hi) break;
    if (positive_side(p.value(mid))) lo = mid; else hi = mid;
  }
  return (lo + hi) / Real(2);
}

}  // namespace detail

/// Integrates the profile IVP from y = 0 with Psi(0) = alpha. Stops at the
/// first of: Psi < -tol (TouchesZero at the zero of Psi), |Psi| > 1e6
/// (OdeBlowup), y = y_max (GlobalPositive).
template <class Real>
ProfileSolution<Real> integrate_profile(const ProfileParams<Real>& params) {
  using std::abs;
  params.validate();
  const int n = params.n;
  const Real inv_n = Real(1) / Real(n);
  const Real zero_tol = params.tol;
  const Real cap(detail::kDivergenceCap);
  TaylorStepper<Real, ProfileField<Real>> stepper(ProfileField<Real>{n}, params.tol, Real(1e-8));

  ProfileSolution<Real> sol;
  sol.params = params;
  const double dy = params.sample_dy > 0 ? params.sample_dy : to_double(params.y_max) / 1000.0;
  const Real rdy(dy);
  std::size_t next_sample = 0;

  auto emit_until = [&](const TaylorPatch<Real>& p, const Real& y_stop, bool inclusive) {
    while (true) {
      const Real ys = Real(double(next_sample)) * rdy;
      if (ys > y_stop || (!inclusive && ys == y_stop)) break;
      const Real t = ys - p.x0;
      const Real v = p.value(t), dv = p.derivative(t);
      sol.y.push_back(ys);
      sol.psi.push_back(v);
      sol.dpsi.push_back(dv);
      sol.u.push_back(Real(n) * v + ys * dv);
      ++next_sample;
    }
  };
  auto emit_point = [&](const TaylorPatch<Real>& p, const Real& ys) {
    if (!sol.y.empty() && sol.y.back() >= ys) return;
    const Real t = ys - p.x0;
    const Real v = p.value(t), dv = p.derivative(t);
    sol.y.push_back(ys);
    sol.psi.push_back(v);
    sol.dpsi.push_back(dv);
    sol.u.push_back(Real(n) * v + ys * dv);
  };

  Real y(0), v = params.alpha, dv(0);
  int last_sign = 0;
  {
    const Real d0 = v - inv_n;
    last_sign = (d0 > Real(0)) - (d0 < Real(0));
  }
  Classification cls;
  std::size_t guard = 0;
  while (true) {
    if (++guard > 2000000) throw IntegrationStalled("profile integration exceeded step budget", to_double(y), to_double(v), to_double(dv));
    const Real remaining = params.y_max - y;
    TaylorPatch<Real> patch = stepper.step(y, v, dv, remaining);
    const Real h = patch.h;
    if (h < Real(1e-12) * (Real(1) + y) && h < remaining) {
      throw IntegrationStalled("Taylor step underflow before any event", to_double(y), to_double(v), to_double(dv));
    }
    sol.patches.push_back(patch);
    const TaylorPatch<Real>& p = sol.patches.back();

    // Scan the patch for events.
    bool stopped = false;
    Real t_prev(0);
    for (int j = 1; j <= detail::kScanPoints; ++j) {
      const Real t = h * Real(j) / Real(detail::kScanPoints);
      const Real val = p.value(t);
      const Real gap = val - inv_n;
      const int s = (gap > Real(0)) - (gap < Real(0));
      if (s != 0) {
        if (last_sign != 0 && s != last_sign) ++cls.crossings;
        last_sign = s;
      }
      if (abs(val) > cap) {
        const int sg = val > Real(0) ? 1 : -1;
        const Real root = detail::bisect_patch(p, t_prev, t, [&](const Real& w) { return abs(w) <= cap; });
        emit_until(p, y + root, false);
        emit_point(p, y + root);
        cls.outcome = Outcome::OdeBlowup;
        cls.radius = to_double(y + root);
        cls.sign = sg;
        stopped = true;
        break;
      }
      bool below = val < -zero_tol;
      if (!below && val <= Real(0)) {
        // Shallow dip: look closer before deciding.
        cls.grazed = true;
        const Real a = t_prev, b = std::min(h, t + (t - t_prev));
        for (int k = 1; k <= 64 && !below; ++k) {
          const Real tt = a + (b - a) * Real(k) / Real(64);
          if (p.value(tt) < -zero_tol) {
            below = true;
          }
        }
      }
      if (below) {
        const Real root = detail::bisect_patch(p, t_prev, t, [](const Real& w) { return w > Real(0); });
        emit_until(p, y + root, false);
        emit_point(p, y + root);
        cls.outcome = Outcome::TouchesZero;
        cls.radius = to_double(y + root);
        stopped = true;
        break;
      }
      t_prev = t;
    }
    if (stopped) break;

    const Real y_next = y + h;
    emit_until(p, y_next, true);
    v = p.value(h);
    dv = p.derivative(h);
    y = y_next;
    if (y >= params.y_max) {
      emit_point(p, params.y_max);
      cls.outcome = Outcome::GlobalPositive;
      cls.radius = to_double(params.y_max);
      break;
    }
  }
  sol.classification = cls;
  return sol;
}

template <class Real>
Classification classify_alpha(int n, const Real& alpha, const Real& y_max, const Real& tol) {
  ProfileParams<Real> params{n, alpha, y_max, tol, to_double(y_max) / 50.0};
  return integrate_profile(params).classification;
}

// ---------------------------------------------------------------------------
// Decay limit

struct TailSample {
  double s, w, dw;
};

/// Lambda_alpha = lim y^2 Psi(y) together with the far-field solution in the
/// log variable, which extends Psi and U beyond the shooting range.
struct LambdaEstimate {
  double value = 0;
  double error = 0;
  std::vector<TailSample> tail;
};

namespace detail {

// x = (W, P = dW/ds) for W = y^2 Psi, s = log y:
//   W'' + (n-4+W) W' + (n-2)(W^2 - 2W) = (e^{2s}/2) W'.
// The drift term makes this stiff; the fast mode grows like e^{y^2/4}.
struct LogTailSystem {
  int n;
  std::array<double, 2> f(double s, const std::array<double, 2>& x) const {
    const double W = x[0], P = x[1];
    return {P, (0.5 * std::exp(2 * s) - (n - 4) - W) * P - (n - 2) * (W * W - 2 * W)};
  }
  std::array<double, 4> jac(double s, const std::array<double, 2>& x) const {
    const double W = x[0], P = x[1];
    return {0.0, 1.0, -P - (n - 2) * (2 * W - 2), 0.5 * std::exp(2 * s) - (n - 4) - W};
  }
};

inline bool solve_dense(std::array<double, 16>& A, std::array<double, 4>& b) {
  constexpr int N = 4;
  for (int c = 0; c < N; ++c) {
    int piv = c;
    for (int r = c + 1; r < N; ++r)
      if (std::abs(A[r * N + c]) > std::abs(A[piv * N + c])) piv = r;
    if (A[piv * N + c] == 0.0) return false;
    if (piv != c) {
      for (int k = 0; k < N; ++k) std::swap(A[c * N + k], A[piv * N + k]);
      std::swap(b[c], b[piv]);
    }
    for (int r = c + 1; r < N; ++r) {
      const double m = A[r * N + c] / A[c * N + c];
      for (int k = c; k < N; ++k) A[r * N + k] -= m * A[c * N + k];
      b[r] -= m * b[c];
    }
  }
  for (int r = N - 1; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < N; ++k) s -= A[r * N + k] * b[k];
    b[r] = s / A[r * N + r];
  }
  return true;
}

// One step of the two-stage Radau IIA method (order 3, L-stable).
inline bool radau_step(const LogTailSystem& sys, double s, std::array<double, 2>& x, double h) {
  static constexpr double a[2][2] = {{5.0 / 12, -1.0 / 12}, {3.0 / 4, 1.0 / 4}};
  static constexpr double c[2] = {1.0 / 3, 1.0};
  std::array<double, 4> z{0, 0, 0, 0};
  for (int it = 0; it < 50; ++it) {
    std::array<std::array<double, 2>, 2> F;
    std::array<std::array<double, 4>, 2> J;
    for (int i = 0; i < 2; ++i) {
      const std::array<double, 2> xi{x[0] + z[2 * i], x[1] + z[2 * i + 1]};
      F[i] = sys.f(s + c[i] * h, xi);
      J[i] = sys.jac(s + c[i] * h, xi);
    }
    std::array<double, 4> g;
    std::array<double, 16> M{};
    for (int i = 0; i < 2; ++i) {
      for (int comp = 0; comp < 2; ++comp) {
        const int row = 2 * i + comp;
        g[row] = -(z[row] - h * (a[i][0] * F[0][comp] + a[i][1] * F[1][comp]));
        for (int j = 0; j < 2; ++j)
          for (int k = 0; k < 2; ++k) M[row * 4 + 2 * j + k] = (row == 2 * j + k ? 1.0 : 0.0) - h * a[i][j] * J[j][comp * 2 + k];
      }
    }
    if (!solve_dense(M, g)) return false;
    double dz = 0, sz = 1e-300;
    for (int k = 0; k < 4; ++k) {
      z[k] += g[k];
      dz = std::max(dz, std::abs(g[k]));
      sz = std::max(sz, std::abs(z[k]));
    }
    if (!std::isfinite(dz)) return false;
    if (dz <= 1e-14 * std::max(1.0, std::abs(x[0])) + 1e-15 * sz) {
      x[0] += z[2];
      x[1] += z[3];
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Integrates the far-field equation for W = y^2 Psi in s = log y from the
/// end of `sol` up to s_max and returns W(s_max), with error estimate
/// |W(s_max) - W(s_max - 1)|. Throws NoFiniteLimit when W diverges.
template <class Real>
LambdaEstimate compute_lambda(const ProfileSolution<Real>& sol, double s_max) {
  if (sol.classification.outcome != Outcome::GlobalPositive)
    throw InvalidInput("compute_lambda requires a GlobalPositive profile");
  const int n = sol.n();
  const double y0 = to_double(sol.y.back());
  const double psi = to_double(sol.psi.back());
  const double dpsi = to_double(sol.dpsi.back());
  const double s0 = std::log(y0);
  if (!(s_max > s0 + 1.0)) throw InvalidInput("s_max must exceed log(y_max) + 1");

  std::array<double, 2> x{y0 * y0 * psi, 2 * y0 * y0 * psi + y0 * y0 * y0 * dpsi};
  // W ~ y^{2+p} with p = y Psi' / Psi. Decaying profiles have p -> -2; the
  // stiff tail integrator would damp any faster growth instead of following it.
  if (x[0] > 0 && x[1] > 1.0 * x[0]) throw NoFiniteLimit("W = y^2 Psi grows at least like y", x[0]);
  detail::LogTailSystem sys{n};
  // z = h * e^{2s}/2 >= 12 keeps the Radau amplification of the fast mode < 0.3.
  const double h_nominal = std::clamp(24.0 / (y0 * y0), 1e-3, 0.5);
  constexpr double kCap = 1e6;

  LambdaEstimate est;
  est.tail.push_back({s0, x[0], x[1]});
  double s = s0;
  double w_at_minus_one = x[0];
  bool have_minus_one = false;
  while (s < s_max) {
    const double h = std::min(h_nominal, s_max - s);
    const double w_prev = x[0], s_prev = s;
    if (!detail::radau_step(sys, s, x, h) || !std::isfinite(x[0]) || std::abs(x[0]) > kCap) {
      throw NoFiniteLimit("far-field W diverges", x[0]);
    }
    s += h;
    est.tail.push_back({s, x[0], x[1]});
    if (!have_minus_one && s >= s_max - 1.0) {
      const double f = (s_max - 1.0 - s_prev) / h;
      w_at_minus_one = w_prev + f * (x[0] - w_prev);
      have_minus_one = true;
    }
  }
  est.value = x[0];
  est.error = std::abs(x[0] - w_at_minus_one);
  if (est.error > 1e-3 * std::max(1.0, std::abs(est.value))) {
    throw NoFiniteLimit("far-field W still drifting at s_max", x[0]);
  }
  return est;
}

/// Default far-field horizon: eight units of s beyond the shooting range.
template <class Real>
LambdaEstimate compute_lambda(const ProfileSolution<Real>& sol) {
  return compute_lambda(sol, std::log(sol.y_end()) + 8.0);
}

// ---------------------------------------------------------------------------
// Decay check

struct QuadraticDecay {
  double sup_y2psi = 0;
  /// y^2 Psi still growing geometrically at the end of the range.
  bool unbounded = false;
};

template <class Real>
QuadraticDecay check_quadratic_decay(const ProfileSolution<Real>& sol) {
  if (sol.classification.outcome != Outcome::GlobalPositive)
    throw InvalidInput("check_quadratic_decay requires a GlobalPositive profile");
  QuadraticDecay out;
  const double y_end = sol.y_end();
  double at_half = 0, at_end = 0;
  for (std::size_t i = 0; i < sol.y.size(); ++i) {
    const double y = to_double(sol.y[i]);
    if (y < 1.0) continue;
    const double v = y * y * to_double(sol.psi[i]);
    out.sup_y2psi = std::max(out.sup_y2psi, v);
    if (y <= 0.5 * y_end) at_half = v;
    at_end = v;
  }
  out.unbounded = at_half > 0 && at_end > 1.5 * at_half;
  return out;
}

// ---------------------------------------------------------------------------
// Dense profile evaluation on [0, inf)

/// Double precision view of a profile: Hermite interpolation on the shooting
/// range, the far-field solution in log variables beyond it, and Lambda / y^2
/// past the tail. Also wraps closed forms and the constant profile.
class ProfileCurve {
 public:
  static ProfileCurve constant(int n) {
    ProfileCurve c;
    c.n_ = n;
    c.alpha_ = 1.0 / n;
    c.kind_ = Kind::Constant;
    return c;
  }

  static ProfileCurve analytic(int n, double alpha, std::function<double(double)> psi,
                               std::function<double(double)> dpsi, std::optional<double> lambda = {}) {
    ProfileCurve c;
    c.n_ = n;
    c.alpha_ = alpha;
    c.kind_ = Kind::Analytic;
    c.psi_fn_ = std::move(psi);
    c.dpsi_fn_ = std::move(dpsi);
    c.lambda_ = lambda;
    return c;
  }

  static ProfileCurve psi0(int n) {
    return analytic(
        n, 2.0 / (n - 2), [n](double y) { return eval_Psi0(n, y); }, [n](double y) { return eval_dPsi0(n, y); }, 4.0);
  }

  template <class Real>
  static ProfileCurve from_solution(const ProfileSolution<Real>& sol, const std::optional<LambdaEstimate>& tail) {
    ProfileCurve c;
    c.n_ = sol.n();
    c.alpha_ = to_double(sol.params.alpha);
    c.kind_ = Kind::Sampled;
    for (std::size_t i = 0; i < sol.y.size(); ++i) {
      c.y_.push_back(to_double(sol.y[i]));
      c.psi_.push_back(to_double(sol.psi[i]));
      c.dpsi_.push_back(to_double(sol.dpsi[i]));
    }
    if (tail) {
      c.lambda_ = tail->value;
      for (const auto& t : tail->tail) {
        c.ts_.push_back(t.s);
        c.tw_.push_back(t.w);
        c.tdw_.push_back(t.dw);
      }
    }
    return c;
  }

  int n() const { return n_; }
  double alpha() const { return alpha_; }
  std::optional<double> lambda() const { return lambda_; }
  bool is_constant() const { return kind_ == Kind::Constant; }

  /// Largest y at which the curve is backed by data (infinite for closed forms
  /// and for sampled curves with a decay limit).
  double reach() const {
    if (kind_ != Kind::Sampled || lambda_) return std::numeric_limits<double>::infinity();
    return y_.back();
  }

  double psi(double y) const { return eval(y)[0]; }
  double dpsi(double y) const { return eval(y)[1]; }
  double U(double y) const {
    const auto e = eval(y);
    return n_ * e[0] + y * e[1];
  }

 private:
  enum class Kind { Constant, Analytic, Sampled };

  std::array<double, 2> eval(double y) const {
    switch (kind_) {
      case Kind::Constant: return {alpha_, 0.0};
      case Kind::Analytic: return {psi_fn_(y), dpsi_fn_(y)};
      case Kind::Sampled: break;
    }
    if (y <= y_.back() || ts_.empty()) {
      if (y > y_.back() && lambda_) return {*lambda_ / (y * y), -2.0 * *lambda_ / (y * y * y)};
      return {hermite_eval(y_, psi_, dpsi_, y), hermite_eval_derivative(y)};
    }
    const double s = std::log(y);
    double W, P;
    if (s >= ts_.back()) {
      W = *lambda_;
      P = 0.0;
    } else {
      W = hermite_eval(ts_, tw_, tdw_, s);
      P = linear(ts_, tdw_, s);
    }
    const double e2 = 1.0 / (y * y);
    return {e2 * W, e2 * (P - 2 * W) / y};
  }

  double hermite_eval_derivative(double y) const {
    // Psi' between samples: linear in the sampled derivative is accurate enough
    // at the default 1000-sample resolution.
    return linear(y_, dpsi_, y);
  }

  static double linear(const std::vector<double>& x, const std::vector<double>& f, double at) {
    if (at <= x.front()) return f.front();
    if (at >= x.back()) return f.back();
    const auto it = std::upper_bound(x.begin(), x.end(), at);
    const std::size_t i = std::size_t(it - x.begin()) - 1;
    const double t = (at - x[i]) / (x[i + 1] - x[i]);
    return f[i] + t * (f[i + 1] - f[i]);
  }

  Kind kind_ = Kind::Constant;
  int n_ = 3;
  double alpha_ = 0;
  std::optional<double> lambda_;
  std::function<double(double)> psi_fn_, dpsi_fn_;
  std::vector<double> y_, psi_, dpsi_;
  std::vector<double> ts_, tw_, tdw_;
};

// ---------------------------------------------------------------------------
// Searching for members of S

struct FindOptions {
  /// Initial scan resolution in points per decade of alpha.
  int points_per_decade = 400;
  /// Scan horizon; every alpha not within ~1e-14 of a profile departs before it.
  double scan_y_max = 30.0;
  double scan_tol = 1e-12;
  /// Departure radius growth demanded over the last four decades of bisection.
  double min_radius_growth = 0.3;
};

template <class Real>
struct ProfileCandidate {
  Real alpha;
  /// Half width of the final bracket.
  double bracket = 0;
  /// Radius out to which alpha was re-validated as GlobalPositive.
  double validated_radius = 0;
};

namespace detail {

template <class Real>
struct Bracket {
  Real lo, hi;
  Classification c_lo, c_hi;
};

template <class Real>
Real next_tol_floor(const Real& alpha) {
  return alpha * Real(std::numeric_limits<double>::epsilon() * 64);
}

}  // namespace detail

/// Scans alpha in [alpha_lo, alpha_hi] on a logarithmic grid, bisects every
/// jump of the shooting signature to width tol and keeps the brackets whose
/// departure radius diverges as they shrink. Bisection starts in double and
/// continues in Real once double resolution is exhausted.
template <class Real = double>
std::vector<ProfileCandidate<Real>> find_profiles(int n, double alpha_lo, double alpha_hi, int max_count,
                                                  double tol, const FindOptions& opt = {}) {
  if (!(alpha_lo > 0 && alpha_lo < alpha_hi)) throw InvalidInput("find_profiles requires 0 < alpha_lo < alpha_hi");
  if (n < 3) throw InvalidInput("profile dimension must be >= 3");
  const double decades = std::log10(alpha_hi / alpha_lo);
  const int points = std::max(2, int(std::ceil(decades * opt.points_per_decade)) + 1);

  auto classify_d = [&](double a) {
    return classify_alpha<double>(n, a, opt.scan_y_max, opt.scan_tol);
  };

  std::vector<double> grid(points);
  std::vector<Classification> cls(points);
  for (int i = 0; i < points; ++i) {
    grid[i] = alpha_lo * std::pow(alpha_hi / alpha_lo, double(i) / double(points - 1));
    cls[i] = classify_d(grid[i]);
  }

  std::vector<ProfileCandidate<Real>> found;
  std::vector<detail::Bracket<double>> work;
  for (int i = 0; i + 1 < points; ++i) {
    if (!cls[i].same_signature(cls[i + 1])) work.push_back({grid[i], grid[i + 1], cls[i], cls[i + 1]});
  }

  for (std::size_t w = 0; w < work.size(); ++w) {
    auto br = work[w];
    // Departure radius history, one entry per bisection.
    std::vector<double> radius_hist;
    bool exact_hit = false;
    double hit = 0;
    const double floor_d = std::max(tol, br.lo * 1e-11);
    while (br.hi - br.lo > floor_d) {
      const double mid = 0.5 * (br.lo + br.hi);
      const Classification cm = classify_d(mid);
      if (cm.outcome == Outcome::GlobalPositive) {
        exact_hit = true;
        hit = mid;
        break;
      }
      if (cm.same_signature(br.c_lo)) {
        br.lo = mid;
        br.c_lo = cm;
      } else if (cm.same_signature(br.c_hi)) {
        br.hi = mid;
        br.c_hi = cm;
      } else {
        work.push_back({mid, br.hi, cm, br.c_hi});
        br.hi = mid;
        br.c_hi = cm;
      }
      radius_hist.push_back(std::min(br.c_lo.radius, br.c_hi.radius));
    }

    ProfileCandidate<Real> cand;
    Real lo(br.lo), hi(br.hi);
    Classification c_lo = br.c_lo, c_hi = br.c_hi;
    if (!exact_hit && tol < floor_d && !std::is_same_v<Real, double>) {
      // Continue in extended precision.
      const Real rtol(tol);
      const Real ytol = Real(1e-40) < rtol * Real(1e-20) ? Real(1e-40) : rtol * Real(1e-20);
      const Real scan_tol = ytol < Real(1e-50) ? Real(1e-50) : ytol;
      auto classify_r = [&](const Real& a) { return classify_alpha<Real>(n, a, Real(opt.scan_y_max), scan_tol); };
      c_lo = classify_r(lo);
      c_hi = classify_r(hi);
      while (hi - lo > rtol && !c_lo.same_signature(c_hi)) {
        const Real mid = (lo + hi) / Real(2);
        const Classification cm = classify_r(mid);
        if (cm.outcome == Outcome::GlobalPositive) {
          lo = hi = mid;
          break;
        }
        if (cm.same_signature(c_lo)) {
          lo = mid;
          c_lo = cm;
        } else {
          hi = mid;
          c_hi = cm;
        }
        radius_hist.push_back(std::min(c_lo.radius, c_hi.radius));
      }
    }
    if (exact_hit) {
      cand.alpha = Real(hit);
      cand.bracket = 0;
      cand.validated_radius = opt.scan_y_max;
      found.push_back(cand);
      continue;
    }

    // Diverging departure radius distinguishes a profile from a grazing
    // boundary, whose radius converges to the graze point.
    if (radius_hist.size() < 16) continue;
    const double r_now = radius_hist.back();
    const double r_then = radius_hist[radius_hist.size() - 14];
    if (r_now - r_then < opt.min_radius_growth) continue;

    cand.alpha = (lo + hi) / Real(2);
    cand.bracket = to_double((hi - lo) / Real(2));
    // Back off from the departure radius until the e^{y^2/4} growth of the
    // bracket error has 1e10 in hand.
    const double r_dep = std::min(c_lo.radius, c_hi.radius);
    const double validate_to = std::sqrt(std::max(r_dep * r_dep - 4.0 * std::log(1e10), 0.25 * r_dep * r_dep));
    const Real vtol = std::is_same_v<Real, double> ? Real(opt.scan_tol) : Real(1e-50);
    const Classification check = classify_alpha<Real>(n, cand.alpha, Real(validate_to), vtol);
    if (check.outcome != Outcome::GlobalPositive) continue;
    cand.validated_radius = validate_to;
    found.push_back(cand);
  }

  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.alpha < b.alpha; });
  if (max_count >= 0 && found.size() > std::size_t(max_count)) found.resize(std::size_t(max_count));
  return found;
}

// ---------------------------------------------------------------------------
// Regular steady state W1 and the singular one W* = 2 / r^2

struct SteadyStatePair {
  int n = 3;
  std::vector<double> r;
  std::vector<double> w1;
  std::vector<double> dw1;
  /// W*(r) = 2 / r^2; NaN at r = 0.
  std::vector<double> wstar;
  /// r^2 (W1 - W*): same sign as W1 - W*, free of cancellation at large r.
  std::vector<double> scaled_gap;
  /// Sign-change radii of W1 - W*, increasing.
  std::vector<double> zeros;
  /// Dense re-sampler for r^2 (W1 - W*), used for refinement.
  DifferenceSampler gap_at;
};

/// Integrates W1'' + (n+1)/r W1' + n W1^2 + r W1 W1' = 0, W1(0) = 1,
/// W1'(0) = 0 on [0, r_max]. Near the origin in r; beyond r = 1 through the
/// deviation r^2 W1 - 2 in log r, which keeps W1 - W* resolvable.
inline SteadyStatePair integrate_W1(int n, double r_max, double tol, int samples_per_unit_log = 400) {
  if (n < 3) throw InvalidInput("integrate_W1 requires n >= 3");
  if (!(r_max > 0)) throw InvalidInput("integrate_W1 requires r_max > 0");
  SteadyStatePair out;
  out.n = n;
  const double r_switch = std::min(1.0, r_max);

  // Phase 1: r in [0, r_switch].
  TaylorStepper<double, SteadyField<double>> inner(SteadyField<double>{n}, tol, 1e-8);
  std::vector<TaylorPatch<double>> inner_patches;
  double r = 0, w = 1, dw = 0;
  while (r < r_switch) {
    auto p = inner.step(r, w, dw, r_switch - r);
    if (p.h < 1e-14) throw NumericalInconsistency("W1 integration stalled near origin");
    inner_patches.push_back(p);
    r += p.h;
    w = p.value(p.h);
    dw = p.derivative(p.h);
  }
  auto inner_eval = [&](double at) {
    std::size_t k = 0;
    while (k + 1 < inner_patches.size() && inner_patches[k + 1].x0 <= at) ++k;
    const auto& p = inner_patches[k];
    return std::array<double, 2>{p.value(at - p.x0), p.derivative(at - p.x0)};
  };
  const int n_inner = 200;
  for (int i = 0; i <= n_inner; ++i) {
    const double rr = r_switch * double(i) / n_inner;
    if (i == n_inner && r_max > r_switch) break;
    const auto e = inner_eval(rr);
    out.r.push_back(rr);
    out.w1.push_back(e[0]);
    out.dw1.push_back(e[1]);
    out.scaled_gap.push_back(rr * rr * e[0] - 2.0);
  }

  // Phase 2: s = log r in [0, log r_max], v = r^2 W1 - 2.
  std::vector<TaylorPatch<double>> outer_patches;
  if (r_max > r_switch) {
    TaylorStepper<double, SteadyGapField<double>> outer(SteadyGapField<double>{n}, tol, 1e-300);
    double s = std::log(r_switch), s_end = std::log(r_max);
    double v = r_switch * r_switch * w - 2.0;
    double dv = 2 * r_switch * r_switch * w + r_switch * r_switch * r_switch * dw;  // d(r^2 W)/ds
    const double ds_out = 1.0 / samples_per_unit_log;
    std::size_t next = 0;
    const double s_begin = s;
    while (s < s_end) {
      auto p = outer.step(s, v, dv, std::min(s_end - s, 0.5));
      if (p.h < 1e-14) throw NumericalInconsistency("W1 integration stalled in log variable");
      outer_patches.push_back(p);
      while (true) {
        const double ss = s_begin + double(next) * ds_out;
        if (ss > s + p.h + 1e-15 || ss > s_end + 1e-15) break;
        const double t = ss - s;
        const double vv = p.value(t), dvv = p.derivative(t);
        const double rr = std::exp(ss);
        out.r.push_back(rr);
        out.w1.push_back((2.0 + vv) / (rr * rr));
        out.dw1.push_back((dvv - 2.0 * (2.0 + vv)) / (rr * rr * rr));
        out.scaled_gap.push_back(vv);
        ++next;
      }
      s += p.h;
      v = p.value(p.h);
      dv = p.derivative(p.h);
    }
  }

  out.wstar.resize(out.r.size());
  for (std::size_t i = 0; i < out.r.size(); ++i)
    out.wstar[i] = out.r[i] > 0 ? 2.0 / (out.r[i] * out.r[i]) : std::numeric_limits<double>::quiet_NaN();

  // Dense sampler shares the patches.
  auto ip = std::make_shared<std::vector<TaylorPatch<double>>>(std::move(inner_patches));
  auto op = std::make_shared<std::vector<TaylorPatch<double>>>(std::move(outer_patches));
  out.gap_at = [ip, op](double rr) {
    auto find = [](const std::vector<TaylorPatch<double>>& ps, double x) -> const TaylorPatch<double>& {
      std::size_t lo = 0, hi = ps.size();
      while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (ps[mid].x0 <= x) lo = mid; else hi = mid;
      }
      return ps[lo];
    };
    if (op->empty() || rr <= 1.0) {
      const auto& p = find(*ip, rr);
      return rr * rr * p.value(rr - p.x0) - 2.0;
    }
    const double s = std::log(rr);
    const auto& p = find(*op, s);
    return p.value(s - p.x0);
  };

  // Positivity and monotonicity of W1.
  for (std::size_t i = 0; i < out.r.size(); ++i) {
    if (!(out.w1[i] > 0)) throw NumericalInconsistency("W1 lost positivity at r = " + std::to_string(out.r[i]));
    if (out.dw1[i] > 1e3 * tol * std::max(1.0, std::abs(out.w1[i]))) {
      throw NumericalInconsistency("W1 increasing at r = " + std::to_string(out.r[i]));
    }
  }

  // Zero radii from sign changes of the gap, refined on the dense output.
  for (std::size_t i = 1; i < out.r.size(); ++i) {
    const double a = out.scaled_gap[i - 1], b = out.scaled_gap[i];
    if (a == 0.0 || b == 0.0 || (a > 0) == (b > 0)) continue;
    double lo = out.r[i - 1], hi = out.r[i];
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((out.gap_at(mid) > 0) == (a > 0)) lo = mid; else hi = mid;
    }
    out.zeros.push_back(0.5 * (lo + hi));
  }
  return out;
}

/// Zero number of W1 - W* on [a, b] from the sampled pair.
inline int count_w1_intersections(const SteadyStatePair& pair, Interval interval, double refine_tol = 0.0) {
  std::vector<double> zero(pair.r.size(), 0.0);
  return count_intersections(pair.r, pair.scaled_gap, zero, interval, refine_tol, pair.gap_at);
}

}  // namespace kslab::profiles

#endif  // KSLAB_PROFILES_HPP
