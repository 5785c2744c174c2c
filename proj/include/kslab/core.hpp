#ifndef KSLAB_CORE_HPP
#define KSLAB_CORE_HPP

// Shared vocabulary for the kslab headers: error types, the extended
// precision scalar used by the profile shooter, and a few numerical helpers
// (tridiagonal solve, monotone interpolation, least squares line fit).

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kslab {

/// 64 significant decimal digits. Enough to follow the decaying profiles
/// through the e^{y^2/4} amplification of the shooting problem out to y = 20.
using Precise = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<64>,
                                              boost::multiprecision::et_off>;

inline constexpr double kPi = 3.14159265358979323846;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Taylor step size collapsed before any classification event fired.
class IntegrationStalled : public Error {
 public:
  IntegrationStalled(const std::string& what, double y, double psi, double dpsi)
      : Error(what), y_(y), psi_(psi), dpsi_(dpsi) {}
  double y() const { return y_; }
  double psi() const { return psi_; }
  double dpsi() const { return dpsi_; }

 private:
  double y_, psi_, dpsi_;
};

class NoFiniteLimit : public Error {
 public:
  NoFiniteLimit(const std::string& what, double last_w) : Error(what), last_w_(last_w) {}
  double last_value() const { return last_w_; }

 private:
  double last_w_;
};

class NumericalInconsistency : public Error {
 public:
  using Error::Error;
};

class AmbiguousZero : public Error {
 public:
  AmbiguousZero(const std::string& what, double location) : Error(what), location_(location) {}
  double location() const { return location_; }

 private:
  double location_;
};

class SolverDiverged : public Error {
 public:
  SolverDiverged(const std::string& what, double t) : Error(what), t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

template <class Real>
double to_double(const Real& x) {
  return static_cast<double>(x);
}

// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored. Returns false on
// a vanishing pivot.
inline bool solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                              std::span<const double> upper, std::span<double> rhs) {
  const std::size_t n = diag.size();
  if (n == 0) return true;
  std::vector<double> c(n);
  double pivot = diag[0];
  if (pivot == 0.0 || !std::isfinite(pivot)) return false;
  c[0] = upper[0] / pivot;
  rhs[0] /= pivot;
  for (std::size_t i = 1; i < n; ++i) {
    pivot = diag[i] - lower[i] * c[i - 1];
    if (pivot == 0.0 || !std::isfinite(pivot)) return false;
    c[i] = (i + 1 < n) ? upper[i] / pivot : 0.0;
    rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
  return true;
}

/// Piecewise cubic Hermite interpolant with Fritsch-Carlson slopes. Preserves
/// monotonicity of the data, which keeps rescaled mass profiles monotone.
class MonotoneInterpolant {
 public:
  MonotoneInterpolant() = default;
  MonotoneInterpolant(std::vector<double> x, std::vector<double> f) : x_(std::move(x)), f_(std::move(f)) {
    if (x_.size() != f_.size() || x_.size() < 2) throw InvalidInput("interpolant needs >= 2 matching samples");
    const std::size_t n = x_.size();
    std::vector<double> delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = (f_[i + 1] - f_[i]) / (x_[i + 1] - x_[i]);
    d_.assign(n, 0.0);
    d_[0] = delta[0];
    d_[n - 1] = delta[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) {
        d_[i] = 0.0;
      } else {
        const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
        const double w1 = 2 * h1 + h0, w2 = h1 + 2 * h0;
        d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
      }
    }
  }

  double front() const { return x_.front(); }
  double back() const { return x_.back(); }

  double operator()(double x) const {
    if (x <= x_.front()) return f_.front();
    if (x >= x_.back()) return f_.back();
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * f_[i] + (t3 - 2 * t2 + t) * h * d_[i] + (-2 * t3 + 3 * t2) * f_[i + 1] +
           (t3 - t2) * h * d_[i + 1];
  }

 private:
  std::vector<double> x_, f_, d_;
};

/// Cubic Hermite interpolation from values and exact derivatives.
inline double hermite_eval(std::span<const double> x, std::span<const double> f, std::span<const double> df,
                           double at) {
  if (at <= x.front()) return f.front();
  if (at >= x.back()) return f.back();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const std::size_t i = static_cast<std::size_t>(it - x.begin()) - 1;
  const double h = x[i + 1] - x[i];
  const double t = (at - x[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * f[i] + (t3 - 2 * t2 + t) * h * df[i] + (-2 * t3 + 3 * t2) * f[i + 1] +
         (t3 - t2) * h * df[i + 1];
}

struct LineFit {
  double intercept = 0;
  double slope = 0;
  double rms_residual = 0;
  double slope_stderr = 0;
  double intercept_stderr = 0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw InvalidInput("line fit needs >= 2 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / double(n));
  if (n > 2) {
    const double s2 = ss / double(n - 2);
    fit.slope_stderr = std::sqrt(s2 / sxx);
    fit.intercept_stderr = std::sqrt(s2 * (1.0 / double(n) + mx * mx / sxx));
  }
  return fit;
}

/// Central difference on a nonuniform grid, one-sided (second order) at the ends.
inline std::vector<double> nonuniform_derivative(std::span<const double> x, std::span<const double> f) {
  const std::size_t n = x.size();
  std::vector<double> d(n, 0.0);
  if (n < 3) {
    if (n == 2) d[0] = d[1] = (f[1] - f[0]) / (x[1] - x[0]);
    return d;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
    d[i] = (-h1 / (h0 * (h0 + h1))) * f[i - 1] + ((h1 - h0) / (h0 * h1)) * f[i] + (h0 / (h1 * (h0 + h1))) * f[i + 1];
  }
  {
    const double h0 = x[1] - x[0], h1 = x[2] - x[1];
    d[0] = (-(2 * h0 + h1) / (h0 * (h0 + h1))) * f[0] + ((h0 + h1) / (h0 * h1)) * f[1] - (h0 / (h1 * (h0 + h1))) * f[2];
  }
  {
    const std::size_t m = n - 1;
    const double h0 = x[m - 1] - x[m - 2], h1 = x[m] - x[m - 1];
    d[m] = (h1 / (h0 * (h0 + h1))) * f[m - 2] - ((h0 + h1) / (h0 * h1)) * f[m - 1] + ((2 * h1 + h0) / (h1 * (h0 + h1))) * f[m];
  }
  return d;
}

}  // namespace kslab

#endif  // KSLAB_CORE_HPP
