#ifndef KSLAB_TAYLOR_HPP
#define KSLAB_TAYLOR_HPP

// High order Taylor series integration for scalar second order ODEs whose
// right-hand sides are polynomial in (x, v, v'). The field supplies the
// coefficient recursion; the stepper handles order selection, step size and
// dense output. Step control follows Jorba & Zou: order ~ -log(tol)/2 and
// h = rho / e^2, with rho estimated from the last two coefficients.

#include "kslab/core.hpp"

#include <cmath>
#include <vector>

namespace kslab {

/// One accepted step: v(x0 + t) = sum_k c[k] t^k for t in [0, h].
template <class Real>
struct TaylorPatch {
  Real x0;
  Real h;
  std::vector<Real> c;

  Real value(const Real& t) const {
    Real s = c.back();
    for (std::size_t k = c.size() - 1; k-- > 0;) s = s * t + c[k];
    return s;
  }
  Real derivative(const Real& t) const {
    Real s = c.back() * Real(int(c.size() - 1));
    for (std::size_t k = c.size() - 1; k-- > 1;) s = s * t + c[k] * Real(int(k));
    return s;
  }
  Real second_derivative(const Real& t) const {
    const std::size_t m = c.size() - 1;
    Real s = c[m] * Real(int(m * (m - 1)));
    for (std::size_t k = m; k-- > 2;) s = s * t + c[k] * Real(int(k * (k - 1)));
    return s;
  }
  Real x_end() const { return x0 + h; }
};

template <class Real, class Field>
class TaylorStepper {
 public:
  /// `floor` is the magnitude below which the solution is treated as O(floor)
  /// in the relative error test, so steps do not collapse where v crosses 0.
  TaylorStepper(Field field, Real tol, Real floor) : field_(std::move(field)), tol_(tol), floor_(floor) {
    using std::log;
    const double digits = -to_double(log(tol_));
    order_ = std::clamp(int(std::ceil(digits / 2.0)) + 3, 10, 160);
  }

  int order() const { return order_; }
  const Field& field() const { return field_; }

  /// Expands at (x0, v0, d0) and returns a patch of length <= h_max.
  TaylorPatch<Real> step(const Real& x0, const Real& v0, const Real& d0, const Real& h_max) const {
    using std::abs;
    using std::exp;
    using std::pow;
    TaylorPatch<Real> p;
    p.x0 = x0;
    p.c.assign(std::size_t(order_) + 1, Real(0));
    p.c[0] = v0;
    p.c[1] = d0;
    field_.expand(x0, p.c, order_);

    Real scale = abs(p.c[0]);
    if (scale < floor_) scale = floor_;
    Real h = h_max;
    for (int j : {order_ - 1, order_}) {
      const Real a = abs(p.c[std::size_t(j)]);
      if (a > Real(0)) {
        const Real rho = pow(scale / a, Real(1) / Real(j));
        const Real cand = rho / Real(7.38905609893065);  // e^2
        if (cand < h) h = cand;
      }
    }
    // Local error guard: last retained term against tol * scale.
    for (int guard = 0; guard < 60; ++guard) {
      const Real err = abs(p.c[std::size_t(order_)]) * pow(h, order_) + abs(p.c[std::size_t(order_ - 1)]) * pow(h, order_ - 1);
      if (err <= tol_ * scale) break;
      h /= Real(2);
    }
    p.h = h;
    return p;
  }

 private:
  Field field_;
  Real tol_;
  Real floor_;
  int order_ = 20;
};

}  // namespace kslab

#endif  // KSLAB_TAYLOR_HPP
