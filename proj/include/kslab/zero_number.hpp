#ifndef KSLAB_ZERO_NUMBER_HPP
#define KSLAB_ZERO_NUMBER_HPP

// Zero number of a sampled difference f - g on [a, b]: the count of strict
// sign changes, with local re-sampling where a sign excursion is so shallow
// that it could be a near-tangency rather than two genuine crossings.

#include "kslab/core.hpp"

#include <functional>
#include <span>
#include <vector>

namespace kslab {

struct Interval {
  double a;
  double b;
};

/// Re-evaluates f - g at an arbitrary abscissa. Optional.
using DifferenceSampler = std::function<double(double)>;

namespace detail {

inline int sign_of(double v) { return (v > 0) - (v < 0); }

// Resolves a shallow excursion of sign `s` bracketed by [lo, hi]: returns the
// number of crossings it contributes (0 or 2), or throws AmbiguousZero.
inline int resolve_excursion(const DifferenceSampler& sampler, double lo, double hi, int s, double refine_tol,
                             int max_depth) {
  int points = 16;
  for (int depth = 0; depth < max_depth; ++depth, points *= 4) {
    bool saw_run_sign = false;
    bool deep = false;
    for (int k = 1; k < points; ++k) {
      const double x = lo + (hi - lo) * double(k) / double(points);
      const double v = sampler(x);
      if (sign_of(v) == s) {
        saw_run_sign = true;
        if (std::abs(v) > refine_tol) deep = true;
      }
    }
    if (deep) return 2;
    if (!saw_run_sign && depth > 0) return 0;
  }
  throw AmbiguousZero("unresolvable near-tangency of f - g", 0.5 * (lo + hi));
}

}  // namespace detail

/// Counts sign changes of f - g over the samples with x in [a, b]. Exact
/// zeros carry no sign. A run of one sign whose values all lie within
/// refine_tol of 0 and which is flanked by the opposite sign on both sides is
/// refined through `sampler`; without a sampler such a run is ambiguous.
inline int count_intersections(std::span<const double> x, std::span<const double> f, std::span<const double> g,
                               Interval interval, double refine_tol, const DifferenceSampler& sampler = {},
                               int max_depth = 4) {
  if (x.size() != f.size() || x.size() != g.size()) throw InvalidInput("count_intersections: size mismatch");
  struct Signed {
    double x;
    double v;
  };
  std::vector<Signed> seq;
  seq.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < interval.a || x[i] > interval.b) continue;
    const double d = f[i] - g[i];
    if (!std::isfinite(d)) continue;
    if (d != 0.0) seq.push_back({x[i], d});
  }
  if (seq.size() < 2) return 0;

  // Group into maximal runs of constant sign.
  struct Run {
    std::size_t first, last;
    int sign;
    double peak;
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const int s = detail::sign_of(seq[i].v);
    if (runs.empty() || runs.back().sign != s) {
      runs.push_back({i, i, s, std::abs(seq[i].v)});
    } else {
      runs.back().last = i;
      runs.back().peak = std::max(runs.back().peak, std::abs(seq[i].v));
    }
  }

  int count = 0;
  std::size_t r = 0;
  while (r + 1 < runs.size()) {
    const Run& next = runs[r + 1];
    const bool interior = r + 2 < runs.size();
    if (interior && next.peak <= refine_tol) {
      // Shallow excursion next, flanked by runs r and r + 2.
      if (!sampler) throw AmbiguousZero("near-tangency without a re-sampler", seq[next.first].x);
      const double lo = seq[runs[r].last].x;
      const double hi = seq[runs[r + 2].first].x;
      const int crossings = detail::resolve_excursion(sampler, lo, hi, next.sign, refine_tol, max_depth);
      count += crossings;
      if (crossings == 0) {
        // Merge run r + 2 into run r and continue from there.
        runs[r + 2].first = runs[r].first;
        r += 2;
        continue;
      }
      r += 2;
      continue;
    }
    ++count;
    ++r;
  }
  return count;
}

}  // namespace kslab

#endif  // KSLAB_ZERO_NUMBER_HPP
