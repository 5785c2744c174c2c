#ifndef KSLAB_SYNTHESIZE_HPP
#define KSLAB_SYNTHESIZE_HPP

// Exact self-similar trajectories w(r, t) = (T - t)^{-1} Psi(r / sqrt(T - t))
// sampled on a radial grid, for regression of the downstream analysis.

#include "kslab/profiles.hpp"
#include "kslab/radial_pde.hpp"

namespace kslab::synth {

/// Frames at T - t = tau_first * q^k down to tau_last, q chosen so that there
/// are `frames` of them. History mirrors the frames.
inline pde::Trajectory self_similar(const profiles::ProfileCurve& psi, const pde::RadialGrid& grid, double T,
                                    double tau_first, double tau_last, int frames) {
  if (!(tau_first > tau_last && tau_last > 0 && T >= tau_first)) throw InvalidInput("need T >= tau_first > tau_last > 0");
  if (frames < 3) throw InvalidInput("need >= 3 frames");
  pde::Trajectory traj;
  traj.config.n = grid.n;
  traj.config.R = grid.R;
  const double q = std::pow(tau_last / tau_first, 1.0 / (frames - 1));
  double prev_t = 0;
  for (int k = 0; k < frames; ++k) {
    const double tau = tau_first * std::pow(q, k);
    const double sq = std::sqrt(tau);
    pde::MassState s;
    s.t = T - tau;
    s.w.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) s.w[i] = psi.psi(grid.r[i] / sq) / tau;
    s.m = s.w[0];
    s.mu = s.w.back();
    const auto u = pde::recover_u(s, grid);
    traj.history.push_back({s.t, s.m, k == 0 ? 0.0 : s.t - prev_t, pde::mass_integral(u, grid)});
    prev_t = s.t;
    traj.frames.push_back(std::move(s));
  }
  traj.events.push_back("synthesized self-similar trajectory");
  return traj;
}

/// Spatially flat solution w = (n (T - t))^{-1} with the same frame layout.
inline pde::Trajectory flat(const pde::RadialGrid& grid, double T, double tau_first, double tau_last, int frames) {
  return self_similar(profiles::ProfileCurve::constant(grid.n), grid, T, tau_first, tau_last, frames);
}

}  // namespace kslab::synth

#endif  // KSLAB_SYNTHESIZE_HPP
