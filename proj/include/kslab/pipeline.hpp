#ifndef KSLAB_PIPELINE_HPP
#define KSLAB_PIPELINE_HPP

// Experiment orchestration: config -> (profiles | simulate -> rescale ->
// verify) -> artifacts, plus cartesian sweeps over config overrides.

#include "kslab/asymptotics.hpp"
#include "kslab/atlas.hpp"
#include "kslab/config.hpp"
#include "kslab/io.hpp"
#include "kslab/similarity.hpp"
#include "kslab/synthesize.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <mutex>
#include <thread>

#ifndef KSLAB_VERSION
#define KSLAB_VERSION "0.1.0"
#endif

namespace kslab::app {

namespace fs = std::filesystem;
using io::json;

enum ExitCode : int { kSuccess = 0, kUsage = 1, kSolverFailure = 2, kVerificationFailure = 3 };

inline const char* version() { return "kslab-" KSLAB_VERSION; }

/// Error raised by a pipeline stage; carries the stage and last artifact.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what, const std::string& artifact, int code)
      : Error(stage + ": " + what + (artifact.empty() ? "" : " (last artifact: " + artifact + ")")), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

// ---------------------------------------------------------------------------
// Experiment configuration

struct Experiment {
  std::string command = "all";
  int n = 3;
  pde::Mode mode = pde::Mode::Ball;
  double R = 1;
  std::string data = "gaussian";
  double c = 1, A = 20, sigma = 1, kappa = 1, ell = 1;
  std::string data_path;
  std::string synth_profile = "u0";
  double synth_T = 1, synth_tau_first = 0.5, synth_tau_last = 1e-6;
  int synth_frames = 400;
  pde::SolverConfig solver;
  fs::path out = "out";
  int frame_files = 20;

  std::vector<int> dims;
  double alpha_lo = 0.01, alpha_hi = 100, profile_tol = 1e-28;
  int max_count = -1;
  double w1_rmax = 200;
  fs::path atlas_path;

  double Y_max = 20, Y_check = 10, s_span = 4;
  int cells = 400, max_states = 60;

  double rho = 0.01, rho_two = 0.01, delta_factor = 1e3, frozen_tol = 0.01, eta = 0.01;
  double eps_tol = 0.05, ratio_max = 50, L_tol = 0.1;

  std::string config_hash;
};

inline Experiment make_experiment(const cfg::Config& c, const fs::path& base_dir = {}) {
  Experiment e;
  e.config_hash = c.hash_hex();
  e.command = c.str("command", "all");
  static const std::vector<std::string> commands{"profiles", "simulate", "rescale", "verify", "sweep", "all"};
  if (std::find(commands.begin(), commands.end(), e.command) == commands.end())
    throw InvalidInput("unknown command '" + e.command + "'");
  e.n = c.integer("n", 3);
  if (e.n < 3) throw InvalidInput("n must be >= 3");
  const auto mode = c.str("mode", "ball");
  if (mode == "ball") e.mode = pde::Mode::Ball;
  else if (mode == "whole") e.mode = pde::Mode::TruncatedWholeSpace;
  else throw InvalidInput("mode must be ball or whole");
  e.R = c.num("R", 1.0);
  e.data = c.str("data", "gaussian");
  static const std::vector<std::string> families{"constant", "gaussian", "scaled_u0", "file", "self_similar"};
  if (std::find(families.begin(), families.end(), e.data) == families.end())
    throw InvalidInput("unknown data family '" + e.data + "'");
  e.c = c.num("data.c", 1.0);
  e.A = c.num("data.A", 20.0);
  e.sigma = c.num("data.sigma", 1.0);
  e.kappa = c.num("data.kappa", 1.0);
  e.ell = c.num("data.ell", 1.0);
  e.data_path = c.str("data.path", "");
  if (!e.data_path.empty() && fs::path(e.data_path).is_relative() && !base_dir.empty())
    e.data_path = (base_dir / e.data_path).string();
  e.synth_profile = c.str("synth.profile", "u0");
  e.synth_T = c.num("synth.T", 1.0);
  e.synth_tau_first = c.num("synth.tau_first", 0.5);
  e.synth_tau_last = c.num("synth.tau_last", 1e-6);
  e.synth_frames = c.integer("synth.frames", 400);
  if (e.c < 0 || e.A < 0 || e.kappa < 0) throw InvalidInput("initial data amplitudes must be nonnegative");
  if (!(e.sigma > 0) || !(e.ell > 0)) throw InvalidInput("data.sigma and data.ell must be positive");

  auto& s = e.solver;
  s.n = e.n;
  s.R = e.R;
  s.mode = e.mode;
  s.h0 = c.num("grid.h0", 1e-4);
  s.growth = c.num("grid.growth", 0.02);
  s.dt_init = c.num("solver.dt_init", 1e-2);
  s.cfl_factor = c.num("solver.cfl", 0.02);
  s.m_stop = c.num("solver.m_stop", 0.0);
  s.m_stop_factor = c.num("solver.m_stop_factor", 1e6);
  s.save_every = c.integer("solver.save_every", 10);
  s.tol = c.num("solver.tol", 1e-9);
  s.max_steps = std::size_t(c.num("solver.max_steps", 2e6));
  s.t_max = c.num("solver.t_max", 1e3);
  s.no_growth_horizon = c.num("solver.no_growth_horizon", 1.0);
  s.diffusion = c.flag("solver.diffusion", true);
  s.validate();

  const char* env = std::getenv("KSLAB_OUT");
  e.out = env && *env ? fs::path(env) : fs::path(c.str("out", "out"));
  e.frame_files = c.integer("output.frame_files", 20);

  for (const auto& d : c.list("profiles.dims")) e.dims.push_back(std::stoi(d));
  if (e.dims.empty()) e.dims.push_back(e.n);
  for (int d : e.dims)
    if (d < 3) throw InvalidInput("profiles.dims entries must be >= 3");
  e.alpha_lo = c.num("profiles.alpha_lo", 0.01);
  e.alpha_hi = c.num("profiles.alpha_hi", 100.0);
  if (!(e.alpha_lo > 0 && e.alpha_lo < e.alpha_hi)) throw InvalidInput("need 0 < profiles.alpha_lo < profiles.alpha_hi");
  e.profile_tol = c.num("profiles.tol", 1e-28);
  e.max_count = c.integer("profiles.max_count", -1);
  e.w1_rmax = c.num("profiles.w1_rmax", 200.0);
  const auto ap = c.str("atlas.path", "");
  if (!ap.empty()) e.atlas_path = fs::path(ap).is_relative() && !base_dir.empty() ? base_dir / ap : fs::path(ap);

  e.Y_max = c.num("similarity.Y_max", 20.0);
  e.Y_check = c.num("similarity.Y_check", 10.0);
  e.s_span = c.num("similarity.s_span", 4.0);
  e.cells = c.integer("similarity.cells", 400);
  e.max_states = c.integer("similarity.max_states", 60);
  if (!(e.Y_check > 0 && e.Y_check <= e.Y_max)) throw InvalidInput("need 0 < Y_check <= Y_max");

  e.rho = c.num("check.rho", 0.01);
  e.rho_two = c.num("check.rho_two", e.rho);
  e.delta_factor = c.num("check.delta_factor", 1e3);
  e.frozen_tol = c.num("check.frozen_tol", 0.01);
  e.eta = c.num("check.eta", e.rho);
  e.eps_tol = c.num("check.eps_tol", 0.05);
  e.ratio_max = c.num("check.ratio_max", 50.0);
  e.L_tol = c.num("check.L_tol", 0.1);
  if (!(e.rho > 0 && e.delta_factor > 0 && e.eta > 0)) throw InvalidInput("check windows must be positive");
  return e;
}

// ---------------------------------------------------------------------------
// Logging sidecar (the only place timestamps appear)

class Log {
 public:
  explicit Log(const fs::path& dir) {
    fs::create_directories(dir);
    os_.open(dir / "run.log", std::ios::app);
  }
  void line(const std::string& msg) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
    std::lock_guard<std::mutex> lock(mu_);
    os_ << buf << ' ' << msg << '\n';
    os_.flush();
  }

 private:
  std::ofstream os_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Stages

inline double initial_u(const Experiment& e, double r) {
  if (e.data == "constant") return e.c;
  if (e.data == "gaussian") return e.A * std::exp(-r * r / (e.sigma * e.sigma));
  if (e.data == "scaled_u0") return e.kappa * profiles::eval_U0(e.n, r / e.ell) / (e.ell * e.ell);
  throw InvalidInput("initial_u: no closed form for data family " + e.data);
}

struct Simulation {
  pde::RadialGrid grid;
  pde::Trajectory traj;
  pde::BlowupEstimate est;
  pde::I2Result i2;
  pde::ConservationReport conservation;
  bool flat = false;
};

inline Simulation simulate(const Experiment& e, Log& log, bool write_files) {
  Simulation sim;
  sim.grid = pde::make_grid(e.n, e.R, e.solver.h0, e.solver.growth, e.mode == pde::Mode::TruncatedWholeSpace);
  if (e.data == "self_similar") {
    const auto curve = e.synth_profile == "flat" ? profiles::ProfileCurve::constant(e.n) : profiles::ProfileCurve::psi0(e.n);
    sim.traj = synth::self_similar(curve, sim.grid, e.synth_T, e.synth_tau_first, e.synth_tau_last, e.synth_frames);
    sim.traj.config = e.solver;
    sim.est.outcome = pde::RunOutcome::Blowup;
    const auto fit = pde::detail::fit_blowup_time(sim.traj.history, e.n);
    sim.est = fit;
    sim.est.outcome = pde::RunOutcome::Blowup;
    sim.flat = e.synth_profile == "flat";
  } else {
    std::vector<double> u0(sim.grid.size());
    if (e.data == "file") {
      const auto [r, u] = io::read_radial_csv(e.data_path);
      const MonotoneInterpolant f(r, u);
      for (std::size_t i = 0; i < u0.size(); ++i) u0[i] = f(sim.grid.r[i]);
    } else {
      for (std::size_t i = 0; i < u0.size(); ++i) u0[i] = initial_u(e, sim.grid.r[i]);
    }
    sim.flat = e.data == "constant";
    sim.i2 = pde::check_i2(u0, sim.grid);
    const auto state = pde::build_mass_from_u0(u0, sim.grid);
    log.line("simulate: n=" + std::to_string(e.n) + " nodes=" + std::to_string(sim.grid.size()));
    auto [traj, est] = pde::run_to_blowup(state, sim.grid, e.solver);
    sim.traj = std::move(traj);
    sim.est = est;
  }
  sim.conservation = pde::check_conservation_and_monotonicity(sim.traj, sim.grid);
  log.line("simulate: outcome=" + pde::to_string(sim.est.outcome) + " steps=" + std::to_string(sim.traj.history.size()));

  if (write_files) {
    io::write_index(e.out / "trajectory.csv", sim.traj, sim.grid, e.config_hash);
    const std::size_t F = sim.traj.frames.size();
    const std::size_t want = std::size_t(std::max(e.frame_files, 2));
    for (std::size_t j = 0; j < std::min(want, F); ++j) {
      const std::size_t k = F <= want ? j : (j * (F - 1)) / (want - 1);
      char name[32];
      std::snprintf(name, sizeof name, "frame_%05zu.csv", k);
      io::write_frame(e.out / "frames" / name, sim.traj.frames[k], sim.grid, e.mode, e.config_hash);
    }
    json j;
    j["config_hash"] = e.config_hash;
    j["version"] = version();
    j["outcome"] = pde::to_string(sim.est.outcome);
    j["T_est"] = sim.est.T_est;
    j["T_err"] = sim.est.T_err;
    j["slope_a"] = sim.est.slope_a;
    j["slope_consistent"] = sim.est.slope_consistent;
    j["fit_points"] = sim.est.fit_points;
    j["steps"] = sim.traj.history.size() - 1;
    j["frames"] = sim.traj.frames.size();
    j["i2_pass"] = sim.i2.pass;
    j["i2_worst"] = sim.i2.worst;
    j["mass_drift_until_1e3"] = sim.conservation.drift_until_1e3;
    j["monotone"] = sim.conservation.monotone;
    j["boundary_influence"] = sim.traj.boundary_influence;
    j["events"] = sim.traj.events;
    io::write_json(e.out / "blowup.json", j);
  }
  return sim;
}

inline std::vector<atlas::Entry> atlas_for(const Experiment& e, int n, Log& log) {
  if (!e.atlas_path.empty()) {
    std::ifstream is(e.atlas_path);
    if (!is) throw InvalidInput("cannot open atlas " + e.atlas_path.string());
    auto entries = atlas::load_entries(atlas::read(is), n);
    if (!entries.empty()) return entries;
    log.line("atlas file has no rows for n=" + std::to_string(n) + "; computing");
  }
  atlas::AtlasOptions opt;
  opt.alpha_lo = e.alpha_lo;
  opt.alpha_hi = e.alpha_hi;
  opt.max_count = e.max_count;
  opt.tol = e.profile_tol;
  return atlas::build(n, opt);
}

struct Rescaling {
  std::vector<sim::RescaledState> states;
  sim::SteadyVerdict verdict;
  bool inconclusive = false;
  std::string note;
  std::optional<atlas::Entry> matched;
};

namespace detail {

inline std::vector<sim::RescaledState> rescale_late_frames(const Experiment& e, const Simulation& s, double T) {
  std::vector<std::size_t> idx;
  const auto& frames = s.traj.frames;
  if (frames.empty() || !(frames.back().t < T)) return {};
  const double s_last = -std::log(T - frames.back().t);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const double tau = T - frames[k].t;
    if (tau > 0 && -std::log(tau) >= s_last - e.s_span) idx.push_back(k);
  }
  std::vector<sim::RescaledState> out;
  const std::size_t want = std::size_t(std::max(e.max_states, 10));
  for (std::size_t j = 0; j < std::min(want, idx.size()); ++j) {
    const std::size_t k = idx.size() <= want ? idx[j] : idx[(j * (idx.size() - 1)) / (want - 1)];
    out.push_back(sim::rescale_frame(frames[k], s.grid, T, e.Y_max, e.cells, long(k)));
  }
  return out;
}

}  // namespace detail

inline Rescaling rescale(const Experiment& e, const Simulation& s, const std::vector<atlas::Entry>& entries, Log& log,
                         bool write_files) {
  Rescaling res;
  if (s.est.outcome != pde::RunOutcome::Blowup) {
    res.inconclusive = true;
    res.note = "no blow-up; nothing to rescale";
    return res;
  }
  std::vector<sim::AtlasEntry> atlas;
  for (const auto& en : entries) atlas.push_back({to_double(en.record.alpha), en.curve});
  sim::SteadyOptions opt;
  opt.Y_check = e.Y_check;

  auto run = [&](double T, sim::SteadyVerdict& v, std::vector<sim::RescaledState>* keep) {
    auto states = detail::rescale_late_frames(e, s, T);
    try {
      v = sim::detect_steady(states, atlas, opt);
    } catch (const InvalidInput& ex) {
      res.inconclusive = true;
      res.note = ex.what();
      v = {};
    }
    if (keep) *keep = std::move(states);
  };
  run(s.est.T_est, res.verdict, &res.states);
  if (s.est.T_err > 0 && !res.inconclusive) {
    sim::SteadyVerdict lo, hi;
    run(s.est.T_est - s.est.T_err, lo, nullptr);
    run(s.est.T_est + s.est.T_err, hi, nullptr);
    res.verdict.t_sensitivity_stable =
        lo.matched_alpha == res.verdict.matched_alpha && hi.matched_alpha == res.verdict.matched_alpha;
  }
  for (const auto& en : entries)
    if (to_double(en.record.alpha) == res.verdict.matched_alpha) res.matched = en;
  log.line("rescale: matched_alpha=" + io::num(res.verdict.matched_alpha) + " error=" + io::num(res.verdict.match_error));

  if (write_files) {
    for (std::size_t j = 0; j < res.states.size(); ++j) {
      char name[32];
      std::snprintf(name, sizeof name, "rescaled_%03zu.csv", j);
      io::write_rescaled(e.out / "rescaled" / name, res.states[j], e.config_hash);
    }
    json j;
    j["converged"] = res.verdict.converged;
    j["tv_origin"] = res.verdict.tv_origin;
    j["steady_residual"] = res.verdict.steady_residual;
    j["matched_alpha"] = res.verdict.matched_alpha;
    j["match_error"] = res.verdict.match_error;
    j["t_sensitivity_stable"] = res.verdict.t_sensitivity_stable;
    j["inconclusive"] = res.inconclusive;
    j["config_hash"] = e.config_hash;
    j["version"] = version();
    io::write_json(e.out / "verdict.json", j);
  }
  return res;
}

struct Report {
  json body;
  bool pass = true;
};

inline Report verify(const Experiment& e, const Simulation& s, const Rescaling& rs) {
  Report rep;
  json& j = rep.body;
  std::map<std::string, std::string> flags;
  auto flag = [&](const std::string& name, int state) {
    flags[name] = state > 0 ? "pass" : (state == 0 ? "fail" : "n/a");
    if (state == 0) rep.pass = false;
  };
  j["version"] = version();
  j["config_hash"] = e.config_hash;
  j["n"] = e.n;
  j["outcome"] = pde::to_string(s.est.outcome);
  j["T_est"] = s.est.T_est;
  j["T_err"] = s.est.T_err;
  if (s.est.outcome != pde::RunOutcome::Blowup) {
    flag("blowup", -1);
    j["flags"] = flags;
    return rep;
  }
  const double T = s.est.T_est;
  const int n = e.n;

  const auto t1 = asym::type_one_check(s.traj, T, s.est.T_err);
  j["type_one"] = {{"M_fit", t1.M_fit}, {"lower", t1.lower}, {"M_half", t1.M_half}, {"points", t1.points}};
  flag("type_one", t1.type_one && t1.lower >= 1.0 - 1e-2);

  const double tau_last = T - s.traj.frames.back().t;
  const double delta = e.delta_factor * tau_last;
  const bool have_match = rs.matched.has_value();
  const double matched_alpha = have_match ? to_double(rs.matched->record.alpha) : std::nan("");
  json mac;
  mac["matched_alpha"] = matched_alpha;
  if (have_match) {
    const auto m = asym::macroscopic_ratio(s.traj, s.grid, rs.matched->curve, T, e.rho, delta);
    mac["eps_sup"] = m.eps_sup;
    mac["decreasing"] = m.decreasing;
    mac["window_shrunk"] = m.window_shrunk;
    mac["rho"] = e.rho;
    mac["delta"] = delta;
    flag("macroscopic", m.points > 0 && m.decreasing && m.eps_sup.back() < e.eps_tol);
  } else {
    mac["eps_sup"] = json::array();
    flag("macroscopic", -1);
  }
  j["macroscopic"] = mac;
  if (!s.flat) flag("nonconstant_match", have_match && !rs.matched->record.constant);
  flag("steady", rs.inconclusive ? -1 : int(rs.verdict.converged));

  const auto ts = asym::two_sided_fit(s.traj, s.grid, T, e.rho_two);
  j["two_sided"] = {{"C1_fit", ts.C1_fit}, {"C2_fit", ts.C2_fit}, {"rho", e.rho_two}};
  if (s.flat) flag("two_sided", -1);
  else flag("two_sided", ts.C1_fit > 0 && ts.C1_fit <= ts.C2_fit && ts.C2_fit / ts.C1_fit < e.ratio_max);

  const auto fp = asym::final_profile_fit(s.traj, s.grid, T, e.frozen_tol);
  json fpj;
  fpj["found"] = fp.found;
  fpj["L_fit"] = fp.L_fit;
  fpj["L_range"] = {fp.L_lo, fp.L_hi};
  fpj["eps_r"] = fp.eps_r;
  const double L_expected = have_match && std::isfinite(rs.matched->record.lambda) ? (n - 2) * rs.matched->record.lambda
                                                                                    : std::nan("");
  fpj["L_expected"] = L_expected;
  j["final_profile"] = fpj;
  if (s.flat) {
    flag("final_profile", -1);
  } else {
    flag("final_profile", fp.found);
    if (fp.found && std::isfinite(L_expected)) flag("L_consistent", std::abs(fp.L_fit - L_expected) / fp.L_fit <= e.L_tol);
  }

  const auto ub = asym::ut_bound_check(s.traj, s.grid, T, e.eta, T - delta);
  j["ut_bound"] = ub.sup;
  j["ut_bound_coarse"] = ub.sup_coarse;
  flag("ut_bound", ub.applicable && !s.flat ? int(ub.stable) : -1);

  j["gradient_bound"] = asym::gradient_bound_check(s.traj, s.grid);
  j["lower_bound_monotone"] = asym::lower_bound_monotone_check(s.traj, s.grid, T, e.rho);
  j["flags"] = flags;
  return rep;
}

// ---------------------------------------------------------------------------

inline int run_profiles(const Experiment& e, Log& log) {
  std::vector<atlas::Record> records;
  json w1 = json::array();
  for (int n : e.dims) {
    atlas::AtlasOptions opt;
    opt.alpha_lo = e.alpha_lo;
    opt.alpha_hi = e.alpha_hi;
    opt.max_count = e.max_count;
    opt.tol = e.profile_tol;
    const auto entries = atlas::build(n, opt);
    for (const auto& en : entries) records.push_back(en.record);
    const auto pair = profiles::integrate_W1(n, e.w1_rmax, 1e-14);
    w1.push_back({{"n", n}, {"r_max", e.w1_rmax}, {"zero_count", pair.zeros.size()}, {"zeros", pair.zeros}});
    log.line("profiles: n=" + std::to_string(n) + " entries=" + std::to_string(entries.size()));
  }
  auto os = io::open_out(e.out / "atlas.txt");
  atlas::write(os, records);
  io::write_json(e.out / "w1.json", {{"config_hash", e.config_hash}, {"version", version()}, {"w1", w1}});
  return kSuccess;
}

/// Executes one configuration. Module errors surface as StageError.
inline int run_pipeline(const Experiment& e) {
  fs::create_directories(e.out);
  Log log(e.out);
  log.line("command=" + e.command + " config_hash=" + e.config_hash);
  std::string stage = "setup", artifact;
  try {
    if (e.command == "profiles") {
      stage = "profiles";
      return run_profiles(e, log);
    }
    const bool full = e.command == "all";
    stage = "simulate";
    const Simulation s = simulate(e, log, e.command == "simulate" || full);
    if (e.command == "simulate") return kSuccess;
    artifact = (e.out / "blowup.json").string();
    stage = "rescale";
    const auto entries = atlas_for(e, e.n, log);
    const Rescaling rs = rescale(e, s, entries, log, true);
    if (e.command == "rescale") return kSuccess;
    artifact = (e.out / "verdict.json").string();
    stage = "verify";
    const Report rep = verify(e, s, rs);
    json body = rep.body;
    body["steady"] = {{"converged", rs.verdict.converged},
                      {"tv_origin", rs.verdict.tv_origin},
                      {"steady_residual", rs.verdict.steady_residual},
                      {"match_error", rs.verdict.match_error}};
    io::write_json(e.out / "report.json", body);
    log.line(std::string("verify: ") + (rep.pass ? "pass" : "fail"));
    return rep.pass ? kSuccess : kVerificationFailure;
  } catch (const InvalidInput& ex) {
    throw StageError(stage, ex.what(), artifact, kUsage);
  } catch (const Error& ex) {
    throw StageError(stage, ex.what(), artifact, kSolverFailure);
  }
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  std::map<std::string, std::string> keys;
  int exit_code = 0;
  std::string message;
  json report;
};

inline bool numeric_less(const std::string& a, const std::string& b) {
  char* ea = nullptr;
  char* eb = nullptr;
  const double da = std::strtod(a.c_str(), &ea), db = std::strtod(b.c_str(), &eb);
  if (*ea == '\0' && *eb == '\0' && !a.empty() && !b.empty()) return da < db;
  return a < b;
}

/// Runs the cartesian product of every `sweep.<key> = v1, v2, ...` entry.
/// Each row runs `sweep_command` (default verify) into its own directory.
inline int run_sweep(const cfg::Config& base, const fs::path& base_dir) {
  const Experiment top = make_experiment(base, base_dir);
  fs::create_directories(top.out);
  Log log(top.out);
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& [k, v] : base.values()) {
    if (k.rfind("sweep.", 0) != 0) continue;
    axes.push_back({k.substr(6), base.list(k)});
  }
  std::vector<std::map<std::string, std::string>> grid;
  if (!axes.empty()) {
    grid.push_back({});
    for (const auto& [key, vals] : axes) {
      std::vector<std::map<std::string, std::string>> next;
      for (const auto& g : grid)
        for (const auto& v : vals) {
          auto h = g;
          h[key] = v;
          next.push_back(h);
        }
      grid = std::move(next);
    }
  }
  std::sort(grid.begin(), grid.end(), [&](const auto& a, const auto& b) {
    for (const auto& [key, vals] : axes) {
      const auto& x = a.at(key);
      const auto& y = b.at(key);
      if (x != y) return numeric_less(x, y);
    }
    return false;
  });

  std::vector<SweepRow> rows(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      SweepRow& row = rows[i];
      row.keys = grid[i];
      cfg::Config c = base;
      for (const auto& [key, vals] : axes) c.erase("sweep." + key);
      for (const auto& [k, v] : grid[i]) c.set(k, v);
      c.set("command", base.str("sweep_command", "verify"));
      c.erase("sweep_command");
      c.erase("workers");
      char dir[32];
      std::snprintf(dir, sizeof dir, "row_%03zu", i);
      c.set("out", (top.out / dir).string());
      try {
        Experiment e = make_experiment(c, base_dir);
        e.out = top.out / dir;
        row.exit_code = run_pipeline(e);
        std::ifstream rj(e.out / "report.json");
        if (rj) row.report = json::parse(rj);
      } catch (const StageError& ex) {
        row.exit_code = ex.code();
        row.message = ex.what();
      } catch (const std::exception& ex) {
        row.exit_code = kUsage;
        row.message = ex.what();
      }
    }
  };
  const int workers = std::max(1, base.integer("workers", 1));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }

  auto get = [](const json& j, std::initializer_list<const char*> path) -> std::string {
    const json* p = &j;
    for (const char* k : path) {
      if (!p->is_object() || !p->contains(k)) return "";
      p = &(*p)[k];
    }
    if (p->is_number()) return io::num(p->get<double>());
    if (p->is_boolean()) return p->get<bool>() ? "true" : "false";
    if (p->is_string()) return p->get<std::string>();
    if (p->is_array() && !p->empty() && p->back().is_number()) return io::num(p->back().get<double>());
    return "";
  };

  auto os = io::open_out(top.out / "sweep.csv");
  os << "# config_hash=" << top.config_hash << '\n';
  for (const auto& [key, vals] : axes) os << key << ',';
  os << "exit_code,outcome,T_est,T_err,M_fit,lower,type_one,matched_alpha,eps_inner,C1_fit,C2_fit,L_fit,message\n";
  std::vector<double> t_est;
  for (const auto& row : rows) {
    for (const auto& [key, vals] : axes) os << row.keys.at(key) << ',';
    std::string msg = row.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    const auto& r = row.report;
    const std::string type_one = r.contains("flags") && r["flags"].contains("type_one") ? r["flags"]["type_one"].get<std::string>() : "";
    const bool blew = get(r, {"outcome"}) == "Blowup";
    os << row.exit_code << ',' << get(r, {"outcome"}) << ',' << (blew ? get(r, {"T_est"}) : "") << ','
       << (blew ? get(r, {"T_err"}) : "") << ','
       << get(r, {"type_one", "M_fit"}) << ',' << get(r, {"type_one", "lower"}) << ',' << type_one << ','
       << get(r, {"macroscopic", "matched_alpha"}) << ',' << get(r, {"macroscopic", "eps_sup"}) << ','
       << get(r, {"two_sided", "C1_fit"}) << ',' << get(r, {"two_sided", "C2_fit"}) << ','
       << get(r, {"final_profile", "L_fit"}) << ',' << msg << '\n';
    t_est.push_back(blew ? r["T_est"].get<double>() : std::numeric_limits<double>::infinity());
  }
  json summary;
  summary["config_hash"] = top.config_hash;
  summary["rows"] = rows.size();
  if (axes.size() == 1) {
    bool mono = true;
    for (std::size_t i = 1; i < t_est.size(); ++i) mono = mono && t_est[i] <= t_est[i - 1];
    summary["t_est_nonincreasing"] = mono;
  }
  io::write_json(top.out / "sweep_summary.json", summary);
  log.line("sweep: rows=" + std::to_string(rows.size()));
  return kSuccess;
}

}  // namespace kslab::app

#endif  // KSLAB_PIPELINE_HPP
