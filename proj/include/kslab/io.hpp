#ifndef KSLAB_IO_HPP
#define KSLAB_IO_HPP

// CSV and JSON emitters. Numbers are written with 17 significant digits so
// that artifacts are byte-identical across identical runs.

#include "kslab/radial_pde.hpp"
#include "kslab/similarity.hpp"

#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace kslab::io {

using json = nlohmann::json;

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

/// One saved frame: columns r, w, u with '#' metadata lines.
inline void write_frame(const std::filesystem::path& p, const pde::MassState& f, const pde::RadialGrid& grid,
                        pde::Mode mode, const std::string& config_hash) {
  auto os = open_out(p);
  const auto u = pde::recover_u(f, grid);
  os << "# t=" << num(f.t) << "\n# n=" << grid.n << "\n# R=" << num(grid.R) << "\n# mode=" << pde::to_string(mode)
     << "\n# config_hash=" << config_hash << "\nr,w,u\n";
  for (std::size_t i = 0; i < grid.size(); ++i) os << num(grid.r[i]) << ',' << num(f.w[i]) << ',' << num(u[i]) << '\n';
}

/// Trajectory index: frame_id, t, m, dt, mass_integral.
inline void write_index(const std::filesystem::path& p, const pde::Trajectory& traj, const pde::RadialGrid& grid,
                        const std::string& config_hash) {
  auto os = open_out(p);
  os << "# config_hash=" << config_hash << "\nframe_id,t,m,dt,mass_integral\n";
  for (std::size_t k = 0; k < traj.frames.size(); ++k) {
    const auto& f = traj.frames[k];
    const double dt = k == 0 ? 0.0 : f.t - traj.frames[k - 1].t;
    const auto u = pde::recover_u(f, grid);
    os << k << ',' << num(f.t) << ',' << num(f.m) << ',' << num(dt) << ',' << num(pde::mass_integral(u, grid)) << '\n';
  }
}

/// Rescaled frame: columns y, phi; header with s, T_est, source frame id.
inline void write_rescaled(const std::filesystem::path& p, const sim::RescaledState& st, const std::string& config_hash) {
  auto os = open_out(p);
  os << "# s=" << num(st.s) << "\n# T_est=" << num(st.T_est) << "\n# source_frame=" << st.source_frame
     << "\n# config_hash=" << config_hash << "\ny,phi\n";
  for (std::size_t i = 0; i < st.y.size(); ++i) os << num(st.y[i]) << ',' << num(st.phi[i]) << '\n';
}

inline void write_json(const std::filesystem::path& p, const json& j) {
  auto os = open_out(p);
  os << j.dump(2) << '\n';
}

/// Reads a two-column CSV (r, u0), skipping '#' lines and a header.
inline std::pair<std::vector<double>, std::vector<double>> read_radial_csv(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw InvalidInput("cannot open data file " + p.string());
  std::vector<double> r, u;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InvalidInput("data file rows need r,u0: " + line);
    try {
      const double a = std::stod(line.substr(0, comma));
      const double b = std::stod(line.substr(comma + 1));
      r.push_back(a);
      u.push_back(b);
    } catch (const std::exception&) {
      if (r.empty()) continue;  // header
      throw InvalidInput("non-numeric data row: " + line);
    }
  }
  if (r.size() < 2) throw InvalidInput("data file needs >= 2 rows");
  return {r, u};
}

}  // namespace kslab::io

#endif  // KSLAB_IO_HPP
