#ifndef KSLAB_ATLAS_HPP
#define KSLAB_ATLAS_HPP

// Atlas of computed profiles per dimension, and its flat text form:
//
//   # atlas-v1
//   n alpha classification r_alpha_or_ystar lambda lambda_err sup_y2psi
//
// alpha is written with 40 significant digits so that a profile can be
// re-integrated from the file alone.

#include "kslab/profiles.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace kslab::atlas {

struct Record {
  int n = 3;
  Precise alpha;
  profiles::Classification classification;
  /// NaN / infinity when no finite limit exists.
  double lambda = std::numeric_limits<double>::infinity();
  double lambda_err = 0;
  double sup_y2psi = std::numeric_limits<double>::infinity();
  /// Radius out to which the profile was integrated.
  double y_reach = 0;
  bool constant = false;
};

struct Entry {
  Record record;
  profiles::ProfileCurve curve;
};

struct AtlasOptions {
  double alpha_lo = 0.01;
  double alpha_hi = 100.0;
  int max_count = -1;
  /// Bracket width for the profile values.
  double tol = 1e-28;
  profiles::FindOptions find;
};

/// Integrates the profile at `alpha` as far as it stays positive (at most
/// y_max) and attaches the far field.
inline Entry make_entry(int n, const Precise& alpha, double y_max) {
  using namespace profiles;
  const Precise ytol(1e-50);
  ProfileParams<Precise> p{n, alpha, Precise(y_max), ytol, 0.01};
  auto sol = integrate_profile(p);
  if (sol.classification.outcome != Outcome::GlobalPositive) {
    p.y_max = Precise(0.95 * sol.classification.radius);
    sol = integrate_profile(p);
  }
  if (sol.classification.outcome != Outcome::GlobalPositive)
    throw NumericalInconsistency("profile candidate does not re-validate as GlobalPositive");
  Entry e;
  e.record.n = n;
  e.record.alpha = alpha;
  e.record.classification = sol.classification;
  e.record.y_reach = sol.y_end();
  const Precise inv_n = Precise(1) / Precise(n);
  using std::abs;
  e.record.constant = abs(alpha - inv_n) < Precise(1e-30);
  std::optional<LambdaEstimate> tail;
  try {
    tail = compute_lambda(sol);
    e.record.lambda = tail->value;
    e.record.lambda_err = tail->error;
  } catch (const NoFiniteLimit&) {
    e.record.lambda = std::numeric_limits<double>::infinity();
    e.record.lambda_err = 0;
  }
  const auto dec = check_quadratic_decay(sol);
  e.record.sup_y2psi = dec.unbounded ? std::numeric_limits<double>::infinity() : dec.sup_y2psi;
  if (tail) e.record.sup_y2psi = std::max(e.record.sup_y2psi, tail->value);
  e.curve = e.record.constant ? ProfileCurve::constant(n) : ProfileCurve::from_solution(sol, tail);
  return e;
}

inline std::vector<Entry> build(int n, const AtlasOptions& opt = {}) {
  const auto cands =
      profiles::find_profiles<Precise>(n, opt.alpha_lo, opt.alpha_hi, opt.max_count, opt.tol, opt.find);
  std::vector<Entry> out;
  for (const auto& c : cands) {
    // A bracket around 1/n is the constant profile itself.
    Precise a = c.alpha;
    const Precise inv_n = Precise(1) / Precise(n);
    using std::abs;
    if (abs(a - inv_n) <= Precise(std::max(1e3 * c.bracket, 1e-10))) a = inv_n;
    const double reach = std::max(c.validated_radius, 1.0);
    out.push_back(make_entry(n, a, reach));
  }
  return out;
}

inline std::string format_alpha(const Precise& a) {
  std::ostringstream os;
  os << std::setprecision(40) << a;
  return os.str();
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

inline void write(std::ostream& os, const std::vector<Record>& records) {
  os << "# atlas-v1\n";
  os << "n\talpha\tclassification\tr_alpha_or_ystar\tlambda\tlambda_err\tsup_y2psi\n";
  for (const auto& r : records) {
    os << r.n << '\t' << format_alpha(r.alpha) << '\t' << r.classification.tag() << '\t'
       << format_double(r.classification.radius) << '\t' << format_double(r.lambda) << '\t'
       << format_double(r.lambda_err) << '\t' << format_double(r.sup_y2psi) << '\n';
  }
}

inline std::vector<Record> read(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# atlas-v1", 0) != 0) throw InvalidInput("not an atlas-v1 file");
  if (!std::getline(is, line)) throw InvalidInput("atlas file lacks a column header");
  std::vector<Record> out;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Record r;
    std::string alpha, cls, radius, lambda, lerr, sup;
    if (!(ls >> r.n >> alpha >> cls >> radius >> lambda >> lerr >> sup)) throw InvalidInput("malformed atlas row: " + line);
    r.alpha = Precise(alpha);
    if (cls == "GlobalPositive") r.classification.outcome = profiles::Outcome::GlobalPositive;
    else if (cls == "TouchesZero") r.classification.outcome = profiles::Outcome::TouchesZero;
    else r.classification.outcome = profiles::Outcome::OdeBlowup;
    r.classification.radius = std::stod(radius);
    r.lambda = std::stod(lambda);
    r.lambda_err = std::stod(lerr);
    r.sup_y2psi = std::stod(sup);
    r.y_reach = r.classification.radius;
    r.constant = std::abs(to_double(r.alpha) - 1.0 / r.n) < 1e-12;
    out.push_back(r);
  }
  return out;
}

/// Rebuilds entries (curves included) from records of one dimension.
inline std::vector<Entry> load_entries(const std::vector<Record>& records, int n) {
  std::vector<Entry> out;
  for (const auto& r : records) {
    if (r.n != n) continue;
    Precise a = r.alpha;
    if (r.constant) a = Precise(1) / Precise(n);
    out.push_back(make_entry(n, a, std::max(r.y_reach, 1.0)));
  }
  return out;
}

}  // namespace kslab::atlas

#endif  // KSLAB_ATLAS_HPP
