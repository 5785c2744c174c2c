// kslab <command> --config path [--key value ...]

#include "kslab/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

using kslab::app::ExitCode;

int dispatch(const std::string& command, const std::string& config_path, const std::vector<std::string>& sets,
             const std::vector<std::string>& extras) {
  namespace fs = std::filesystem;
  kslab::cfg::Config cfg;
  fs::path base_dir;
  if (!config_path.empty()) {
    cfg = kslab::cfg::Config::load(config_path);
    base_dir = fs::path(config_path).parent_path();
  }
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw kslab::InvalidInput("--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string k = extras[i];
    if (k.rfind("--", 0) != 0) throw kslab::InvalidInput("unexpected argument '" + k + "'");
    k = k.substr(2);
    const auto eq = k.find('=');
    if (eq != std::string::npos) {
      cfg.set(k.substr(0, eq), k.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw kslab::InvalidInput("override --" + k + " lacks a value");
      cfg.set(k, extras[++i]);
    }
  }
  if (command == "sweep") return kslab::app::run_sweep(cfg, base_dir);
  cfg.set("command", command);
  const auto exp = kslab::app::make_experiment(cfg, base_dir);
  return kslab::app::run_pipeline(exp);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radial Keller-Segel blow-up laboratory"};
  app.set_version_flag("--version", kslab::app::version());
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  std::string chosen;
  const std::pair<const char*, const char*> commands[] = {
      {"profiles", "shoot self-similar profiles and write the atlas"},
      {"simulate", "evolve the mass function to blow-up"},
      {"rescale", "simulate, then test convergence in similarity variables"},
      {"verify", "simulate, rescale and write the blow-up report"},
      {"sweep", "run the cartesian grid of sweep.<key> lists"},
      {"all", "verify and keep every artifact"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config,-c", config_path, "configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "override key=value");
    sub->allow_extras();
    sub->callback([&chosen, name]() { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ExitCode::kUsage;
  }
  std::vector<std::string> extras;
  for (auto* sub : app.get_subcommands()) {
    const auto rem = sub->remaining();
    extras.insert(extras.end(), rem.begin(), rem.end());
  }
  try {
    return dispatch(chosen, config_path, sets, extras);
  } catch (const kslab::app::StageError& e) {
    std::cerr << "kslab: " << e.what() << '\n';
    return e.code();
  } catch (const kslab::InvalidInput& e) {
    std::cerr << "kslab: " << e.what() << '\n';
    return ExitCode::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "kslab: " << e.what() << '\n';
    return ExitCode::kSolverFailure;
  }
}
