// spurt: command-line driver for the Poiseuille spurt-flow analyses.
//
//   spurt <command> [--config file] [--key value ...]
//
// Exit status: 0 on success, 1 when a solver failed or an output is partial,
// 2 on usage and configuration errors.

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "spurt/cli.hpp"
#include "spurt/errors.hpp"

namespace {

using spurt::cli::CommandResult;
using spurt::cli::RunConfig;

struct Command {
  const char* name;
  const char* help;
  CommandResult (*run)(const RunConfig&);
};

CommandResult run_bifurcation(const RunConfig& c) {
  return spurt::cli::cmd_bifurcation(c, [](const std::string& m) { std::cerr << m << "\n"; });
}

CommandResult run_bistability(const RunConfig& c) {
  return spurt::cli::cmd_bistability(c, [](const std::string& m) { std::cerr << m << "\n"; });
}

const Command kCommands[] = {
    {"flow-curve", "steady flow curve and its extrema", spurt::cli::cmd_flow_curve},
    {"stability", "leading eigenvalues of the steady state at q", spurt::cli::cmd_stability},
    {"transient", "time series from the steady state of q_init run at q_run",
     spurt::cli::cmd_transient},
    {"bifurcation", "steady and periodic branches, Hopf points and cycle fold",
     run_bifurcation},
    {"bistability", "perturbations of the unstable cycle at q_probe", run_bistability},
};

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bifurcation analysis of Oldroyd-B Poiseuille flow with nonmonotonic slip"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every command");
  bool dump = false;

  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> options;
  const Command* chosen = nullptr;

  for (const Command& cmd : kCommands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_flag("--print-config", dump, "print the effective configuration and exit");
    for (const auto& key : spurt::cli::config_keys()) {
      CLI::Option* o = sub->add_option("--" + key.name, overrides[key.name], key.help);
      options[std::string(cmd.name) + "/" + key.name] = o;
    }
    sub->callback([&chosen, &cmd] { chosen = &cmd; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) spurt::cli::load_config_file(cfg, config_path);
    for (const auto& key : spurt::cli::config_keys())
      if (options[std::string(chosen->name) + "/" + key.name]->count() > 0)
        spurt::cli::set_value(cfg, key.name, overrides[key.name]);
    cfg.validate();
  } catch (const spurt::ConfigError& e) {
    std::cerr << "spurt: " << e.what() << "\n";
    return 2;
  }
  if (dump) {
    std::cout << spurt::cli::dump_config(cfg);
    return 0;
  }

  try {
    const CommandResult r = chosen->run(cfg);
    for (const auto& f : r.files) std::cout << f.string() << "\n";
    if (!r.message.empty()) std::cerr << r.message << "\n";
    return r.ok ? 0 : 1;
  } catch (const spurt::ConfigError& e) {
    std::cerr << "spurt: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "spurt: " << chosen->name << " failed: " << e.what() << "\n";
    return 1;
  }
}
