#pragma once

// Run configuration, CSV export and the analysis commands behind the
// `spurt` executable.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spurt/continuation.hpp"
#include "spurt/model.hpp"
#include "spurt/stepper.hpp"

namespace spurt::cli {

struct RunConfig {
  // Physics.
  double re = 0.01;
  double we = 0.1;
  double eta2 = 0.1;
  double a1 = 1.0;
  double a2 = 15.0;
  double a3 = 100.0;

  // Discretization.
  int n_nodes = 801;
  double dt = 1e-5;
  double t_h = 1e-3;

  // Solvers.
  double newton_tol = 1e-8;
  double gmres_tol = 1e-7;
  double eps0 = 1e-6;
  int max_dim = 60;

  // Continuation.
  double ds = 0.01;
  double ds_min = 0.01 / 64;
  double ds_max = 0.05;
  int n_steps = 60;

  // Command ranges.
  double q_lo = 0.30;
  double q_hi = 0.60;
  double t_max = 2.0;
  int k_eigs = 6;
  std::string output_dir = ".";

  // Command specifics.
  double q = 0.45;           ///< stability: flow rate
  double q_init = 0.449;     ///< transient: steady state to start from
  double q_run = 0.45;       ///< transient: imposed flow rate
  int sample_every = 1;      ///< transient/bistability: steps per CSV row
  double vw_max = 0.5;       ///< flow-curve: slip velocity range
  int n_points = 2001;       ///< flow-curve: rows
  double cycle_dt = 1e-4;    ///< bifurcation/bistability: cycle time step
  double q_probe = 0.530;    ///< bistability: unstable cycle location
  double dq_probe = 0.001;   ///< bistability: flow-rate perturbation

  /// Keys given in a file or on the command line.
  std::set<std::string> explicit_keys;

  ModelParams params() const;
  bool is_set(const std::string& key) const { return explicit_keys.count(key) > 0; }
  void validate() const;
};

struct KeyInfo {
  std::string name;
  std::string help;
};

/// Every accepted key with a one-line description.
const std::vector<KeyInfo>& config_keys();

/// Sets one field from its textual value. Throws ConfigError on unknown keys
/// or malformed values.
void set_value(RunConfig& c, const std::string& key, const std::string& value);

/// Parses `key = value` lines with `#` comments. Errors carry
/// `<source>:<line>`.
void parse_config(RunConfig& c, std::istream& in, const std::string& source);
void load_config_file(RunConfig& c, const std::filesystem::path& path);

/// Renders the config in the file format (all keys, current values).
std::string dump_config(const RunConfig& c);

/// Decimal with 15 significant digits.
std::string fmt(double x);

/// Comma-separated table with one header row and LF line ends.
class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);
  void row(const std::vector<std::string>& fields);
  void row(const std::vector<double>& fields);
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
  std::size_t columns_;
  std::ofstream out_;
};

/// Solver settings derived from a run configuration.
SolverConfig solver_config(const RunConfig& c);

/// Grid and time step of the eigenvalue runs and of the cycle runs of
/// `bifurcation`/`bistability`: n_nodes = 201, dt = 1e-5 (eigen) and
/// cycle_dt (cycles) unless n_nodes / dt are set explicitly.
PoiseuilleStepper eigen_stepper(const RunConfig& c);
PoiseuilleStepper cycle_stepper(const RunConfig& c);

/// Everything `bifurcation` computes.
struct BifurcationData {
  std::vector<BranchPoint> steady;
  std::vector<HopfPoint> hopf;        ///< eigen-run resolution, ascending q
  std::vector<HopfPoint> hopf_cycle;  ///< same points at cycle resolution
  /// Cycle segments in order: born at the left Hopf point, the large branch
  /// grown from a transient, born at the right Hopf point.
  std::vector<std::pair<std::string, CycleBranch>> segments;
  std::optional<double> fold_q;
};

/// Progress callback for long runs (stage name, message).
using Log = std::function<void(const std::string&)>;

/// Runs the full bifurcation analysis. Stages fill `out` as they finish, so
/// a caller catching an exception still sees the completed part.
void run_bifurcation(const RunConfig& c, BifurcationData& out, const Log& log = {});

struct BistabilityData {
  HopfPoint hopf;                     ///< right Hopf point, cycle resolution
  CycleBranch approach;               ///< from the Hopf point to q_probe
  std::optional<CyclePoint> unstable; ///< converged at q_probe
  std::optional<BistabilityResult> up, down;
};

void run_bistability(const RunConfig& c, BistabilityData& out, const Log& log = {});

/// Outcome of one command: files written and overall success.
struct CommandResult {
  std::vector<std::filesystem::path> files;
  bool ok = true;
  std::string message;
};

CommandResult cmd_flow_curve(const RunConfig& c);
CommandResult cmd_stability(const RunConfig& c);
CommandResult cmd_transient(const RunConfig& c);
CommandResult cmd_bifurcation(const RunConfig& c, const Log& log = {});
CommandResult cmd_bistability(const RunConfig& c, const Log& log = {});

/// Name of the stability output for a flow rate, e.g. "eigs_q0.413.csv".
std::string eigs_file_name(double q);

} // namespace spurt::cli
