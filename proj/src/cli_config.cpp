#include "spurt/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <sstream>

#include "spurt/errors.hpp"

namespace spurt::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || ptr != end || !std::isfinite(x))
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  int x = 0;
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  return x;
}

struct Field {
  KeyInfo info;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SPURT_REAL(name, help)                                                  \
  Field{{#name, help},                                                          \
        [](RunConfig& c, const std::string& v) { c.name = to_double(#name, v); }, \
        [](const RunConfig& c) { return fmt(c.name); }}
#define SPURT_INT(name, help)                                                   \
  Field{{#name, help},                                                          \
        [](RunConfig& c, const std::string& v) { c.name = to_int(#name, v); },  \
        [](const RunConfig& c) { return std::to_string(c.name); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      SPURT_REAL(re, "Reynolds number"),
      SPURT_REAL(we, "Weissenberg number"),
      SPURT_REAL(eta2, "solvent viscosity fraction"),
      SPURT_REAL(a1, "slip law A1"),
      SPURT_REAL(a2, "slip law A2"),
      SPURT_REAL(a3, "slip law A3"),
      SPURT_INT(n_nodes, "grid nodes on the half channel (odd)"),
      SPURT_REAL(dt, "implicit Euler time step"),
      SPURT_REAL(t_h, "horizon of the steady-state map"),
      SPURT_REAL(newton_tol, "Newton tolerance (max norm)"),
      SPURT_REAL(gmres_tol, "GMRES relative tolerance"),
      SPURT_REAL(eps0, "finite-difference Jacobian step scale"),
      SPURT_INT(max_dim, "Krylov subspace dimension"),
      SPURT_REAL(ds, "initial arc-length step"),
      SPURT_REAL(ds_min, "smallest arc-length step"),
      SPURT_REAL(ds_max, "largest arc-length step"),
      SPURT_INT(n_steps, "continuation steps per branch"),
      SPURT_REAL(q_lo, "lower end of the flow-rate range"),
      SPURT_REAL(q_hi, "upper end of the flow-rate range"),
      SPURT_REAL(t_max, "integration time limit"),
      SPURT_INT(k_eigs, "eigenvalues / multipliers requested"),
      Field{{"output_dir", "directory for CSV output"},
            [](RunConfig& c, const std::string& v) {
              if (v.empty()) throw ConfigError("key 'output_dir': empty path");
              c.output_dir = v;
            },
            [](const RunConfig& c) { return c.output_dir; }},
      SPURT_REAL(q, "stability: flow rate"),
      SPURT_REAL(q_init, "transient: initial steady flow rate"),
      SPURT_REAL(q_run, "transient: imposed flow rate"),
      SPURT_INT(sample_every, "transient: time steps per output row"),
      SPURT_REAL(vw_max, "flow-curve: largest slip velocity"),
      SPURT_INT(n_points, "flow-curve: number of rows"),
      SPURT_REAL(cycle_dt, "bifurcation/bistability: time step for cycles"),
      SPURT_REAL(q_probe, "bistability: flow rate of the unstable cycle"),
      SPURT_REAL(dq_probe, "bistability: flow-rate perturbation"),
  };
  return f;
}

#undef SPURT_REAL
#undef SPURT_INT

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.info.name == key) return &f;
  return nullptr;
}

} // namespace

ModelParams RunConfig::params() const {
  ModelParams p;
  p.re = re;
  p.we = we;
  p.eta2 = eta2;
  p.a1 = a1;
  p.a2 = a2;
  p.a3 = a3;
  return p;
}

void RunConfig::validate() const {
  params().validate();
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  need(n_nodes >= 5 && n_nodes % 2 == 1, "n_nodes must be odd and >= 5");
  need(dt > 0 && t_h > 0 && cycle_dt > 0, "time steps must be positive");
  need(newton_tol > 0 && gmres_tol > 0 && eps0 > 0, "tolerances must be positive");
  need(max_dim >= 2, "max_dim must be >= 2");
  need(ds > 0 && ds_min > 0 && ds_max >= ds_min, "invalid arc-length steps");
  need(n_steps >= 1, "n_steps must be >= 1");
  need(t_max > 0, "t_max must be positive");
  need(k_eigs >= 1, "k_eigs must be >= 1");
  need(sample_every >= 1, "sample_every must be >= 1");
  need(vw_max > 0 && n_points >= 2, "flow curve needs vw_max > 0 and n_points >= 2");
  need(q_lo < q_hi, "q_lo must be below q_hi");
  need(dq_probe > 0, "dq_probe must be positive");
}

const std::vector<KeyInfo>& config_keys() {
  static const std::vector<KeyInfo> keys = [] {
    std::vector<KeyInfo> k;
    for (const auto& f : fields()) k.push_back(f.info);
    return k;
  }();
  return keys;
}

void set_value(RunConfig& c, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown key '" + key + "'");
  f->set(c, trim(value));
  c.explicit_keys.insert(key);
}

void parse_config(RunConfig& c, std::istream& in, const std::string& source) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    try {
      if (eq == std::string::npos)
        throw ConfigError("expected 'key = value', got '" + line + "'");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError("missing key");
      set_value(c, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void load_config_file(RunConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  parse_config(c, in, path.string());
}

std::string dump_config(const RunConfig& c) {
  std::ostringstream os;
  for (const auto& f : fields())
    os << f.info.name << " = " << f.get(c) << "  # " << f.info.help << "\n";
  return os.str();
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     std::vector<std::string> header)
    : path_(path), columns_(header.size()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_)
    throw std::logic_error("CsvWriter: column count mismatch in " + path_.string());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << fields[i];
  }
  out_ << '\n';
  out_.flush();
}

void CsvWriter::row(const std::vector<double>& fields) {
  std::vector<std::string> s;
  s.reserve(fields.size());
  for (double x : fields) s.push_back(fmt(x));
  row(s);
}

} // namespace spurt::cli
