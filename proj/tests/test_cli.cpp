#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "spurt/cli.hpp"
#include "spurt/errors.hpp"

using namespace spurt;
using namespace spurt::cli;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string error_of(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  try {
    parse_config(c, in, "test.cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("spurt_test_cli_" + name);
  fs::remove_all(d);
  return d;
}

} // namespace

TEST_CASE("config parsing") {
  RunConfig c;
  std::istringstream in(
      "# comment line\n"
      "\n"
      "n_nodes = 201   # trailing comment\n"
      "  dt=2e-5\n"
      "output_dir = out dir\n"
      "q_probe = 0.53\n");
  parse_config(c, in, "x.cfg");
  CHECK(c.n_nodes == 201);
  CHECK(c.dt == 2e-5);
  CHECK(c.output_dir == "out dir");
  CHECK(c.q_probe == 0.53);
  CHECK(c.is_set("dt"));
  CHECK_FALSE(c.is_set("t_h"));
}

TEST_CASE("config errors carry line numbers") {
  CHECK(error_of("dt = 1e-5\nbogus = 3\n") == "test.cfg:2: unknown key 'bogus'");
  CHECK(error_of("\n\nn_nodes = 20.5\n").rfind("test.cfg:3:", 0) == 0);
  CHECK(error_of("dt 1e-5\n").rfind("test.cfg:1:", 0) == 0);
  CHECK(error_of("dt = \n").rfind("test.cfg:1:", 0) == 0);
  CHECK(error_of("dt = abc\n").rfind("test.cfg:1:", 0) == 0);
  CHECK(error_of("dt = 1e-5 extra\n").rfind("test.cfg:1:", 0) == 0);
  CHECK(error_of("dt = 1e-5\n").empty());
}

TEST_CASE("overrides and validation") {
  RunConfig c;
  set_value(c, "q", "0.5");
  CHECK(c.q == 0.5);
  CHECK_THROWS_AS(set_value(c, "nope", "1"), ConfigError);
  CHECK_THROWS_AS(set_value(c, "n_steps", "x"), ConfigError);
  RunConfig bad;
  bad.n_nodes = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = RunConfig{};
  bad.vw_max = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_NOTHROW(RunConfig{}.validate());
}

TEST_CASE("dumped configuration parses back") {
  RunConfig c;
  c.n_nodes = 101;
  c.q_run = 0.44;
  const std::string text = dump_config(c);
  RunConfig d;
  std::istringstream in(text);
  parse_config(d, in, "dump");
  CHECK(d.n_nodes == 101);
  CHECK(d.q_run == 0.44);
  CHECK(dump_config(d) == text);
  // Every key appears once.
  for (const auto& k : config_keys())
    CHECK(("\n" + text).find("\n" + k.name + " = ") != std::string::npos);
}

TEST_CASE("number formatting") {
  CHECK(fmt(0.1) == "0.1");
  CHECK(fmt(1.0 / 3) == "0.333333333333333");
  CHECK(fmt(-2.5e-12) == "-2.5e-12");
  CHECK(eigs_file_name(0.45) == "eigs_q0.45.csv");
}

TEST_CASE("csv writer layout") {
  const fs::path d = scratch_dir("csv");
  {
    CsvWriter w(d / "sub" / "t.csv", {"a", "b"});
    w.row(std::vector<double>{1.0 / 3, 2.0});
    w.row(std::vector<std::string>{"x", "y"});
    CHECK_THROWS(w.row(std::vector<double>{1.0}));
  }
  const std::string text = read_file(d / "sub" / "t.csv");
  CHECK(text == "a,b\n0.333333333333333,2\nx,y\n");
  CHECK(text.find('\r') == std::string::npos);
  fs::remove_all(d);
}

TEST_CASE("flow-curve command") {
  RunConfig c;
  c.output_dir = scratch_dir("flow").string();
  const CommandResult r = cmd_flow_curve(c);
  CHECK(r.ok);
  REQUIRE(r.files.size() == 2);
  const auto rows = lines_of(read_file(r.files[0]));
  CHECK(rows.front() == "vw,q,sigma_w");
  CHECK(rows.size() == static_cast<std::size_t>(c.n_points) + 1);
  const auto ext = lines_of(read_file(r.files[1]));
  REQUIRE(ext.size() == 3);
  CHECK(ext[0] == "kind,vw,q,sigma_w");
  CHECK(ext[1].rfind("max,0.11732", 0) == 0);
  CHECK(ext[2].rfind("min,0.34093", 0) == 0);
  fs::remove_all(c.output_dir);
}

TEST_CASE("stability command on a coarse grid") {
  RunConfig c;
  c.n_nodes = 51;
  c.explicit_keys.insert("n_nodes");
  c.q = 0.45;
  c.k_eigs = 4;
  c.output_dir = scratch_dir("stab").string();
  const CommandResult r = cmd_stability(c);
  REQUIRE(r.files.size() == 1);
  CHECK(r.files[0].filename() == "eigs_q0.45.csv");
  const auto rows = lines_of(read_file(r.files[0]));
  CHECK(rows.front() == "re_lambda,im_lambda,ritz_residual");
  CHECK(rows.size() == 5);
  // Inside the Hopf interval the leading pair is unstable.
  CHECK(std::stod(rows[1]) > 0.0);
  fs::remove_all(c.output_dir);
}

TEST_CASE("transient command") {
  RunConfig c;
  c.n_nodes = 51;
  c.t_max = 0.01;
  c.sample_every = 10;
  c.output_dir = scratch_dir("transient").string();
  const CommandResult r = cmd_transient(c);
  REQUIRE(r.files.size() == 1);
  const auto rows = lines_of(read_file(r.files[0]));
  CHECK(rows.front() == "t,grad_p,vw,q_check,t1_mid");
  CHECK(rows.size() == 1 + 1 + 100);
  CHECK(rows[1].rfind("0,", 0) == 0);
  fs::remove_all(c.output_dir);
}
