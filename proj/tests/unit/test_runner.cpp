#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "memsim/config.hpp"
#include "memsim/csv.hpp"
#include "memsim/runner.hpp"

using namespace memsim;
namespace fs = std::filesystem;

namespace {

const fs::path kData = MEMSIM_TEST_DATA;

struct CliResult {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("memsim_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

CliResult cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + MEMSIM_CLI_PATH + "\" " + args + " > \"" +
                          out.string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

CliResult run_task(const std::string& task, const fs::path& config, const fs::path& dir,
                   const std::string& extra = "") {
  return cli(task + " --config \"" + config.string() + "\" --output \"" + dir.string() + "\" " + extra,
             dir);
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (header[k] == name) return k;
    }
    FAIL("missing column " << name);
    return 0;
  }
  double num(std::size_t row, const std::string& name) const { return std::stod(rows[row][col(name)]); }
};

Csv read_csv(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  Csv c;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    return cells;
  };
  std::getline(in, line);
  c.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) c.rows.push_back(split(line));
  }
  return c;
}

// writes a modified copy of a data config next to the original data files
fs::path variant(const std::string& base, const std::string& name,
                 const std::function<void(nlohmann::json&)>& edit, const fs::path& dir) {
  nlohmann::json j = nlohmann::json::parse(slurp(kData / base));
  edit(j);
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST_CASE("format_number") {
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(1.5) == "1.5");
  CHECK(format_number(-2.0e-300) == "-2.0000000000000001e-300");
  CHECK(std::stod(format_number(M_PI)) == M_PI);
  CsvTable t({"a", "b"});
  t.add_row({1.0, 2.0});
  t.add_row({"x"}, {3.0});
  CHECK(t.str() == "a,b\n1,2\nx,3\n");
  CHECK_THROWS(t.add_row({1.0}));
}

TEST_CASE("config parsing") {
  const std::string good = slurp(kData / "zero_kernel.json");
  const RunConfig c = parse_config(good, kData);
  CHECK(c.dim() == 2);
  CHECK(c.n_points == 51);
  CHECK(c.output_nodes() == std::vector<std::size_t>{0, 10, 20, 30, 40, 50});

  SUBCASE("parse error reports the line") {
    try {
      parse_config("{\n  \"schema_version\": 1,\n  \"epsilon\": ,\n}\n");
      FAIL("expected a parse error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("unknown keys name the field") {
    nlohmann::json j = nlohmann::json::parse(good);
    j["kernel"]["kapa"] = 1.0;
    try {
      parse_config(j.dump(), kData);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("kapa") != std::string::npos);
    }
  }
  SUBCASE("round trip through to_json") {
    const RunConfig again = parse_config(c.to_json().dump(), kData);
    CHECK(again.to_json() == c.to_json());
  }
  SUBCASE("tabulated kernel resolves relative to the config") {
    const RunConfig t = load_config(kData / "tabulated.json");
    CHECK(t.kernel.family == KernelFamily::tabulated);
    CHECK(t.kernel.build()(0.5, 0.25) == doctest::Approx(1.0));
    CHECK(t.observable.has_value());
  }
}

TEST_CASE("cli: simulate with zero kernel keeps rho0") {
  const fs::path dir = fresh_dir("zero");
  const CliResult r = run_task("simulate", kData / "zero_kernel.json", dir);
  REQUIRE(r.code == 0);
  const Csv csv = read_csv(dir / "solution.csv");
  REQUIRE(csv.rows.size() == 6);
  for (std::size_t row = 0; row < csv.rows.size(); ++row) {
    for (int k = 0; k < 4; ++k) {
      CHECK(csv.num(row, "re" + std::to_string(k)) == doctest::Approx(0.5));
      CHECK(csv.num(row, "im" + std::to_string(k)) == 0.0);
    }
  }
  CHECK(fs::exists(dir / "report.txt"));
  CHECK(fs::exists(dir / "config.resolved.json"));
}

TEST_CASE("cli: compare on the Markovian scenario") {
  const fs::path dir = fresh_dir("markov");
  const CliResult r = run_task("compare", kData / "markov_delta.json", dir);
  REQUIRE(r.code == 0);
  const Csv csv = read_csv(dir / "compare.csv");
  double worst = 0.0;
  for (std::size_t row = 0; row < csv.rows.size(); ++row) {
    worst = std::max(worst, csv.num(row, "trace_distance"));
    CHECK(csv.num(row, "bound_satisfied") == 1.0);
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("cli: exit codes") {
  const fs::path dir = fresh_dir("codes");
  SUBCASE("invalid epsilon names the field") {
    const fs::path cfg = variant("zero_kernel.json", "bad_eps.json", [](auto& j) { j["epsilon"] = 1.5; }, dir);
    const CliResult r = run_task("simulate", cfg, dir);
    CHECK(r.code == 1);
    CHECK(r.err.find("epsilon") != std::string::npos);
  }
  SUBCASE("parse error") {
    const fs::path cfg = dir / "broken.json";
    std::ofstream(cfg) << "{\n  \"schema_version\": 1,\n  oops\n}\n";
    const CliResult r = run_task("simulate", cfg, dir);
    CHECK(r.code == 1);
    CHECK(r.err.find("line 3") != std::string::npos);
  }
  SUBCASE("missing config and bad flags") {
    CHECK(cli("simulate --config /nonexistent/x.json", dir).code == 1);
    CHECK(cli("simulate", dir).code == 1);
    CHECK(cli("frobnicate", dir).code == 1);
    CHECK(run_task("simulate", kData / "zero_kernel.json", dir, "--threads 0").code == 1);
  }
  SUBCASE("infeasible lambda budget is a numeric failure") {
    const fs::path cfg = variant("markov_delta.json", "long.json", [](auto& j) {
      j["kernel"] = {{"family", "constant"}, {"kappa", 1.0}};
      j["grid"] = {{"t_max", 20.0}, {"n_points", 201}};
    }, dir);
    const CliResult r = run_task("simulate", cfg, dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("lambda") != std::string::npos);
  }
}

TEST_CASE("cli: determinism") {
  const fs::path scenario = kData / ".." / ".." / "scenarios" / "dephasing_exponential.json";
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  REQUIRE(run_task("simulate", scenario, a).code == 0);
  REQUIRE(run_task("simulate", scenario, b, "--threads 4").code == 0);
  CHECK(slurp(a / "solution.csv") == slurp(b / "solution.csv"));
  CHECK(slurp(a / "report.txt") == slurp(b / "report.txt"));
  REQUIRE(run_task("convergence", scenario, a).code == 0);
  REQUIRE(run_task("convergence", scenario, b, "--threads 4").code == 0);
  CHECK(slurp(a / "convergence.csv") == slurp(b / "convergence.csv"));
}

TEST_CASE("cli: seed override is recorded") {
  const fs::path dir = fresh_dir("seed");
  REQUIRE(run_task("simulate", kData / "zero_kernel.json", dir, "--seed 99").code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "config.resolved.json"));
  CHECK(j["seed"] == 99);
}

TEST_CASE("cli: tabulated kernel matches the closed-form constant kernel") {
  const fs::path a = fresh_dir("tab_a"), b = fresh_dir("tab_b");
  REQUIRE(run_task("simulate", kData / "tabulated.json", a).code == 0);
  const fs::path cfg = variant("tabulated.json", "constant.json", [](auto& j) {
    j["kernel"] = {{"family", "constant"}, {"kappa", 1.0}};
    j.erase("observable_file");
  }, b);
  REQUIRE(run_task("simulate", cfg, b).code == 0);
  const Csv x = read_csv(a / "solution.csv"), y = read_csv(b / "solution.csv");
  REQUIRE(x.rows.size() == y.rows.size());
  for (int k = 0; k < 4; ++k) {
    const std::string col = "re" + std::to_string(k);
    CHECK(x.num(0, col) == doctest::Approx(y.num(0, col)).epsilon(1e-12));
  }
}

TEST_CASE("cli: correlate, decompose, bound, oracle") {
  const fs::path dir = fresh_dir("tasks");
  REQUIRE(run_task("correlate", kData / "tabulated.json", dir).code == 0);
  const Csv corr = read_csv(dir / "correlation.csv");
  for (std::size_t row = 0; row < corr.rows.size(); ++row) CHECK(corr.num(row, "abs_diff") < 1e-10);
  const Csv multi = read_csv(dir / "multi_time.csv");
  CHECK(multi.num(0, "abs_diff") < 1e-10);

  REQUIRE(run_task("decompose", kData / "tabulated.json", dir).code == 0);
  const auto dec = nlohmann::json::parse(slurp(dir / "decomposition.json"));
  for (const auto& [key, value] : dec["residuals"].items()) CHECK(value.get<double>() < 1e-10);

  REQUIRE(run_task("bound", kData / "markov_delta.json", dir).code == 0);
  const Csv bounds = read_csv(dir / "bounds.csv");
  CHECK(bounds.rows.size() > 3);

  REQUIRE(run_task("oracle", kData / "zero_kernel.json", dir).code == 0);
  const Csv tr = read_csv(dir / "trajectory.csv");
  CHECK(tr.rows.size() == 51);
}

TEST_CASE("convergence study") {
  RunConfig c = load_config(kData / "zero_kernel.json");
  c.convergence.quantity = "all";
  const auto studies = convergence_study(c, 4);
  for (const auto& s : studies) {
    if (s.quantity == "zero") {
      CHECK(s.saturated);
    } else {
      CHECK(s.fitted_slope == doctest::Approx(2.0).epsilon(0.1));
    }
  }
  CHECK_THROWS_AS(convergence_study(c, 2), ValidationError);
}
