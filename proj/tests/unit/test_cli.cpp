#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"

#ifdef THZ_CLI_PATH

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("thz_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

int run(const std::string& args) {
  const std::string cmd = std::string(THZ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string column_line(const std::string& text) {
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty() && l[0] != '#') return l;
  return {};
}

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("fit") {
  TempDir tmp;
  const auto csv = tmp.path / "two.csv";
  REQUIRE(run("gen-absorption --profile two-window -o " + quoted(csv)) == 0);
  REQUIRE(run("fit --absorption " + quoted(csv) + " -o " + quoted(tmp.path / "a.json")) == 0);
  REQUIRE(run("fit --absorption " + quoted(csv) + " -o " + quoted(tmp.path / "b.json")) == 0);
  const auto a = slurp(tmp.path / "a.json");
  CHECK(a == slurp(tmp.path / "b.json"));
  CHECK(nlohmann::json::parse(a).at("regions").size() == 4);

  std::ofstream(tmp.path / "empty.csv").close();
  CHECK(run("fit --absorption " + quoted(tmp.path / "empty.csv") + " -o " + quoted(tmp.path / "c.json")) == 2);
  CHECK(run("fit --absorption " + quoted(tmp.path / "missing.csv")) == 2);
  CHECK(run("solve --scheme Greedy") == 2);
}

TEST_CASE("solve") {
  TempDir tmp;
  const auto data = fixture::data_dir();
  const std::string common = "--scenario " + quoted(data / "regression" / "seed_01.json") + " --layout " +
                             quoted(data / "single_peak_layout.json");
  REQUIRE(run("solve " + common + " --scheme ASB_full -o " + quoted(tmp.path / "full")) == 0);
  const auto report = nlohmann::json::parse(slurp(tmp.path / "full" / "report.json"));
  CHECK(report.at("feasible") == true);
  CHECK(report.at("status") == "Converged");
  for (const auto& item : report.at("checks")) CHECK(item.at("passed") == true);

  REQUIRE(run("solve " + common + " --scheme ESB -o " + quoted(tmp.path / "esb")) == 0);
  for (const char* file : {"allocation.csv", "trace.csv"})
    CHECK(column_line(slurp(tmp.path / "esb" / file)) == column_line(slurp(tmp.path / "full" / file)));
  const auto esb = nlohmann::json::parse(slurp(tmp.path / "esb" / "report.json"));
  for (const char* key : {"header", "scheme", "feasible", "sum_rate_bps", "checks", "b_delta_hz", "notes"})
    CHECK(esb.contains(key));

  CHECK(run("solve " + common + " --r-thr 2e11 --scheme ASB_full -o " + quoted(tmp.path / "hard")) == 3);
  CHECK(run("solve " + common + " --r-thr 2e11 --scheme ESB -o " + quoted(tmp.path / "hard_esb")) == 3);
}

TEST_CASE("sweep and feasibility") {
  TempDir tmp;
  REQUIRE(run("sweep --profile single-peak --users 2 --regions 1 --values=-15,-12.5 --trials 2 --schemes ESB,ASB_full "
              "--workers 1 -o " + quoted(tmp.path / "s")) == 0);
  const auto sweep = slurp(tmp.path / "s" / "sweep.csv");
  std::istringstream in(sweep);
  std::size_t rows = 0;
  for (std::string l; std::getline(in, l);)
    if (!l.empty() && l[0] != '#') ++rows;
  CHECK(rows == 1 + 2 * 2 * 2);
  CHECK(column_line(slurp(tmp.path / "s" / "summary.csv")) ==
        "axis_value,scheme,trials,feasible,median_sum_rate_bps,mean_b_delta_hz");

  REQUIRE(run("feasibility --profile single-peak --users 2 --regions 1 --values=-15 --trials 2 --schemes ESB "
              "--workers 1 -o " + quoted(tmp.path / "f1")) == 0);
  REQUIRE(run("feasibility --profile single-peak --users 2 --regions 1 --values=-15 --trials 2 --schemes ESB "
              "--workers 1 -o " + quoted(tmp.path / "f2")) == 0);
  CHECK(slurp(tmp.path / "f1" / "feasibility.csv") == slurp(tmp.path / "f2" / "feasibility.csv"));
  CHECK(run("sweep --values=-12,-15 -o " + quoted(tmp.path / "bad")) == 2);
}

}

#endif
