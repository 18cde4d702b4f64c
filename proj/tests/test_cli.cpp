// End-to-end checks of the command-line tool: exit codes, output formats,
// and bit-identical reruns.  The binary path comes in via SPAG_CLI_PATH.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "spag/registry.hpp"

using namespace spag;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;
};

CmdResult run_cli(const std::string& args) {
  std::string cmd = std::string(SPAG_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult r;
  char buf[4096];
  size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  int rc = pclose(pipe);
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

TEST_CASE("the coin solve prints its optimum in fixed form") {
  CmdResult r = run_cli("solve --model coin-persuasion-v1 --epsilon 0.1 --quiet");
  CHECK(r.code == 0);
  CHECK(r.out == "v_star=0.800000\n");
}

TEST_CASE("bad invocations exit with the usage code") {
  CHECK(run_cli("solve --model coin-persuasion-v1 --epsilon 0").code == 2);
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("solve --epsilon 0.1").code == 2);
  CHECK(run_cli("solve --model coin-persuasion-v1 --epsilon 0.1 --no-such-flag")
            .code == 2);
  CHECK(run_cli("oracle --model coin-persuasion-v1").code == 2);
  CHECK(run_cli("oracle --model mechanism-v1 --h2-optimum").code == 2);
}

TEST_CASE("unreadable or malformed models exit with the usage code") {
  CHECK(run_cli("solve --model /no/such/model.json --epsilon 0.1").code == 2);
  std::string bad = temp_path("spag_cli_bad_model.json");
  spit(bad, "this is not json");
  CHECK(run_cli("solve --model " + bad + " --epsilon 0.1").code == 2);
  spit(bad, "{\"horizon\": 2}");
  CHECK(run_cli("solve --model " + bad + " --epsilon 0.1").code == 2);
  std::filesystem::remove(bad);
}

TEST_CASE("help exits cleanly everywhere") {
  for (const char* args : {"--help", "solve --help", "policy --help",
                           "oracle --help", "learn --help"}) {
    CmdResult r = run_cli(args);
    CHECK(r.code == 0);
    CHECK(!r.out.empty());
  }
}

TEST_CASE("the solve dump carries every value set and the summary") {
  std::string f1 = temp_path("spag_cli_dump1.json");
  std::string f2 = temp_path("spag_cli_dump2.json");
  CmdResult r = run_cli(
      "solve --model coin-persuasion-v1 --epsilon 0.1 --quiet --out " + f1);
  REQUIRE(r.code == 0);
  run_cli("solve --model coin-persuasion-v1 --epsilon 0.1 --quiet --out " + f2);

  auto j = nlohmann::json::parse(slurp(f1));
  const auto& summary = j.at("summary");
  CHECK(summary.at("epsilon").get<double>() == doctest::Approx(0.1));
  CHECK(summary.at("delta").get<double>() == 0.0);
  CHECK(summary.at("v_star").get<double>() == doctest::Approx(0.8).epsilon(1e-6));
  auto argvec = summary.at("argvec").get<std::vector<double>>();
  REQUIRE(argvec.size() == 2);
  CHECK(argvec[0] == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(argvec[1] == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(summary.contains("wall_time_ms"));

  GameModel m = make_fixture("coin-persuasion-v1");
  size_t expected = 1 + static_cast<size_t>(m.horizon - 1) * m.num_states() *
                            m.num_ap() * m.num_aa();
  const auto& polys = j.at("polytopes");
  CHECK(polys.size() == expected);
  for (const auto& p : polys) {
    CHECK(p.contains("dimension"));
    CHECK(p.contains("vertices"));
    CHECK(p.contains("H"));
    CHECK(p.contains("b"));
    CHECK(p.at("owner").contains("h"));
  }
  CHECK(polys.at(0).at("owner").at("h").get<int>() == 1);

  // Bit-identical up to the one timing field.
  auto j2 = nlohmann::json::parse(slurp(f2));
  j.at("summary").erase("wall_time_ms");
  j2.at("summary").erase("wall_time_ms");
  CHECK(j == j2);
  std::filesystem::remove(f1);
  std::filesystem::remove(f2);
}

TEST_CASE("a slack solve raises the printed optimum by the slack") {
  CmdResult r = run_cli(
      "solve --model coin-persuasion-v1 --epsilon 0.1 --delta 0.1 --quiet");
  CHECK(r.code == 0);
  CHECK(r.out == "v_star=0.900000\n");
}

TEST_CASE("the distribution query prints the persuasion mix") {
  CmdResult r = run_cli(
      "policy --model coin-persuasion-v1 --epsilon 0.1 --quiet");
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("step").get<int>() == 1);
  REQUIRE(j.at("rows").size() == 2);
  for (const auto& row : j.at("rows")) {
    auto pi = row.at("pi").get<std::vector<double>>();
    REQUIRE(pi.size() == 2);
    double sum = pi[0] + pi[1];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    if (row.at("wp").get<std::string>() == "saw_heads")
      CHECK(pi[0] == doctest::Approx(1.0).epsilon(1e-6));
    else
      CHECK(pi[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-5));
  }

  CmdResult one = run_cli(
      "policy --model coin-persuasion-v1 --epsilon 0.1 --wp saw_tails --quiet");
  REQUIRE(one.code == 0);
  auto js = nlohmann::json::parse(one.out);
  REQUIRE(js.at("rows").size() == 1);
  CHECK(js.at("rows").at(0).at("pi").at(0).get<double>() ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-5));
}

TEST_CASE("an off-path history still yields a distribution") {
  std::string h = temp_path("spag_cli_hist.json");
  spit(h, "[[0, 0, 0, 1, 0, 0, 0]]");
  CmdResult r = run_cli("policy --model mechanism-v1 --epsilon 0.25 --history " +
                        h + " --quiet");
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("step").get<int>() == 2);
  for (const auto& row : j.at("rows")) {
    double sum = 0.0;
    for (double p : row.at("pi")) {
      CHECK(p >= -1e-12);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  spit(h, "[[9, 0, 0, 0, 0, 0, 0]]");
  CHECK(run_cli("policy --model mechanism-v1 --epsilon 0.25 --history " + h)
            .code == 2);
  std::filesystem::remove(h);
}

TEST_CASE("rollouts write the advertised CSV and concentrate on the optimum") {
  CmdResult r = run_cli(
      "policy --model coin-persuasion-v1 --epsilon 0.1 --rollout 1000 --seed 7 "
      "--quiet");
  REQUIRE(r.code == 0);
  auto lines = lines_of(r.out);
  REQUIRE(lines.size() == 1001);
  CHECK(lines[0] == "episode,vP,vA");
  double sum = 0.0;
  for (size_t i = 1; i < lines.size(); ++i) {
    auto cells = split_csv(lines[i]);
    REQUIRE(cells.size() == 3);
    CHECK(cells[0] == std::to_string(i));
    sum += std::stod(cells[1]);
  }
  CHECK(std::fabs(sum / 1000.0 - 0.8) < 0.04);

  CmdResult again = run_cli(
      "policy --model coin-persuasion-v1 --epsilon 0.1 --rollout 1000 --seed 7 "
      "--quiet");
  CHECK(again.out == r.out);
}

TEST_CASE("a deviation plan file reroutes the simulated agent") {
  std::string plan = temp_path("spag_cli_plan.json");
  spit(plan, "{\"act\": [[1, 1]]}");  // ignore advice, always play tails
  CmdResult r = run_cli(
      "policy --model coin-persuasion-v1 --epsilon 0.1 --rollout 400 --seed 2 "
      "--deviation " + plan + " --quiet");
  REQUIRE(r.code == 0);
  auto lines = lines_of(r.out);
  REQUIRE(lines.size() == 401);
  double sum_p = 0.0, sum_a = 0.0;
  for (size_t i = 1; i < lines.size(); ++i) {
    auto cells = split_csv(lines[i]);
    sum_p += std::stod(cells[1]);
    sum_a += std::stod(cells[2]);
  }
  CHECK(sum_p == 0.0);  // the principal is paid only when heads is played
  CHECK(std::fabs(sum_a / 400.0 - 0.6) < 0.1);
  std::filesystem::remove(plan);
}

TEST_CASE("oracle verdicts are machine-readable") {
  CmdResult ic = run_cli("oracle --model coin-persuasion-v1 --check-ic --quiet");
  REQUIRE(ic.code == 0);
  auto jic = nlohmann::json::parse(ic.out);
  CHECK(jic.at("pass").get<bool>());
  CHECK(jic.at("gap").get<double>() <= 1e-6);

  CmdResult h2 = run_cli("oracle --model coin-persuasion-v1 --h2-optimum --quiet");
  REQUIRE(h2.code == 0);
  auto jh2 = nlohmann::json::parse(h2.out);
  CHECK(jh2.at("vP").get<double>() == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(jh2.at("vA").get<double>() == doctest::Approx(0.6).epsilon(1e-6));

  CmdResult ev = run_cli(
      "oracle --model coin-persuasion-v1 --exact-values --quiet");
  REQUIRE(ev.code == 0);
  auto jev = nlohmann::json::parse(ev.out);
  CHECK(jev.at("vP").get<double>() == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(jev.at("vA").get<double>() == doctest::Approx(0.6).epsilon(1e-6));
}

TEST_CASE("learning runs emit the regret CSV with one phase switch") {
  std::string f1 = temp_path("spag_cli_learn1.csv");
  std::string f2 = temp_path("spag_cli_learn2.csv");
  std::string args =
      "learn --model coin-persuasion-v1 --episodes 200 --q 0.05 --seed 1 "
      "--n0 100 --delta 0.1 --quiet --out ";
  CmdResult r = run_cli(args + f1);
  REQUIRE(r.code == 0);
  run_cli(args + f2);

  auto lines = lines_of(slurp(f1));
  REQUIRE(lines.size() == 201);
  CHECK(lines[0] == "episode,phase,regP_cum,regA_cum,vP_expected,vA_expected");
  int switches = 0;
  std::string prev;
  for (size_t i = 1; i < lines.size(); ++i) {
    auto cells = split_csv(lines[i]);
    REQUIRE(cells.size() == 6);
    CHECK(cells[0] == std::to_string(i));
    if (i > 1 && cells[1] != prev) ++switches;
    prev = cells[1];
  }
  CHECK(switches == 1);
  CHECK(slurp(f1) == slurp(f2));
  std::filesystem::remove(f1);
  std::filesystem::remove(f2);
}

TEST_CASE("the seed flag works before and after the subcommand name") {
  CmdResult a = run_cli(
      "--seed 11 policy --model coin-persuasion-v1 --epsilon 0.1 --rollout 50 "
      "--quiet");
  CmdResult b = run_cli(
      "policy --model coin-persuasion-v1 --epsilon 0.1 --rollout 50 --seed 11 "
      "--quiet");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out == b.out);
}
