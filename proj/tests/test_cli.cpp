#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "wfomc/engine.hpp"
#include "wfomc/preprocess.hpp"
#include "wfomc/bench.hpp"

using namespace wfomc;

namespace {

std::string theory_path(const std::string& name) { return std::string(THEORY_DIR) + "/" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int exit_code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  std::string cmd = std::string(WFOMC_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult res;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) res.out.append(buf, n);
  res.exit_code = WEXITSTATUS(pclose(pipe));
  return res;
}

}  // namespace

TEST_CASE("every bundled theory parses and counts in recursion mode") {
  const std::array<const char*, 8> files = {
      "smokers.th",  "symtrans.th",       "s4.th",      "birthday.th",
      "birthday_noinj.th", "volunteers.th", "fxy_fyx.th", "transitivity.th"};
  for (const char* name : files) {
    INFO(name);
    auto compiled = compile_text(slurp(theory_path(name)));
    Engine engine(compiled.weights, EngineConfig{});
    Rational v = engine.wfomc(compiled.theory);
    if (std::string(name) != "transitivity.th") {
      CHECK(engine.stats().ground_fallbacks == 0);
      // the count also matches the oracle at the bundled sizes
      CHECK(v == oracle_wfomc(compiled.pre_skolem, compiled.weights));
    }
  }
}

TEST_CASE("transitivity falls back to grounding at larger sizes") {
  auto compiled = compile_text(slurp(theory_path("transitivity.th")), {{"p", 7}});
  Engine engine(compiled.weights, EngineConfig{});
  Rational v = engine.wfomc(compiled.theory);
  CHECK(engine.stats().ground_fallbacks > 0);
  CHECK(v > 0);
}

TEST_CASE("count prints the exact value and a decimal rendering") {
  auto r = run_cli("count " + theory_path("smokers.th"));
  CHECK(r.exit_code == 0);
  CHECK(r.out == "841/625 (1.34560000000)\n");
  auto s = run_cli("count " + theory_path("symtrans.th"));
  CHECK(s.out == "15 (15.0000000000)\n");
}

TEST_CASE("count supports domain overrides") {
  auto r = run_cli("count " + theory_path("symtrans.th") + " --set-domain p=4");
  CHECK(r.exit_code == 0);
  CHECK(r.out.substr(0, 3) == "52 ");
}

TEST_CASE("exit codes are stable") {
  SECTION("parse error is 1") {
    std::string bad = std::string(THEORY_DIR) + "/../build/bad_theory.th";
    {
      std::ofstream out(bad);
      out << "domain p 2\nUnknown(x)\n";
    }
    auto r = run_cli("count " + bad);
    CHECK(r.exit_code == 1);
  }
  SECTION("node budget exceeded is 2") {
    auto r = run_cli("count " + theory_path("symtrans.th") + " --set-domain p=12 --budget 10");
    CHECK(r.exit_code == 2);
  }
  SECTION("oversized grounding in rules-only mode is 2") {
    auto r = run_cli("count " + theory_path("transitivity.th") +
                     " --set-domain p=9 --mode R --ground-limit 30");
    CHECK(r.exit_code == 2);
  }
  SECTION("oracle limit exceeded is 3") {
    auto r = run_cli("oracle " + theory_path("symtrans.th") + " --set-domain p=5 --limit 20");
    CHECK(r.exit_code == 3);
    auto ok = run_cli("oracle " + theory_path("symtrans.th") + " --set-domain p=5 --limit 25");
    CHECK(ok.exit_code == 0);
    CHECK(ok.out.substr(0, 4) == "203 ");
  }
  SECTION("zero denominator in ratio is 2") {
    std::string zero = std::string(THEORY_DIR) + "/../build/zero_theory.th";
    {
      std::ofstream out(zero);
      out << "domain p 1\npredicate P(p)\nP(x)\n!P(y)\n";
    }
    auto r = run_cli("ratio " + theory_path("smokers.th") + " " + zero);
    CHECK(r.exit_code == 2);
  }
}

TEST_CASE("identical ratio inputs give one") {
  auto r = run_cli("ratio " + theory_path("smokers.th") + " " + theory_path("smokers.th"));
  CHECK(r.exit_code == 0);
  CHECK(r.out == "1 (1.00000000000)\n");
}

TEST_CASE("bench emits the documented CSV schema") {
  std::string csv_path = std::string(THEORY_DIR) + "/../build/bench_test.csv";
  auto r = run_cli("bench " + theory_path("symtrans.th") +
                   " --domain p --sizes 5:5:1 --mode both --csv " + csv_path);
  REQUIRE(r.exit_code == 0);
  std::string csv = slurp(csv_path);
  REQUIRE(csv.substr(0, csv.find('\n')) == "theory,mode,n,seconds,nodes,cache_hits,value,status");
  // single size, both modes: exactly two data rows with matching values
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  int rows = 0;
  std::string value;
  while (std::getline(lines, line)) {
    ++rows;
    CHECK(line.find("symtrans,") == 0);
    CHECK(line.find(",ok") != std::string::npos);
    auto parts = line;
    // value is the seventh field
    std::vector<std::string> fields;
    std::istringstream fs(line);
    std::string f;
    while (std::getline(fs, f, ',')) fields.push_back(f);
    REQUIRE(fields.size() == 8);
    CHECK(fields[2] == "5");
    if (value.empty())
      value = fields[6];
    else
      CHECK(fields[6] == value);
  }
  CHECK(rows == 2);
  CHECK(value == "203");
}

TEST_CASE("bench records timeouts and keeps running") {
  auto r = run_cli("bench " + theory_path("symtrans.th") +
                   " --domain p --sizes 8:9:1 --mode R --timeout 0.05 --ground-limit 400");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find(",timeout") != std::string::npos);
}

TEST_CASE("check prints one line per class") {
  auto r = run_cli("check " + theory_path("smokers.th"));
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("FO2: yes") != std::string::npos);
  CHECK(r.out.find("RU: yes") != std::string::npos);
  CHECK(r.out.find("S2FO2: yes") != std::string::npos);
  CHECK(r.out.find("S2RU: yes") != std::string::npos);
}

TEST_CASE("bench rows may run concurrently") {
  SourceTheory st = parse_theory(slurp(theory_path("symtrans.th")));
  BenchOptions opt;
  opt.theory_name = "symtrans";
  opt.domain = "p";
  opt.from = 2;
  opt.to = 9;
  opt.step = 1;
  opt.modes = {EngineConfig::Mode::RD};
  opt.jobs = 3;
  auto rows = run_bench(st, opt);
  auto bell = testutil::bell_numbers(12);
  REQUIRE(rows.size() == 8);
  for (const auto& row : rows) {
    REQUIRE(row.status == "ok");
    CHECK(*parse_rational(row.value) == bell[row.n + 1]);
  }
}
