// Command-line front end: exact weighted first-order model counting with
// lifted rules and domain recursion, liftability class checking, a brute
// force oracle, and a benchmark sweep that emits CSV.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "wfomc/bench.hpp"
#include "wfomc/engine.hpp"
#include "wfomc/liftability.hpp"
#include "wfomc/oracle.hpp"
#include "wfomc/parser.hpp"
#include "wfomc/preprocess.hpp"

namespace {

constexpr int kExitParse = 1;
constexpr int kExitBudget = 2;
constexpr int kExitOracleLimit = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, uint64_t> parse_overrides(const std::vector<std::string>& specs) {
  std::map<std::string, uint64_t> out;
  for (const auto& s : specs) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw std::runtime_error("--set-domain expects NAME=N");
    out[s.substr(0, eq)] = std::stoull(s.substr(eq + 1));
  }
  return out;
}

struct CountFlags {
  std::string mode = "RD";
  uint64_t budget = 0;
  uint64_t ground_limit = 30;
  uint64_t probe_budget = 1000;
  double timeout = 0;
  bool stats = false;
  bool float_mode = false;
  std::vector<std::string> set_domain;

  wfomc::EngineConfig config() const {
    wfomc::EngineConfig cfg;
    cfg.mode = mode == "R" ? wfomc::EngineConfig::Mode::R : wfomc::EngineConfig::Mode::RD;
    cfg.node_limit = budget;
    cfg.ground_atom_limit = ground_limit;
    cfg.probe_budget = probe_budget;
    cfg.float_mode = float_mode;
    if (timeout > 0)
      cfg.time_limit = std::chrono::milliseconds(static_cast<int64_t>(timeout * 1000));
    return cfg;
  }
};

void add_count_flags(CLI::App* cmd, CountFlags& f) {
  cmd->add_option("--mode", f.mode, "rule set: R or RD (default RD)")
      ->check(CLI::IsMember({"R", "RD"}));
  cmd->add_option("--budget", f.budget, "node budget (0 = unlimited)");
  cmd->add_option("--ground-limit", f.ground_limit, "fallback grounding atom limit (default 30)");
  cmd->add_option("--probe-budget", f.probe_budget, "domain recursion probe budget (default 1000)");
  cmd->add_option("--timeout", f.timeout, "wall clock limit in seconds");
  cmd->add_option("--set-domain", f.set_domain, "override a domain size, NAME=N")
      ->take_all();
  cmd->add_flag("--stats", f.stats, "print node and cache counters");
  cmd->add_flag("--float", f.float_mode, "repeat the run in floating point (display only)");
}

void print_stats(const wfomc::EngineStats& st, size_t cache_entries) {
  fprintf(stderr,
          "nodes=%llu cache_hits=%llu raw_hits=%llu cache_entries=%zu probes=%llu "
          "probes_accepted=%llu dr_steps=%llu unprobed_dr=%llu ground_fallbacks=%llu\n",
          (unsigned long long)st.nodes, (unsigned long long)st.cache_hits,
          (unsigned long long)st.raw_hits, cache_entries, (unsigned long long)st.probes,
          (unsigned long long)st.probes_accepted, (unsigned long long)st.dr_steps,
          (unsigned long long)st.unprobed_dr_steps, (unsigned long long)st.ground_fallbacks);
}

wfomc::Rational count_file(const std::string& path, const CountFlags& flags) {
  auto compiled =
      wfomc::compile_text(read_file(path), parse_overrides(flags.set_domain));
  wfomc::Engine engine(compiled.weights, flags.config());
  wfomc::Rational v = engine.wfomc(compiled.theory);
  if (flags.stats) print_stats(engine.stats(), engine.cache().entries());
  if (flags.float_mode) {
    wfomc::FloatEngine fe(compiled.weights, flags.config());
    fprintf(stderr, "float_mode=%.12g\n", fe.wfomc(compiled.theory));
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact weighted first-order model counting"};
  app.require_subcommand(1);

  // count
  auto* count = app.add_subcommand("count", "weighted model count of a theory file");
  std::string count_file_arg;
  CountFlags count_flags;
  count->add_option("file", count_file_arg, "theory file")->required();
  add_count_flags(count, count_flags);

  // ratio
  auto* ratio = app.add_subcommand("ratio", "WFOMC(A) / WFOMC(B)");
  std::string ratio_num, ratio_den;
  CountFlags ratio_flags;
  ratio->add_option("numerator", ratio_num, "theory file A")->required();
  ratio->add_option("denominator", ratio_den, "theory file B")->required();
  add_count_flags(ratio, ratio_flags);

  // check
  auto* check = app.add_subcommand("check", "liftability class membership");
  std::string check_file;
  std::vector<std::string> check_overrides;
  check->add_option("file", check_file, "theory file")->required();
  check->add_option("--set-domain", check_overrides, "override a domain size, NAME=N")->take_all();

  // oracle
  auto* oracle = app.add_subcommand("oracle", "brute force ground count");
  std::string oracle_file;
  uint64_t oracle_limit = 26;
  std::vector<std::string> oracle_overrides;
  oracle->add_option("file", oracle_file, "theory file")->required();
  oracle->add_option("--limit", oracle_limit, "ground atom limit (default 26)");
  oracle->add_option("--set-domain", oracle_overrides, "override a domain size, NAME=N")
      ->take_all();

  // bench
  auto* bench = app.add_subcommand("bench", "runtime sweep over domain sizes, CSV output");
  std::string bench_file, bench_domain, bench_sizes = "2:10:1", bench_mode = "RD", bench_csv_path;
  double bench_timeout = 0;
  unsigned bench_jobs = 1;
  uint64_t bench_ground_limit = 30, bench_node_limit = 0;
  bench->add_option("file", bench_file, "theory file")->required();
  bench->add_option("--domain", bench_domain, "domain to sweep")->required();
  bench->add_option("--sizes", bench_sizes, "A:B:STEP (default 2:10:1)");
  bench->add_option("--mode", bench_mode, "R, RD or both")->check(CLI::IsMember({"R", "RD", "both"}));
  bench->add_option("--timeout", bench_timeout, "per-run wall clock limit in seconds");
  bench->add_option("--csv", bench_csv_path, "write CSV here instead of stdout");
  bench->add_option("--jobs", bench_jobs, "concurrent runs (default 1)");
  bench->add_option("--ground-limit", bench_ground_limit, "fallback grounding atom limit");
  bench->add_option("--budget", bench_node_limit, "node budget per run (0 = unlimited)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (count->parsed()) {
      wfomc::Rational v = count_file(count_file_arg, count_flags);
      printf("%s (%s)\n", wfomc::rational_str(v).c_str(), wfomc::decimal_str(v).c_str());
      return 0;
    }
    if (ratio->parsed()) {
      wfomc::Rational a = count_file(ratio_num, ratio_flags);
      wfomc::Rational b = count_file(ratio_den, ratio_flags);
      if (sgn(b) == 0) {
        fprintf(stderr, "error: denominator count is zero\n");
        return kExitBudget;
      }
      wfomc::Rational r = a / b;
      printf("%s (%s)\n", wfomc::rational_str(r).c_str(), wfomc::decimal_str(r).c_str());
      return 0;
    }
    if (check->parsed()) {
      auto compiled =
          wfomc::compile_text(read_file(check_file), parse_overrides(check_overrides));
      wfomc::ClassReport r = wfomc::check_all(compiled.theory);
      auto line = [](const char* name, const wfomc::ClassReport::Entry& e) {
        std::string witness = e.witness;
        for (auto& ch : witness)
          if (ch == '\n') ch = ';';
        if (witness.size() > 160) witness = witness.substr(0, 157) + "...";
        if (witness.empty())
          printf("%s: %s\n", name, wfomc::status_str(e.status));
        else
          printf("%s: %s (%s)\n", name, wfomc::status_str(e.status), witness.c_str());
      };
      line("FO2", r.fo2);
      line("RU", r.ru);
      line("S2FO2", r.s2fo2);
      line("S2RU", r.s2ru);
      return 0;
    }
    if (oracle->parsed()) {
      auto compiled =
          wfomc::compile_text(read_file(oracle_file), parse_overrides(oracle_overrides));
      wfomc::Rational v =
          wfomc::oracle_wfomc(compiled.pre_skolem, compiled.weights, oracle_limit);
      printf("%s (%s)\n", wfomc::rational_str(v).c_str(), wfomc::decimal_str(v).c_str());
      return 0;
    }
    if (bench->parsed()) {
      wfomc::SourceTheory st = wfomc::parse_theory(read_file(bench_file));
      wfomc::BenchOptions opt;
      auto stem = bench_file;
      if (auto slash = stem.find_last_of('/'); slash != std::string::npos)
        stem = stem.substr(slash + 1);
      if (auto dot = stem.find_last_of('.'); dot != std::string::npos) stem = stem.substr(0, dot);
      opt.theory_name = stem;
      opt.domain = bench_domain;
      if (sscanf(bench_sizes.c_str(), "%llu:%llu:%llu", (unsigned long long*)&opt.from,
                 (unsigned long long*)&opt.to, (unsigned long long*)&opt.step) != 3 ||
          opt.step == 0) {
        fprintf(stderr, "error: --sizes expects A:B:STEP\n");
        return kExitParse;
      }
      if (!st.find_domain(bench_domain)) {
        fprintf(stderr, "error: unknown domain '%s'\n", bench_domain.c_str());
        return kExitParse;
      }
      opt.modes.clear();
      if (bench_mode == "R" || bench_mode == "both") opt.modes.push_back(wfomc::EngineConfig::Mode::R);
      if (bench_mode == "RD" || bench_mode == "both")
        opt.modes.push_back(wfomc::EngineConfig::Mode::RD);
      opt.timeout_secs = bench_timeout;
      opt.jobs = bench_jobs;
      opt.ground_atom_limit = bench_ground_limit;
      opt.node_limit = bench_node_limit;
      auto rows = wfomc::run_bench(st, opt);
      std::string csv = wfomc::bench_csv(rows);
      if (bench_csv_path.empty()) {
        fputs(csv.c_str(), stdout);
      } else {
        std::ofstream out(bench_csv_path, std::ios::binary);
        out << csv;
      }
      return 0;
    }
  } catch (const wfomc::ParseError& e) {
    fprintf(stderr, "%s\n", e.what());
    return kExitParse;
  } catch (const wfomc::OracleLimitExceeded& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return kExitOracleLimit;
  } catch (const wfomc::BudgetExceeded& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return kExitBudget;
  } catch (const wfomc::GroundingTooLarge& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return kExitBudget;
  } catch (const std::exception& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return kExitParse;
  }
  return 0;
}
