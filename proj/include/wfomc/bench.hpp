#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "wfomc/engine.hpp"
#include "wfomc/preprocess.hpp"

namespace wfomc {

struct BenchRow {
  std::string theory;
  std::string mode;  // "R" or "RD"
  uint64_t n = 0;
  double seconds = 0;
  uint64_t nodes = 0;
  uint64_t cache_hits = 0;
  std::string value;   // exact rational; empty when not ok
  std::string status;  // ok | timeout | error:<reason>
};

struct BenchOptions {
  std::string theory_name;
  std::string domain;
  uint64_t from = 2, to = 2, step = 1;
  std::vector<EngineConfig::Mode> modes{EngineConfig::Mode::RD};
  double timeout_secs = 0;  // 0: none
  uint64_t ground_atom_limit = 30;
  uint64_t probe_budget = 1000;
  uint64_t node_limit = 0;
  unsigned jobs = 1;
  bool shared_cache = true;  // one process-wide cache across rows
};

inline const char* mode_str(EngineConfig::Mode m) {
  return m == EngineConfig::Mode::R ? "R" : "RD";
}

inline std::vector<BenchRow> run_bench(const SourceTheory& st, const BenchOptions& opt) {
  struct Job {
    uint64_t n;
    EngineConfig::Mode mode;
  };
  std::vector<Job> jobs;
  for (uint64_t n = opt.from; n <= opt.to; n += opt.step)
    for (auto mode : opt.modes) jobs.push_back({n, mode});

  std::vector<BenchRow> rows(jobs.size());
  auto shared = std::make_shared<Cache<Rational>>();
  std::mutex next_mu;
  size_t next = 0;

  auto worker = [&] {
    while (true) {
      size_t mine;
      {
        std::lock_guard<std::mutex> lock(next_mu);
        if (next >= jobs.size()) return;
        mine = next++;
      }
      const Job& job = jobs[mine];
      BenchRow row;
      row.theory = opt.theory_name;
      row.mode = mode_str(job.mode);
      row.n = job.n;
      auto t0 = std::chrono::steady_clock::now();
      try {
        auto compiled = compile_source(st, {{opt.domain, job.n}});
        EngineConfig cfg;
        cfg.mode = job.mode;
        cfg.ground_atom_limit = opt.ground_atom_limit;
        cfg.probe_budget = opt.probe_budget;
        cfg.node_limit = opt.node_limit;
        if (opt.timeout_secs > 0)
          cfg.time_limit =
              std::chrono::milliseconds(static_cast<int64_t>(opt.timeout_secs * 1000));
        Engine engine(compiled.weights, cfg, opt.shared_cache ? shared : nullptr);
        Rational v = engine.wfomc(compiled.theory);
        row.value = rational_str(v);
        row.status = "ok";
        row.nodes = engine.stats().nodes;
        row.cache_hits = engine.stats().cache_hits;
      } catch (const BudgetExceeded& e) {
        row.status = std::string(e.what()).find("timeout") != std::string::npos ? "timeout"
                                                                                : "error:budget";
      } catch (const std::exception& e) {
        row.status = std::string("error:") + e.what();
      }
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rows[mine] = std::move(row);
    }
  };

  unsigned nthreads = std::max(1u, opt.jobs);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "theory,mode,n,seconds,nodes,cache_hits,value,status\n";
  char buf[64];
  for (const auto& r : rows) {
    snprintf(buf, sizeof buf, "%.6f", r.seconds);
    out += r.theory + "," + r.mode + "," + std::to_string(r.n) + "," + buf + "," +
           std::to_string(r.nodes) + "," + std::to_string(r.cache_hits) + "," + r.value + "," +
           r.status + "\n";
  }
  return out;
}

}  // namespace wfomc
