#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "wfomc/canonical.hpp"
#include "wfomc/domain_recursion.hpp"
#include "wfomc/logic.hpp"
#include "wfomc/theory_ops.hpp"

namespace wfomc {

struct EngineConfig {
  enum class Mode { R, RD };
  Mode mode = Mode::RD;
  bool dr_before_grounding = true;  // try one unprobed recursion step instead of oversized grounding
  uint64_t probe_budget = 1000;     // nodes per speculative probe
  uint64_t ground_atom_limit = 30;  // fallback grounding must fit this many atoms
  bool float_mode = false;
  uint64_t node_limit = 0;  // 0: unlimited
  std::chrono::milliseconds time_limit{0};
};

template <class V>
struct ValueOps;

template <>
struct ValueOps<Rational> {
  static Rational from(const Rational& r) { return r; }
  static Rational pow(const Rational& b, uint64_t e) { return rat_pow(b, e); }
  static Rational binom(uint64_t n, uint64_t k) { return binomial(n, k); }
};

template <>
struct ValueOps<double> {
  static double from(const Rational& r) { return r.get_d(); }
  static double pow(double b, uint64_t e) { return std::pow(b, static_cast<double>(e)); }
  static double binom(uint64_t n, uint64_t k) { return binomial(n, k).get_d(); }
};

/// Shared memo of exact sub-results. Keys are complete canonical
/// serializations, so any two theories with one key have equal counts and
/// last-writer-wins insertion is safe.
template <class V>
class Cache {
 public:
  std::optional<V> find(const CanonicalKey& k) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = map_.find(k);
    if (it == map_.end()) {
      ++misses_;
      return std::nullopt;
    }
    ++hits_;
    return it->second;
  }
  void insert(const CanonicalKey& k, const V& v) {
    std::lock_guard<std::mutex> lock(mu_);
    map_.emplace(k, v);
  }
  size_t entries() const {
    std::lock_guard<std::mutex> lock(mu_);
    return map_.size();
  }
  uint64_t hits() const { return hits_; }
  uint64_t misses() const { return misses_; }
  void clear() {
    std::lock_guard<std::mutex> lock(mu_);
    map_.clear();
    hits_ = misses_ = 0;
  }

 private:
  mutable std::mutex mu_;
  std::unordered_map<CanonicalKey, V> map_;
  uint64_t hits_ = 0, misses_ = 0;
};

struct EngineStats {
  uint64_t nodes = 0;
  uint64_t cache_hits = 0;
  uint64_t raw_hits = 0;
  uint64_t probes = 0;
  uint64_t probes_accepted = 0;
  uint64_t dr_steps = 0;
  uint64_t unprobed_dr_steps = 0;
  uint64_t ground_fallbacks = 0;
};

// ---------------------------------------------------------------------------
// Structural rule ops shared by the engine and the liftability checkers.
// ---------------------------------------------------------------------------

namespace rules {

/// Segment usable for single-variable lifted decomposition: every clause has
/// exactly one variable over it and every literal carries that variable.
inline std::optional<SegmentId> lifted_decompose_candidate(const Theory& t) {
  if (t.clauses.empty()) return std::nullopt;
  std::set<SegmentId> segs;
  for (const auto& c : t.clauses)
    for (const auto& v : c.vars) segs.insert(v.segment);
  for (SegmentId s : segs) {
    bool ok = true;
    for (const auto& c : t.clauses) {
      VarIdx the_var = kNoId;
      int count = 0;
      for (VarIdx i = 0; i < c.vars.size(); ++i)
        if (c.vars[i].segment == s) {
          the_var = i;
          ++count;
        }
      if (count != 1) {
        ok = false;
        break;
      }
      for (const auto& lit : c.literals) {
        bool has = false;
        for (const auto& tm : lit.args)
          if (tm.is_var && tm.idx == the_var) has = true;
        if (!has) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
    if (ok) return s;
  }
  return std::nullopt;
}

inline Theory apply_lifted_decompose(const Theory& t, SegmentId seg) {
  Theory out = t;
  ConstId rep = out.add_constant("@" + std::to_string(out.constants.size()), out.segments[seg].root);
  for (auto& c : out.clauses) {
    VarIdx the_var = kNoId;
    for (VarIdx i = 0; i < c.vars.size(); ++i)
      if (c.vars[i].segment == seg) the_var = i;
    c = detail::drop_var(c, the_var, Term::constant(rep));
  }
  out.segments[seg].alive = false;
  return out;
}

/// Segment usable for pairwise lifted decomposition: every clause has exactly
/// two distinct variables over it and every literal carries both, so the
/// grounding is disconnected per unordered pair of individuals.
inline std::optional<SegmentId> pair_decompose_candidate(const Theory& t) {
  if (t.clauses.empty()) return std::nullopt;
  std::set<SegmentId> segs;
  for (const auto& c : t.clauses)
    for (const auto& v : c.vars) segs.insert(v.segment);
  for (SegmentId s : segs) {
    if (!t.segments[s].size.symbolic && t.segments[s].size.value < 2) continue;
    bool ok = true;
    for (const auto& c : t.clauses) {
      std::vector<VarIdx> vars;
      for (VarIdx i = 0; i < c.vars.size(); ++i)
        if (c.vars[i].segment == s) vars.push_back(i);
      if (vars.size() != 2) {
        ok = false;
        break;
      }
      for (const auto& lit : c.literals) {
        bool a = false, b = false;
        for (const auto& tm : lit.args) {
          if (tm.is_var && tm.idx == vars[0]) a = true;
          if (tm.is_var && tm.idx == vars[1]) b = true;
        }
        if (!a || !b) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
    if (ok) return s;
  }
  return std::nullopt;
}

inline Theory apply_pair_decompose(const Theory& t, SegmentId seg) {
  Theory out = t;
  ConstId a = out.add_constant("@" + std::to_string(out.constants.size()), out.segments[seg].root);
  ConstId b = out.add_constant("@" + std::to_string(out.constants.size()), out.segments[seg].root);
  std::vector<Clause> next;
  for (const auto& c : out.clauses) {
    std::vector<VarIdx> vars;
    for (VarIdx i = 0; i < c.vars.size(); ++i)
      if (c.vars[i].segment == seg) vars.push_back(i);
    for (int ori = 0; ori < 2; ++ori) {
      Clause copy = detail::drop_var(c, vars[1], Term::constant(ori ? a : b));
      // vars[0] index shifts down if it was after vars[1]
      VarIdx v0 = vars[0] > vars[1] ? vars[0] - 1 : vars[0];
      copy = detail::drop_var(copy, v0, Term::constant(ori ? b : a));
      next.push_back(std::move(copy));
    }
  }
  out.clauses = std::move(next);
  out.segments[seg].alive = false;
  return out;
}

/// Ground atoms occurring in the clauses, deterministically ordered.
inline std::vector<Literal> ground_atoms(const Theory& t) {
  std::set<std::pair<PredId, std::vector<uint32_t>>> seen;
  std::vector<Literal> out;
  for (const auto& c : t.clauses)
    for (const auto& lit : c.literals) {
      bool ground = true;
      std::vector<uint32_t> key;
      for (const auto& tm : lit.args) {
        if (tm.is_var) ground = false;
        key.push_back(tm.idx);
      }
      if (!ground) continue;
      if (seen.emplace(lit.pred, key).second) {
        Literal atom = lit;
        atom.positive = true;
        out.push_back(std::move(atom));
      }
    }
  std::sort(out.begin(), out.end(), [](const Literal& a, const Literal& b) {
    if (a.pred != b.pred) return a.pred < b.pred;
    for (size_t i = 0; i < a.args.size() && i < b.args.size(); ++i)
      if (a.args[i].idx != b.args[i].idx) return a.args[i].idx < b.args[i].idx;
    return a.args.size() < b.args.size();
  });
  return out;
}

inline Theory apply_case(const Theory& t, const Literal& atom, bool positive) {
  Theory out = t;
  Clause unit;
  unit.literals.push_back(atom);
  unit.literals[0].positive = positive;
  out.clauses.push_back(std::move(unit));
  return out;
}

/// A unary PRV candidate: literal pattern with exactly one distinct variable.
struct UnaryAtom {
  PredId pred = kNoId;
  std::vector<Term> args;  // the variable rendered as var(0)
  SegmentId seg = kNoId;

  // deterministic order; patterns anchored to explicit individuals first
  std::vector<uint32_t> key() const {
    std::vector<uint32_t> k;
    uint32_t consts = 0;
    for (const auto& tm : args)
      if (!tm.is_var) ++consts;
    k.push_back(UINT32_MAX - consts);
    k.push_back(pred);
    for (const auto& tm : args) k.push_back(tm.is_var ? 0x80000000u : tm.idx);
    k.push_back(seg);
    return k;
  }
};

inline std::vector<UnaryAtom> unary_atoms(const Theory& t) {
  std::map<std::vector<uint32_t>, UnaryAtom> by_key;
  for (const auto& c : t.clauses)
    for (const auto& lit : c.literals) {
      std::set<VarIdx> vars;
      for (const auto& tm : lit.args)
        if (tm.is_var) vars.insert(tm.idx);
      if (vars.size() != 1) continue;
      VarIdx v = *vars.begin();
      UnaryAtom ua;
      ua.pred = lit.pred;
      ua.seg = c.vars[v].segment;
      for (const auto& tm : lit.args)
        ua.args.push_back(tm.is_var ? Term::var(0) : tm);
      by_key.emplace(ua.key(), ua);
    }
  std::vector<UnaryAtom> out;
  for (auto& [k, ua] : by_key) out.push_back(ua);
  return out;
}

/// One branch of lifted case analysis: the segment splits into (true-part of
/// size j, false-part), the clauses are shattered over the split, and the
/// two unit clauses fixing the atom on each part are added.
inline Theory apply_lifted_case(const Theory& t, const UnaryAtom& ua, uint64_t j) {
  Theory out = t;
  auto [seg_true, seg_false] = split_segment(out, ua.seg, j);
  out = rule_shatter(out);
  auto add_unit = [&](SegmentId s, bool positive) {
    if (out.segments[s].size.is_zero()) return;
    Clause unit;
    unit.vars.push_back({"", s});
    Literal lit;
    lit.positive = positive;
    lit.pred = ua.pred;
    for (const auto& tm : ua.args) lit.args.push_back(tm.is_var ? Term::var(0) : tm);
    unit.literals.push_back(std::move(lit));
    out.clauses.push_back(std::move(unit));
  };
  add_unit(seg_true, true);
  add_unit(seg_false, false);
  return out;
}

/// Symbolic generic branch (both parts nonempty), for the checkers.
inline Theory apply_lifted_case_generic(const Theory& t, const UnaryAtom& ua) {
  Theory out = t;
  auto [seg_true, seg_false] = split_segment_symbolic(out, ua.seg);
  out = rule_shatter(out);
  auto add_unit = [&](SegmentId s, bool positive) {
    Clause unit;
    unit.vars.push_back({"", s});
    Literal lit;
    lit.positive = positive;
    lit.pred = ua.pred;
    for (const auto& tm : ua.args) lit.args.push_back(tm.is_var ? Term::var(0) : tm);
    unit.literals.push_back(std::move(lit));
    out.clauses.push_back(std::move(unit));
  };
  add_unit(seg_true, true);
  add_unit(seg_false, false);
  return out;
}

struct RewriteResult {
  Theory theory;
  std::vector<PredId> fresh;  // [A, B] with weights (1,1) and (1,-1)
};

/// Rewrite of a clause that factors as (forall y1: G1) v rest, where G1's
/// private variables occur nowhere else and no private variable shares a
/// segment with a private variable of the rest. Introduces A (1,1) and
/// B (1,-1); the count is preserved. Applies only when every produced
/// clause has strictly fewer distinct variables than the original.
inline std::optional<RewriteResult> reused_var_rewrite(const Theory& t, WeightFunction& w) {
  for (size_t ci = 0; ci < t.clauses.size(); ++ci) {
    const Clause& c = t.clauses[ci];
    size_t nvars = c.vars.size();
    if (nvars < 2 || c.literals.size() < 2) continue;
    // enumerate shared-variable sets X by increasing size
    std::vector<VarIdx> all_vars(nvars);
    for (VarIdx i = 0; i < nvars; ++i) all_vars[i] = i;
    if (nvars > 12) continue;
    for (uint32_t xmask = 0; xmask < (1u << nvars); ++xmask) {
      // components of literals connected via variables outside X
      std::vector<int> comp(c.literals.size(), -1);
      int ncomp = 0;
      for (size_t li = 0; li < c.literals.size(); ++li) {
        if (comp[li] >= 0) continue;
        comp[li] = ncomp;
        std::vector<size_t> stack{li};
        while (!stack.empty()) {
          size_t cur = stack.back();
          stack.pop_back();
          for (size_t lj = 0; lj < c.literals.size(); ++lj) {
            if (comp[lj] >= 0) continue;
            bool share = false;
            for (const auto& ta : c.literals[cur].args)
              for (const auto& tb : c.literals[lj].args)
                if (ta.is_var && tb.is_var && ta.idx == tb.idx && !((xmask >> ta.idx) & 1))
                  share = true;
            if (share) {
              comp[lj] = ncomp;
              stack.push_back(lj);
            }
          }
        }
        ++ncomp;
      }
      if (ncomp < 2) continue;
      std::vector<std::set<VarIdx>> priv(ncomp);
      for (size_t li = 0; li < c.literals.size(); ++li)
        for (const auto& tm : c.literals[li].args)
          if (tm.is_var && !((xmask >> tm.idx) & 1)) priv[comp[li]].insert(tm.idx);
      std::vector<VarIdx> xvars;
      bool valid = true;
      for (VarIdx v = 0; v < nvars; ++v)
        if ((xmask >> v) & 1) {
          if (!c.var_used(v)) valid = false;
          xvars.push_back(v);
        }
      if (!valid) continue;
      size_t total_priv = 0;
      for (int g = 0; g < ncomp; ++g) total_priv += priv[g].size();
      // pick the split group: nonempty privates on both sides keeps the
      // produced clauses strictly smaller; distinctness must not couple its
      // private variables with private variables of the rest
      int g1 = -1;
      for (int g = 0; g < ncomp && g1 < 0; ++g) {
        if (priv[g].empty() || total_priv == priv[g].size()) continue;
        bool coupled = false;
        for (int o = 0; o < ncomp && !coupled; ++o) {
          if (o == g) continue;
          for (VarIdx v1 : priv[g])
            for (VarIdx v2 : priv[o])
              if (c.vars[v1].segment == c.vars[v2].segment) coupled = true;
        }
        if (!coupled) g1 = g;
      }
      if (g1 < 0) continue;
      size_t g1_vars = xvars.size() + priv[g1].size();
      size_t rest_vars = xvars.size() + (total_priv - priv[g1].size());
      if (g1_vars >= nvars || rest_vars >= nvars) continue;

      // build the rewrite
      RewriteResult res;
      res.theory = t;
      Theory& out = res.theory;
      std::vector<DomainId> xdomains;
      for (VarIdx v : xvars) xdomains.push_back(out.segments[c.vars[v].segment].root);
      PredId A = out.add_predicate("@A" + std::to_string(out.predicates.size()), xdomains);
      PredId B = out.add_predicate("@B" + std::to_string(out.predicates.size()), xdomains);
      w.set(A, Rational(1), Rational(1));
      w.set(B, Rational(1), Rational(-1));
      res.fresh = {A, B};

      auto make_clause = [&](const std::vector<size_t>& lits, std::optional<std::pair<PredId, bool>> head) {
        Clause nc;
        std::vector<VarIdx> remap(nvars, kNoId);
        auto var_of = [&](VarIdx v) {
          if (remap[v] == kNoId) {
            remap[v] = static_cast<VarIdx>(nc.vars.size());
            nc.vars.push_back(c.vars[v]);
          }
          return remap[v];
        };
        if (head) {
          Literal h;
          h.positive = head->second;
          h.pred = head->first;
          for (VarIdx v : xvars) h.args.push_back(Term::var(var_of(v)));
          nc.literals.push_back(std::move(h));
        }
        for (size_t li : lits) {
          Literal l = c.literals[li];
          for (auto& tm : l.args)
            if (tm.is_var) tm = Term::var(var_of(tm.idx));
          nc.literals.push_back(std::move(l));
        }
        return nc;
      };
      std::vector<size_t> g1_lits, rest_lits;
      for (size_t li = 0; li < c.literals.size(); ++li)
        (comp[li] == g1 ? g1_lits : rest_lits).push_back(li);

      out.clauses.erase(out.clauses.begin() + static_cast<long>(ci));
      // not A -> G1 ; A -> rest ; A or B ; not B -> rest
      out.clauses.push_back(make_clause(g1_lits, std::make_pair(A, false)));
      out.clauses.push_back(make_clause(rest_lits, std::make_pair(A, true)));
      out.clauses.push_back(make_clause({}, std::make_pair(A, true)));
      out.clauses.back().literals.push_back(Literal{true, B, out.clauses.back().literals[0].args});
      out.clauses.push_back(make_clause(rest_lits, std::make_pair(B, true)));
      return res;
    }
  }
  return std::nullopt;
}

inline Theory apply_ground_segment(const Theory& t, SegmentId seg) {
  Theory out = t;
  SegmentId cur = seg;
  uint64_t n = out.segments[seg].size.concrete_value();
  for (uint64_t i = 0; i < n; ++i) {
    auto [rest, k] = split_off_individual(out, cur, out.domains[out.segments[seg].root].name + "@" +
                                                        std::to_string(i));
    cur = rest;
  }
  out = rule_shatter(out);
  compact_registry(out);
  return out;
}

}  // namespace rules

// ---------------------------------------------------------------------------
// Engine driver
// ---------------------------------------------------------------------------

template <class V>
class BasicEngine {
 public:
  using Ops = ValueOps<V>;

  BasicEngine(WeightFunction w, EngineConfig cfg, std::shared_ptr<Cache<V>> cache = nullptr)
      : base_weights_(std::move(w)), cfg_(std::move(cfg)), cache_(std::move(cache)) {
    if (!cache_) cache_ = std::make_shared<Cache<V>>();
  }

  /// WFOMC over the full universe of the theory's predicates.
  V wfomc(const Theory& t) {
    start_clock();
    auto [val, complete] = solve(t, base_weights_);
    (void)complete;
    // declared-but-unconstrained atoms contribute a free (pos+neg) factor
    std::map<DomainId, uint64_t> ext;
    for (DomainId d = 0; d < t.domains.size(); ++d) ext[d] = 0;
    for (const auto& s : t.segments)
      if (s.alive) ext[s.root] += s.size.concrete_value();
    for (const auto& c : t.constants)
      if (c.alive) ext[c.root] += 1;
    auto used = clause_universe(t);
    for (PredId p = 0; p < t.predicates.size(); ++p) {
      uint64_t full = 1;
      for (DomainId d : t.predicates[p].arg_domains) full *= ext[d];
      uint64_t u = used.count(p) ? used.at(p) : 0;
      if (full < u) throw EngineError("universe accounting: used exceeds declared");
      if (full > u)
        val = val * Ops::pow(Ops::from(base_weights_.pos(p) + base_weights_.neg(p)), full - u);
    }
    return val;
  }

  /// WFOMC over exactly the atoms the clauses denote (the node invariant).
  V wfomc_clause_universe(const Theory& t) {
    start_clock();
    return solve(t, base_weights_).first;
  }

  const EngineStats& stats() const { return stats_; }
  Cache<V>& cache() { return *cache_; }
  const EngineConfig& config() const { return cfg_; }

  /// Speculatively apply domain recursion on `seg` and run within `budget`
  /// nodes; accept iff every open leaf closes, hits the cache, or recurs at
  /// strictly smaller total size. Rejected probes leave no trace in the
  /// cache.
  bool probe_candidate(const Theory& t, const WeightFunction& w, SegmentId seg, uint64_t budget) {
    ++stats_.probes;
    write_buffers_.emplace_back();
    bool fresh_budget = probe_depth_ == 0;
    uint64_t saved_budget = probe_nodes_left_;
    if (fresh_budget) probe_nodes_left_ = budget;
    ++probe_depth_;
    bool accepted = true;
    try {
      Theory child = rule_domain_recursion(t, seg);
      solve(child, w);
    } catch (const ProbeReject&) {
      accepted = false;
    } catch (...) {
      --probe_depth_;
      if (fresh_budget) probe_nodes_left_ = saved_budget;
      write_buffers_.pop_back();
      throw;
    }
    --probe_depth_;
    if (fresh_budget) probe_nodes_left_ = saved_budget;
    auto buffer = std::move(write_buffers_.back());
    write_buffers_.pop_back();
    if (accepted) {
      ++stats_.probes_accepted;
      if (write_buffers_.empty())
        for (auto& [k, v] : buffer) cache_->insert(k, v);
      else
        for (auto& [k, v] : buffer) write_buffers_.back()[k] = v;
    }
    return accepted;
  }

 private:
  struct ProbeReject {};

  WeightFunction base_weights_;
  EngineConfig cfg_;
  std::shared_ptr<Cache<V>> cache_;
  EngineStats stats_;
  RecursionGuard guard_;
  int probe_depth_ = 0;
  uint64_t probe_nodes_left_ = 0;
  std::vector<std::map<CanonicalKey, V>> write_buffers_;
  std::unordered_map<std::string, V> raw_memo_;  // exact pre-canonical replays
  std::chrono::steady_clock::time_point deadline_{};
  bool has_deadline_ = false;

  // Value-determining serialization with segments and constants renumbered
  // by first use: clause structure, the sizes of referenced segments, and
  // the weights of referenced predicates. Much cheaper than full
  // canonicalization; catches replays such as the real descent after an
  // accepted probe, and same-shape branches built in the same order.
  static std::string raw_key(const Theory& t, const WeightFunction& w) {
    std::string out;
    out.reserve(160);
    auto u32 = [&out](uint32_t v) {
      char b[4];
      std::memcpy(b, &v, 4);
      out.append(b, 4);
    };
    SmallVec<SegmentId, 16> segs;
    SmallVec<ConstId, 16> csts;
    SmallVec<PredId, 8> preds;
    std::vector<uint32_t> seg_map(t.segments.size(), kNoId);
    std::vector<uint32_t> cst_map(t.constants.size(), kNoId);
    auto seg_of = [&](SegmentId s) {
      if (seg_map[s] == kNoId) {
        seg_map[s] = static_cast<uint32_t>(segs.size());
        segs.push_back(s);
      }
      return seg_map[s];
    };
    auto cst_of = [&](ConstId k) {
      if (cst_map[k] == kNoId) {
        cst_map[k] = static_cast<uint32_t>(csts.size());
        csts.push_back(k);
      }
      return cst_map[k];
    };
    for (const auto& c : t.clauses) {
      u32(0xfffffff0u);
      for (const auto& v : c.vars) u32(seg_of(v.segment));
      for (const auto& lit : c.literals) {
        u32(0xfffffff1u);
        u32((lit.pred << 1) | (lit.positive ? 1u : 0u));
        bool seen = false;
        for (PredId p : preds) seen |= p == lit.pred;
        if (!seen) preds.push_back(lit.pred);
        for (const auto& tm : lit.args)
          u32(tm.is_var ? (0x80000000u | tm.idx) : (0x40000000u | cst_of(tm.idx)));
      }
    }
    u32(0xfffffff2u);
    for (SegmentId s : segs) {
      const Size& sz = t.segments[s].size;
      u32(sz.symbolic ? 0xffffffffu : static_cast<uint32_t>(sz.value >> 32));
      u32(static_cast<uint32_t>(sz.value));
    }
    u32(0xfffffff3u);
    for (PredId p : preds) {
      u32(p);
      out += w.pos(p).get_str();
      out.push_back(',');
      out += w.neg(p).get_str();
      out.push_back(';');
    }
    return out;
  }

  void start_clock() {
    if (cfg_.time_limit.count() > 0) {
      deadline_ = std::chrono::steady_clock::now() + cfg_.time_limit;
      has_deadline_ = true;
    }
  }

  std::optional<V> cache_find(const CanonicalKey& k) {
    for (auto it = write_buffers_.rbegin(); it != write_buffers_.rend(); ++it) {
      auto f = it->find(k);
      if (f != it->end()) return f->second;
    }
    return cache_->find(k);
  }
  void cache_insert(const CanonicalKey& k, const V& v) {
    if (!write_buffers_.empty())
      write_buffers_.back()[k] = v;
    else
      cache_->insert(k, v);
  }

  V smooth_between(const std::map<PredId, uint64_t>& parent,
                   const std::map<PredId, uint64_t>& fixed,
                   const std::map<PredId, uint64_t>& child, const WeightFunction& w,
                   const std::vector<PredId>& fresh = {}) const {
    V f = Ops::from(Rational(1));
    for (const auto& [p, n_parent] : parent) {
      uint64_t consumed = 0;
      if (auto it = fixed.find(p); it != fixed.end()) consumed += it->second;
      if (auto it = child.find(p); it != child.end()) consumed += it->second;
      if (consumed > n_parent) throw EngineError("universe accounting: negative smoothing exponent");
      if (consumed < n_parent)
        f = f * Ops::pow(Ops::from(w.pos(p) + w.neg(p)), n_parent - consumed);
    }
    for (const auto& [p, n_child] : child) {
      if (parent.count(p)) continue;
      bool ok = false;
      for (PredId fp : fresh)
        if (fp == p) ok = true;
      if (!ok) throw EngineError("universe accounting: unexpected predicate in child");
    }
    return f;
  }

  // Returns the node value over the clause universe of `t`, and whether the
  // value is complete (probe recurrence leaves are incomplete placeholders).
  std::pair<V, bool> solve(Theory t, WeightFunction w) {
    ++stats_.nodes;
    if (cfg_.node_limit && stats_.nodes > cfg_.node_limit)
      throw BudgetExceeded("node budget exceeded");
    if (has_deadline_ && (stats_.nodes & 0x3f) == 0 &&
        std::chrono::steady_clock::now() > deadline_)
      throw BudgetExceeded("timeout");
    if (probe_depth_ > 0) {
      if (probe_nodes_left_ == 0) throw ProbeReject{};
      --probe_nodes_left_;
    }

    std::string rkey = raw_key(t, w);
    if (auto it = raw_memo_.find(rkey); it != raw_memo_.end()) {
      ++stats_.raw_hits;
      return {it->second, true};
    }
    auto out = solve_inner(std::move(t), std::move(w));
    if (out.second) raw_memo_.emplace(std::move(rkey), out.first);
    return out;
  }

  std::pair<V, bool> solve_inner(Theory t, WeightFunction w) {
    const V one = Ops::from(Rational(1));
    const V zero = Ops::from(Rational(0));
    auto universe_in = clause_universe(t);

    // simplify to fixpoint: normalization, unit propagation, subsumption,
    // segment merging
    V mult = one;
    std::map<PredId, uint64_t> fixed;
    while (true) {
      for (const auto& c : t.clauses)
        if (c.literals.empty()) return {zero, true};
      while (normalize_step(t)) {
      }
      auto up = rule_unit_propagate(t);
      if (up.applied) {
        for (const auto& fa : up.fixed) {
          mult = mult * Ops::pow(Ops::from(fa.positive ? w.pos(fa.pred) : w.neg(fa.pred)), fa.count);
          fixed[fa.pred] += fa.count;
        }
        t = std::move(up.theory);
      }
      if (up.contradiction) return {zero, true};
      if (!up.applied && !subsume_pass(t)) break;
    }

    auto universe_now = clause_universe(t);
    V entry_factor = smooth_between(universe_in, fixed, universe_now, w);

    if (t.clauses.empty()) return {entry_factor * mult, true};

    CanonicalKey key = canonical_key(t, w);
    if (auto hit = cache_find(key)) {
      ++stats_.cache_hits;
      return {entry_factor * mult * *hit, true};
    }

    if (probe_depth_ > 0) {
      // open-leaf classification: a recurrence of an ancestor recursion
      // shape at strictly smaller size closes the leaf
      auto rec = guard_.classify(shape_key(t, w), total_size(t));
      if (rec == RecursionGuard::Check::SmallerRecurrence) return {one, false};
      if (rec == RecursionGuard::Check::NonDecreasing) throw ProbeReject{};
    }

    auto result = apply_rules(std::move(t), w, universe_now);
    if (result.second) cache_insert(key, result.first);
    return {entry_factor * mult * result.first, result.second};
  }

  struct GuardScope {
    RecursionGuard* guard;
    CanonicalKey shape;
    GuardScope(RecursionGuard& g, CanonicalKey s, uint64_t size) : guard(&g), shape(std::move(s)) {
      guard->push(shape, size);
    }
    GuardScope(const GuardScope&) = delete;
    ~GuardScope() { guard->pop(shape); }
  };

  std::pair<V, bool> apply_rules(Theory t, const WeightFunction& w,
                                 const std::map<PredId, uint64_t>& universe) {
    const V one = Ops::from(Rational(1));

    // decomposition: product over connected components
    {
      auto buckets = detail::component_buckets(t);
      if (buckets.size() >= 2) {
        V prod = one;
        bool complete = true;
        for (auto& [root, members] : buckets) {
          Theory comp = t;
          comp.clauses.clear();
          for (uint32_t i : members) comp.clauses.push_back(t.clauses[i]);
          auto [v, c] = solve(std::move(comp), w);
          prod = prod * v;
          complete = complete && c;
        }
        return {prod, complete};
      }
    }
    // lifted decomposition, single-variable form
    if (auto seg = rules::lifted_decompose_candidate(t)) {
      uint64_t n = t.segments[*seg].size.concrete_value();
      Theory child = rules::apply_lifted_decompose(t, *seg);
      auto [v, c] = solve(std::move(child), w);
      return {Ops::pow(v, n), c};
    }
    // lifted decomposition over unordered pairs
    if (auto seg = rules::pair_decompose_candidate(t)) {
      uint64_t n = t.segments[*seg].size.concrete_value();
      Theory child = rules::apply_pair_decompose(t, *seg);
      auto [v, c] = solve(std::move(child), w);
      return {Ops::pow(v, n * (n - 1) / 2), c};
    }
    // ground case analysis
    {
      auto atoms = rules::ground_atoms(t);
      if (!atoms.empty()) {
        const Literal& atom = atoms.front();
        auto [v1, c1] = solve(rules::apply_case(t, atom, true), w);
        auto [v2, c2] = solve(rules::apply_case(t, atom, false), w);
        return {v1 + v2, c1 && c2};
      }
    }
    // lifted case analysis; the shattered structure is size-independent, so
    // shatter once and patch the two part sizes per branch
    {
      auto candidates = rules::unary_atoms(t);
      if (!candidates.empty()) {
        const auto& ua = candidates.front();
        uint64_t n = t.segments[ua.seg].size.concrete_value();
        Theory base = t;
        auto [seg_true, seg_false] = split_segment(base, ua.seg, 0);
        base = rule_shatter(base);
        V sum = Ops::from(Rational(0));
        bool complete = true;
        for (uint64_t j = 0; j <= n; ++j) {
          Theory branch = base;
          branch.segments[seg_true].size = Size::concrete(j);
          branch.segments[seg_false].size = Size::concrete(n - j);
          auto add_unit = [&](SegmentId s, bool positive) {
            if (branch.segments[s].size.is_zero()) return;
            Clause unit;
            unit.vars.push_back({"", s});
            Literal lit;
            lit.positive = positive;
            lit.pred = ua.pred;
            for (const auto& tm : ua.args) lit.args.push_back(tm.is_var ? Term::var(0) : tm);
            unit.literals.push_back(std::move(lit));
            branch.clauses.push_back(std::move(unit));
          };
          add_unit(seg_true, true);
          add_unit(seg_false, false);
          auto [v, c] = solve(std::move(branch), w);
          sum = sum + Ops::binom(n, j) * v;
          complete = complete && c;
        }
        return {sum, complete};
      }
    }
    // reused-variable rewrite
    {
      WeightFunction wext = w;
      if (auto rw = rules::reused_var_rewrite(t, wext)) {
        auto child_universe = clause_universe(rw->theory);
        V factor = smooth_between(universe, {}, child_universe, w, rw->fresh);
        auto [v, c] = solve(std::move(rw->theory), wext);
        return {factor * v, c};
      }
    }
    // un-shattering: fuse segments whose split carries no information
    {
      Theory merged = t;
      if (try_merge_segments(merged)) {
        auto child_universe = clause_universe(merged);
        V factor = smooth_between(universe, {}, child_universe, w);
        auto [v, c] = solve(std::move(merged), w);
        return {factor * v, c};
      }
    }
    // domain recursion behind acceptance probes, then the grounding
    // fallback, then one unprobed recursion step when grounding is oversized
    {
      std::optional<GuardScope> scope;
      uint32_t vetted_role = UINT32_MAX;
      ShapeInfo shape;
      if (cfg_.mode == EngineConfig::Mode::RD) {
        shape = shape_info(t, w);
        uint64_t tsize = total_size(t);
        auto cls = guard_.classify(shape.key, tsize);
        if (cls != RecursionGuard::Check::NonDecreasing) {
          // a recurrence of an ancestor shape inherits its accepted segment
          // role; the probe already ran at the top of the chain
          if (cls == RecursionGuard::Check::SmallerRecurrence)
            vetted_role = guard_.accepted_role(shape.key);
          scope.emplace(guard_, shape.key, tsize);
        }
      }
      auto used = t.used_segments();
      if (scope) {
        auto commit = [&](SegmentId s) {
          ++stats_.dr_steps;
          guard_.record_acceptance(shape.key, shape.seg_role.at(s));
          Theory child = rule_domain_recursion(t, s);
          auto child_universe = clause_universe(child);
          V factor = smooth_between(universe, {}, child_universe, w);
          auto [v, c] = solve(std::move(child), w);
          return std::pair<V, bool>{factor * v, c};
        };
        if (vetted_role != UINT32_MAX) {
          for (SegmentId s = 0; s < t.segments.size(); ++s)
            if (used[s] && !t.segments[s].size.is_zero() &&
                shape.seg_role.at(s) == vetted_role)
              return commit(s);
        }
        for (SegmentId s = 0; s < t.segments.size(); ++s) {
          if (!used[s] || t.segments[s].size.is_zero()) continue;
          if (!probe_candidate(t, w, s, cfg_.probe_budget)) continue;
          return commit(s);
        }
      }
      // universes are conserved by grounding, so the limit check can run
      // against the current node
      uint64_t total = 0;
      for (auto& [p, n] : universe) total += n;
      if (total <= cfg_.ground_atom_limit) {
        for (SegmentId s = 0; s < t.segments.size(); ++s) {
          if (!used[s]) continue;
          Theory child = rules::apply_ground_segment(t, s);
          ++stats_.ground_fallbacks;
          auto child_universe = clause_universe(child);
          V factor = smooth_between(universe, {}, child_universe, w);
          auto [v, c] = solve(std::move(child), w);
          return {factor * v, c};
        }
      }
      if (scope && cfg_.dr_before_grounding) {
        for (SegmentId s = 0; s < t.segments.size(); ++s) {
          if (!used[s] || t.segments[s].size.is_zero()) continue;
          ++stats_.unprobed_dr_steps;
          Theory child = rule_domain_recursion(t, s);
          auto child_universe = clause_universe(child);
          V factor = smooth_between(universe, {}, child_universe, w);
          auto [v, c] = solve(std::move(child), w);
          return {factor * v, c};
        }
      }
      throw GroundingTooLarge();
    }
  }
};

using Engine = BasicEngine<Rational>;
using FloatEngine = BasicEngine<double>;

/// Product over predicates of (pos+neg)^m where m counts the parent's ground
/// atoms that are absent from every child and were not fixed with explicit
/// weights. Equals 2^m at unit weights.
inline WfomcValue smoothing_factor(const Theory& parent, const std::vector<Theory>& children,
                                   const std::map<PredId, uint64_t>& fixed,
                                   const WeightFunction& w) {
  auto parent_u = clause_universe(parent);
  std::map<PredId, uint64_t> children_u;
  for (const auto& c : children)
    for (auto& [p, n] : clause_universe(c)) children_u[p] += n;
  Rational out(1);
  for (auto& [p, n_parent] : parent_u) {
    uint64_t consumed = 0;
    if (auto it = fixed.find(p); it != fixed.end()) consumed += it->second;
    if (auto it = children_u.find(p); it != children_u.end()) consumed += it->second;
    if (consumed > n_parent) throw EngineError("smoothing: negative exponent");
    out *= rat_pow(w.pos(p) + w.neg(p), n_parent - consumed);
  }
  return out;
}

/// Exact weighted first-order model count of the theory.
inline WfomcValue wfomc(const Theory& t, const WeightFunction& w, const EngineConfig& cfg = {}) {
  Engine engine(w, cfg);
  return engine.wfomc(t);
}

}  // namespace wfomc
