#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "wfomc/logic.hpp"
#include "wfomc/theory_ops.hpp"

namespace wfomc {

/// Deliberately dumb reference counter: complete propositional grounding and
/// a sum over all assignments. Independent of the lifted engine.

struct GroundClauseOption {
  uint64_t pos_mask = 0;  // over constrained-atom indices
  uint64_t neg_mask = 0;
};

struct GroundClause {
  // A universal instance has one option; an instance of an existential
  // sentence has one option per witness and is satisfied when any holds.
  std::vector<GroundClauseOption> options;
};

struct GroundTheory {
  uint64_t total_atoms = 0;                 // full universe of the declared predicates
  uint32_t constrained_atoms = 0;           // atoms that occur in some ground clause
  std::vector<PredId> atom_pred;            // per constrained atom
  std::vector<uint64_t> unconstrained_per_pred;  // pred -> atoms in no clause
  std::vector<GroundClause> clauses;
  size_t pred_count = 0;
};

/// Theory whose clauses may carry one leading existential variable; the
/// pre-Skolemization form. exists_var[i] < 0 means purely universal.
struct QuantifiedTheory {
  Theory base;
  std::vector<int32_t> exists_var;

  static QuantifiedTheory universal(Theory t) {
    QuantifiedTheory q;
    q.exists_var.assign(t.clauses.size(), -1);
    q.base = std::move(t);
    return q;
  }
};

namespace oracle_detail {

struct Individual {
  DomainId root;
  SegmentId segment;  // kNoId for named constants
  uint32_t index;     // within segment block, or ConstId
};

struct Universe {
  std::vector<Individual> individuals;
  std::map<DomainId, std::vector<uint32_t>> by_root;
  std::map<SegmentId, std::vector<uint32_t>> by_segment;
  std::map<ConstId, uint32_t> by_const;
};

inline Universe materialize(const Theory& t) {
  Universe u;
  for (ConstId c = 0; c < t.constants.size(); ++c) {
    if (!t.constants[c].alive) continue;
    uint32_t id = static_cast<uint32_t>(u.individuals.size());
    u.individuals.push_back({t.constants[c].root, kNoId, c});
    u.by_root[t.constants[c].root].push_back(id);
    u.by_const[c] = id;
  }
  for (SegmentId s = 0; s < t.segments.size(); ++s) {
    if (!t.segments[s].alive) continue;
    uint64_t n = t.segments[s].size.concrete_value();
    for (uint64_t i = 0; i < n; ++i) {
      uint32_t id = static_cast<uint32_t>(u.individuals.size());
      u.individuals.push_back({t.segments[s].root, s, static_cast<uint32_t>(i)});
      u.by_root[t.segments[s].root].push_back(id);
      u.by_segment[s].push_back(id);
    }
  }
  return u;
}

using AtomKey = std::pair<PredId, std::vector<uint32_t>>;

struct Instance {
  std::vector<std::pair<bool, AtomKey>> literals;
};

/// All injective-per-segment assignments of the clause variables.
template <typename Fn>
inline void enumerate_groundings(const Clause& c, const Universe& u, Fn&& fn) {
  std::vector<uint32_t> chosen(c.vars.size(), UINT32_MAX);
  auto rec = [&](auto&& self, size_t vi) -> void {
    if (vi == c.vars.size()) {
      fn(chosen);
      return;
    }
    const auto it = u.by_segment.find(c.vars[vi].segment);
    if (it == u.by_segment.end()) return;  // empty segment: no instances
    for (uint32_t ind : it->second) {
      bool clash = false;
      for (size_t p = 0; p < vi; ++p)
        if (c.vars[p].segment == c.vars[vi].segment && chosen[p] == ind) clash = true;
      if (clash) continue;
      chosen[vi] = ind;
      self(self, vi + 1);
    }
    chosen[vi] = UINT32_MAX;
  };
  rec(rec, 0);
}

inline AtomKey atom_of(const Literal& lit, const Universe& u,
                       const std::vector<uint32_t>& chosen) {
  AtomKey a;
  a.first = lit.pred;
  for (const Term& tm : lit.args)
    a.second.push_back(tm.is_var ? chosen[tm.idx] : u.by_const.at(tm.idx));
  return a;
}

}  // namespace oracle_detail

/// Complete propositional grounding with implicit-distinctness honored.
/// Throws OracleLimitExceeded when the universe exceeds `atom_limit`.
inline GroundTheory ground_theory(const QuantifiedTheory& qt, uint64_t atom_limit = 26) {
  using namespace oracle_detail;
  const Theory& t = qt.base;
  Universe u = materialize(t);

  GroundTheory g;
  g.pred_count = t.predicates.size();
  std::vector<uint64_t> full_per_pred(t.predicates.size(), 0);
  for (PredId p = 0; p < t.predicates.size(); ++p) {
    uint64_t n = 1;
    for (DomainId d : t.predicates[p].arg_domains) {
      auto it = u.by_root.find(d);
      n *= it == u.by_root.end() ? 0 : it->second.size();
    }
    full_per_pred[p] = n;
    g.total_atoms += n;
  }
  if (g.total_atoms > atom_limit) throw OracleLimitExceeded();

  std::map<AtomKey, uint32_t> atom_index;
  auto intern = [&](const AtomKey& a) {
    auto [it, fresh] = atom_index.emplace(a, static_cast<uint32_t>(atom_index.size()));
    if (fresh) {
      if (atom_index.size() > 62) throw OracleLimitExceeded();  // bitmask width
      g.atom_pred.push_back(a.first);
    }
    return it->second;
  };

  for (size_t ci = 0; ci < t.clauses.size(); ++ci) {
    const Clause& c = t.clauses[ci];
    int32_t ev = qt.exists_var[ci];
    if (ev < 0) {
      enumerate_groundings(c, u, [&](const std::vector<uint32_t>& chosen) {
        GroundClause gc;
        GroundClauseOption opt;
        for (const auto& lit : c.literals) {
          uint32_t a = intern(atom_of(lit, u, chosen));
          (lit.positive ? opt.pos_mask : opt.neg_mask) |= (uint64_t{1} << a);
        }
        gc.options.push_back(opt);
        g.clauses.push_back(std::move(gc));
      });
      continue;
    }
    // one leading existential: enumerate universal variables, then witnesses
    Clause universal = c;  // same vars; we filter the existential one manually
    VarIdx evar = static_cast<VarIdx>(ev);
    std::vector<VarIdx> uni;
    for (VarIdx i = 0; i < c.vars.size(); ++i)
      if (i != evar) uni.push_back(i);
    // enumerate assignments to universal vars (injective per segment)
    std::vector<uint32_t> chosen(c.vars.size(), UINT32_MAX);
    auto rec = [&](auto&& self, size_t k) -> void {
      if (k == uni.size()) {
        GroundClause gc;
        auto it = u.by_segment.find(c.vars[evar].segment);
        if (it != u.by_segment.end()) {
          for (uint32_t wit : it->second) {
            bool clash = false;
            for (VarIdx ui : uni)
              if (c.vars[ui].segment == c.vars[evar].segment && chosen[ui] == wit) clash = true;
            if (clash) continue;
            chosen[evar] = wit;
            GroundClauseOption opt;
            for (const auto& lit : c.literals) {
              uint32_t a = intern(atom_of(lit, u, chosen));
              (lit.positive ? opt.pos_mask : opt.neg_mask) |= (uint64_t{1} << a);
            }
            gc.options.push_back(opt);
            chosen[evar] = UINT32_MAX;
          }
        }
        // no witness at all: unsatisfiable instance (empty option set)
        g.clauses.push_back(std::move(gc));
        return;
      }
      VarIdx vi = uni[k];
      auto it = u.by_segment.find(c.vars[vi].segment);
      if (it == u.by_segment.end()) return;
      for (uint32_t ind : it->second) {
        bool clash = false;
        for (size_t p = 0; p < k; ++p)
          if (c.vars[uni[p]].segment == c.vars[vi].segment && chosen[uni[p]] == ind) clash = true;
        if (clash) continue;
        chosen[vi] = ind;
        self(self, k + 1);
      }
      chosen[vi] = UINT32_MAX;
    };
    rec(rec, 0);
  }

  g.constrained_atoms = static_cast<uint32_t>(atom_index.size());
  std::vector<uint64_t> constrained_per_pred(t.predicates.size(), 0);
  for (PredId p : g.atom_pred) constrained_per_pred[p]++;
  g.unconstrained_per_pred.resize(t.predicates.size());
  for (PredId p = 0; p < t.predicates.size(); ++p)
    g.unconstrained_per_pred[p] = full_per_pred[p] - constrained_per_pred[p];
  return g;
}

inline GroundTheory ground_theory(const Theory& t, uint64_t atom_limit = 26) {
  return ground_theory(QuantifiedTheory::universal(t), atom_limit);
}

/// Exact sum over all assignments of per-atom weights for satisfying
/// interpretations. Evaluates assignment blocks in parallel when large;
/// merges by exact addition in block order.
inline WfomcValue brute_force_wfomc(const GroundTheory& g, const WeightFunction& w) {
  const uint32_t m = g.constrained_atoms;
  // power tables per predicate
  std::vector<std::vector<Rational>> pow_pos(g.pred_count), pow_neg(g.pred_count);
  std::vector<uint64_t> pred_mask(g.pred_count, 0);
  std::vector<uint32_t> pred_atoms(g.pred_count, 0);
  for (uint32_t a = 0; a < m; ++a) {
    pred_mask[g.atom_pred[a]] |= (uint64_t{1} << a);
    pred_atoms[g.atom_pred[a]]++;
  }
  for (PredId p = 0; p < g.pred_count; ++p) {
    pow_pos[p].resize(pred_atoms[p] + 1, Rational(1));
    pow_neg[p].resize(pred_atoms[p] + 1, Rational(1));
    for (uint32_t i = 1; i <= pred_atoms[p]; ++i) {
      pow_pos[p][i] = pow_pos[p][i - 1] * w.pos(p);
      pow_neg[p][i] = pow_neg[p][i - 1] * w.neg(p);
    }
  }

  auto eval_range = [&](uint64_t lo, uint64_t hi) {
    Rational acc(0);
    for (uint64_t assign = lo; assign < hi; ++assign) {
      bool sat = true;
      for (const auto& gc : g.clauses) {
        bool clause_ok = false;
        for (const auto& opt : gc.options) {
          if ((assign & opt.pos_mask) != 0 || (~assign & opt.neg_mask) != 0) {
            clause_ok = true;
            break;
          }
        }
        if (!clause_ok) {
          sat = false;
          break;
        }
      }
      if (!sat) continue;
      Rational weight(1);
      for (PredId p = 0; p < g.pred_count; ++p) {
        if (pred_atoms[p] == 0) continue;
        uint32_t pos = static_cast<uint32_t>(__builtin_popcountll(assign & pred_mask[p]));
        weight *= pow_pos[p][pos];
        weight *= pow_neg[p][pred_atoms[p] - pos];
      }
      acc += weight;
    }
    return acc;
  };

  Rational total(0);
  const uint64_t count = m >= 64 ? 0 : (uint64_t{1} << m);
  if (m >= 20) {
    unsigned jobs = std::max(2u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, 16);
    uint64_t block = (count + jobs - 1) / jobs;
    std::vector<Rational> partial(jobs, Rational(0));
    std::vector<std::thread> threads;
    for (unsigned j = 0; j < jobs; ++j) {
      uint64_t lo = j * block, hi = std::min(count, lo + block);
      threads.emplace_back([&, j, lo, hi] { partial[j] = eval_range(lo, hi); });
    }
    for (auto& th : threads) th.join();
    for (auto& p : partial) total += p;
  } else {
    total = eval_range(0, count);
  }

  // atoms constrained by no clause contribute a free (pos+neg) factor
  for (PredId p = 0; p < g.pred_count; ++p)
    if (g.unconstrained_per_pred[p] > 0)
      total *= rat_pow(w.pos(p) + w.neg(p), g.unconstrained_per_pred[p]);
  return total;
}

inline WfomcValue oracle_wfomc(const Theory& t, const WeightFunction& w, uint64_t atom_limit = 26) {
  return brute_force_wfomc(ground_theory(t, atom_limit), w);
}

inline WfomcValue oracle_wfomc(const QuantifiedTheory& qt, const WeightFunction& w,
                               uint64_t atom_limit = 26) {
  return brute_force_wfomc(ground_theory(qt, atom_limit), w);
}

/// Reference value over exactly the atoms the clauses denote (no free factor
/// for declared-but-unconstrained atoms). This is the invariant the engine
/// maintains at every node.
inline WfomcValue oracle_wfomc_clause_universe(const Theory& t, const WeightFunction& w,
                                               uint64_t atom_limit = 26) {
  GroundTheory g = ground_theory(t, std::max<uint64_t>(atom_limit, 62));
  if (g.constrained_atoms > atom_limit) throw OracleLimitExceeded();
  for (auto& u : g.unconstrained_per_pred) u = 0;
  return brute_force_wfomc(g, w);
}

}  // namespace wfomc
