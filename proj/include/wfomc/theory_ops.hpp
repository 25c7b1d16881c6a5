#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "wfomc/logic.hpp"

namespace wfomc {

// ---------------------------------------------------------------------------
// Atom groups
//
// The ground atoms denoted by a literal are identified by the predicate, the
// per-position segment or constant, and the equality pattern among variable
// positions. Two groups over the same predicate are either equal or denote
// disjoint atom sets, because distinct live segments of one root are disjoint
// and constants are split off from every segment.
// ---------------------------------------------------------------------------

struct GroupKey {
  PredId pred = kNoId;
  // shape[i] >= 0: variable slot index (slots numbered by first occurrence);
  // shape[i] < 0: constant with id -(shape[i]+1).
  SmallVec<int32_t, 4> shape;
  SmallVec<SegmentId, 4> slot_seg;

  auto tie() const { return std::tie(pred, shape, slot_seg); }
  bool operator==(const GroupKey& o) const { return tie() == o.tie(); }
  bool operator<(const GroupKey& o) const { return tie() < o.tie(); }
};

inline GroupKey group_of(const Clause& c, const Literal& lit) {
  GroupKey g;
  g.pred = lit.pred;
  SmallVec<int32_t, 8> slot_of_var;
  for (const Term& t : lit.args) {
    if (!t.is_var) {
      g.shape.push_back(-static_cast<int32_t>(t.idx) - 1);
      continue;
    }
    if (slot_of_var.size() <= t.idx) slot_of_var.resize(t.idx + 1, -1);
    if (slot_of_var[t.idx] < 0) {
      slot_of_var[t.idx] = static_cast<int32_t>(g.slot_seg.size());
      g.slot_seg.push_back(c.vars[t.idx].segment);
    }
    g.shape.push_back(slot_of_var[t.idx]);
  }
  return g;
}

/// Number of distinct ground atoms in the group: injective assignments of the
/// slots, per segment.
inline uint64_t group_count(const Theory& t, const GroupKey& g) {
  std::map<SegmentId, uint64_t> per_seg;
  for (SegmentId s : g.slot_seg) per_seg[s]++;
  uint64_t out = 1;
  for (auto& [s, k] : per_seg) out *= falling_factorial(t.segments[s].size.concrete_value(), k);
  return out;
}

/// Per-predicate count of distinct ground atoms denoted by the clauses.
/// This is the universe the engine's node invariant ranges over.
inline std::map<PredId, uint64_t> clause_universe(const Theory& t) {
  std::set<GroupKey> groups;
  for (const auto& c : t.clauses)
    for (const auto& lit : c.literals) groups.insert(group_of(c, lit));
  std::map<PredId, uint64_t> out;
  for (const auto& g : groups) out[g.pred] += group_count(t, g);
  return out;
}

// ---------------------------------------------------------------------------
// atom_universe: raw per-(predicate, segment-tuple) counts.
// ---------------------------------------------------------------------------

struct UniverseEntry {
  PredId pred = kNoId;
  std::vector<Term> args_pattern;  // variables replaced by their segment: is_var -> idx = SegmentId

  auto tie() const {
    return std::make_tuple(pred, [this] {
      std::vector<std::pair<bool, uint32_t>> v;
      for (const auto& t : args_pattern) v.emplace_back(t.is_var, t.idx);
      return v;
    }());
  }
  bool operator<(const UniverseEntry& o) const { return tie() < o.tie(); }
};

/// Raw product counts per predicate/segment-combination used in clauses.
/// Throws SymbolicSizeError if any referenced size is symbolic.
inline std::map<UniverseEntry, uint64_t> atom_universe(const Theory& t) {
  std::map<UniverseEntry, uint64_t> out;
  for (const auto& c : t.clauses) {
    for (const auto& lit : c.literals) {
      UniverseEntry e;
      e.pred = lit.pred;
      uint64_t count = 1;
      for (const Term& tm : lit.args) {
        if (tm.is_var) {
          SegmentId s = c.vars[tm.idx].segment;
          e.args_pattern.push_back(Term::var(s));
          count *= t.segments[s].size.concrete_value();
        } else {
          e.args_pattern.push_back(tm);
        }
      }
      out[e] = count;  // same entry always recomputes to the same count
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Connected components
// ---------------------------------------------------------------------------

namespace detail {
struct UnionFind {
  std::vector<uint32_t> parent;
  explicit UnionFind(size_t n) : parent(n) {
    for (size_t i = 0; i < n; ++i) parent[i] = static_cast<uint32_t>(i);
  }
  uint32_t find(uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(uint32_t a, uint32_t b) { parent[find(a)] = find(b); }
};
}  // namespace detail

namespace detail {
inline std::map<uint32_t, std::vector<uint32_t>> component_buckets(const Theory& t) {
  UnionFind uf(t.clauses.size());
  std::map<GroupKey, uint32_t> first_owner;
  for (uint32_t i = 0; i < t.clauses.size(); ++i) {
    for (const auto& lit : t.clauses[i].literals) {
      GroupKey g = group_of(t.clauses[i], lit);
      auto [it, fresh] = first_owner.emplace(std::move(g), i);
      if (!fresh) uf.unite(i, it->second);
    }
  }
  std::map<uint32_t, std::vector<uint32_t>> buckets;
  for (uint32_t i = 0; i < t.clauses.size(); ++i) buckets[uf.find(i)].push_back(i);
  return buckets;
}
}  // namespace detail

/// Partition of the clauses into maximal groups sharing no ground atoms.
inline std::vector<Theory> connected_components(const Theory& t) {
  if (t.clauses.empty()) return {};
  auto buckets = detail::component_buckets(t);
  std::vector<Theory> out;
  if (buckets.size() == 1) {
    out.push_back(t);
    return out;
  }
  for (auto& [root, members] : buckets) {
    Theory comp = t;
    comp.clauses.clear();
    for (uint32_t i : members) comp.clauses.push_back(t.clauses[i]);
    out.push_back(std::move(comp));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Substitution and splitting
// ---------------------------------------------------------------------------

namespace detail {
/// Rebuild a clause with variable `v` removed and terms remapped.
inline Clause drop_var(const Clause& c, VarIdx v, const Term& replacement) {
  Clause out;
  std::vector<VarIdx> remap(c.vars.size(), kNoId);
  for (VarIdx i = 0; i < c.vars.size(); ++i) {
    if (i == v) continue;
    remap[i] = static_cast<VarIdx>(out.vars.size());
    out.vars.push_back(c.vars[i]);
  }
  out.literals = c.literals;
  for (auto& lit : out.literals)
    for (auto& t : lit.args) {
      if (!t.is_var) continue;
      if (t.idx == v)
        t = replacement;
      else
        t = Term::var(remap[t.idx]);
    }
  return out;
}

/// Retype variable `v` to another segment.
inline Clause retype_var(const Clause& c, VarIdx v, SegmentId seg) {
  Clause out = c;
  out.vars[v].segment = seg;
  return out;
}
}  // namespace detail

/// Substitute constant k for variable v. Remaining variables of the same
/// segment are retyped to a sub-segment excluding k; a clause whose
/// quantification becomes empty vanishes (the returned sequence is empty).
/// The exclusion segment is registered in `t`.
inline std::vector<Clause> substitute_constant(Theory& t, const Clause& c, VarIdx v, ConstId k) {
  SegmentId s = c.vars[v].segment;
  if (t.segments[s].root != t.constants[k].root)
    throw EngineError("substitute_constant: constant root does not match variable segment root");
  Clause subst = detail::drop_var(c, v, Term::constant(k));
  // Retype the other occupants of s. Lazily create the restricted segment.
  SegmentId restricted = kNoId;
  for (VarIdx i = 0; i < subst.vars.size(); ++i) {
    if (subst.vars[i].segment != s) continue;
    if (restricted == kNoId) {
      Size sz = t.segments[s].size;
      if (!sz.symbolic) {
        if (sz.value == 0) return {};  // no instance had v anyway
        sz.value -= 1;
      }
      auto excluded = t.segments[s].excluded;
      excluded.push_back(k);
      restricted = t.add_segment(t.segments[s].root, sz, std::move(excluded));
    }
    subst.vars[i].segment = restricted;
  }
  return {std::move(subst)};
}

/// Retire segment s into two fresh sub-segments of sizes (k, |s|-k).
inline std::pair<SegmentId, SegmentId> split_segment(Theory& t, SegmentId s, uint64_t k) {
  uint64_t n = t.segments[s].size.concrete_value();
  if (k > n) throw EngineError("split_segment: size out of range");
  SegmentId left = t.add_segment(t.segments[s].root, Size::concrete(k), t.segments[s].excluded);
  SegmentId right = t.add_segment(t.segments[s].root, Size::concrete(n - k), t.segments[s].excluded);
  t.segments[s].alive = false;
  t.segments[s].child_left = left;
  t.segments[s].child_right = right;
  return {left, right};
}

/// Symbolic two-way split, for the liftability checkers.
inline std::pair<SegmentId, SegmentId> split_segment_symbolic(Theory& t, SegmentId s) {
  SegmentId left = t.add_segment(t.segments[s].root, Size::sym(), t.segments[s].excluded);
  SegmentId right = t.add_segment(t.segments[s].root, Size::sym(), t.segments[s].excluded);
  t.segments[s].alive = false;
  t.segments[s].child_left = left;
  t.segments[s].child_right = right;
  return {left, right};
}

/// Retire segment s into one explicit individual plus the rest.
inline std::pair<SegmentId, ConstId> split_off_individual(Theory& t, SegmentId s, const std::string& name) {
  Size rest = t.segments[s].size;
  if (!rest.symbolic) {
    if (rest.value == 0) throw EngineError("split_off_individual: empty segment");
    rest.value -= 1;
  }
  ConstId c = t.add_constant(name, t.segments[s].root);
  auto excluded = t.segments[s].excluded;
  excluded.push_back(c);
  SegmentId r = t.add_segment(t.segments[s].root, rest, std::move(excluded));
  t.segments[s].alive = false;
  t.segments[s].child_rest = r;
  t.segments[s].child_const = c;
  return {r, c};
}

/// Drop retired segments and constants that no clause references, remapping
/// ids. Live entries stay: they carry the theory's population. Lineage links
/// are only meaningful while stale references exist, so callers compact only
/// fully shattered theories.
inline void compact_registry(Theory& t) {
  auto used_s = t.used_segments();
  auto used_c = t.used_constants();
  std::vector<SegmentId> seg_map(t.segments.size(), kNoId);
  std::vector<ConstId> cst_map(t.constants.size(), kNoId);
  std::vector<Segment> segs;
  std::vector<Constant> csts;
  for (ConstId k = 0; k < t.constants.size(); ++k)
    if (used_c[k] || t.constants[k].alive) {
      cst_map[k] = static_cast<ConstId>(csts.size());
      csts.push_back(t.constants[k]);
    }
  for (SegmentId s = 0; s < t.segments.size(); ++s) {
    if (!used_s[s] && !t.segments[s].alive) continue;
    seg_map[s] = static_cast<SegmentId>(segs.size());
    Segment seg = t.segments[s];
    seg.child_left = seg.child_right = seg.child_rest = kNoId;
    seg.child_const = kNoId;
    std::vector<ConstId> excl;
    for (ConstId k : seg.excluded)
      if (cst_map[k] != kNoId) excl.push_back(cst_map[k]);
    seg.excluded = std::move(excl);
    segs.push_back(std::move(seg));
  }
  for (auto& c : t.clauses) {
    for (auto& v : c.vars) v.segment = seg_map[v.segment];
    for (auto& lit : c.literals)
      for (auto& tm : lit.args)
        if (!tm.is_var) tm.idx = cst_map[tm.idx];
  }
  t.segments = std::move(segs);
  t.constants = std::move(csts);
}

/// Replace every clause referencing a retired segment by its shattered
/// copies, so that all referenced sub-populations are internally
/// exchangeable again. Copies that would place one explicit individual in
/// two distinct-variable positions are dropped.
inline Theory rule_shatter(const Theory& t) {
  Theory out = t;
  std::vector<Clause> work(std::move(out.clauses));
  out.clauses.clear();
  while (!work.empty()) {
    Clause c = std::move(work.back());
    work.pop_back();
    VarIdx stale = kNoId;
    for (VarIdx i = 0; i < c.vars.size(); ++i)
      if (!out.segments[c.vars[i].segment].alive) {
        stale = i;
        break;
      }
    if (stale == kNoId) {
      out.clauses.push_back(std::move(c));
      continue;
    }
    const Segment& seg = out.segments[c.vars[stale].segment];
    if (seg.has_size_split()) {
      work.push_back(detail::retype_var(c, stale, seg.child_left));
      work.push_back(detail::retype_var(c, stale, seg.child_right));
    } else if (seg.has_const_split()) {
      work.push_back(detail::retype_var(c, stale, seg.child_rest));
      bool already_there = false;  // a sibling variable already took this individual
      for (const auto& lit : c.literals)
        for (const auto& tm : lit.args)
          if (!tm.is_var && tm.idx == seg.child_const) already_there = true;
      if (!already_there) work.push_back(detail::drop_var(c, stale, Term::constant(seg.child_const)));
    } else {
      throw EngineError("rule_shatter: retired segment without lineage");
    }
  }
  std::reverse(out.clauses.begin(), out.clauses.end());
  return out;
}

// ---------------------------------------------------------------------------
// Clause-local canonical signature (exact; used for duplicate detection).
// ---------------------------------------------------------------------------

namespace detail {

using ClauseSig = SmallVec<uint32_t, 40>;

inline void clause_signature_with_order(const Clause& c, const std::vector<VarIdx>& var_rank,
                                        ClauseSig& out) {
  SmallVec<SmallVec<uint32_t, 8>, 8> lits;
  lits.reserve(c.literals.size());
  for (const auto& lit : c.literals) {
    SmallVec<uint32_t, 8> s;
    s.push_back((lit.pred << 1) | (lit.positive ? 1u : 0u));
    for (const auto& tm : lit.args)
      s.push_back(tm.is_var ? (0x80000000u | var_rank[tm.idx]) : tm.idx);
    lits.push_back(std::move(s));
  }
  std::sort(lits.begin(), lits.end());
  for (auto& s : lits) {
    out.insert(out.end(), s.begin(), s.end());
    out.push_back(0xffffffffu);
  }
}

/// Cheap exact signature with variables ranked by (segment, declaration
/// order). Identical-up-to-renaming clauses may get distinct signatures;
/// the subsumption sweep removes those, and the canonical serialization
/// performs the full renaming-invariant minimization.
inline ClauseSig clause_signature(const Clause& c) {
  std::map<SegmentId, SmallVec<VarIdx, 6>> by_seg;
  for (VarIdx i = 0; i < c.vars.size(); ++i) by_seg[c.vars[i].segment].push_back(i);
  ClauseSig header;
  std::vector<VarIdx> rank(c.vars.size(), 0);
  uint32_t r = 0;
  for (auto& [s, vs] : by_seg) {
    header.push_back(s);
    header.push_back(static_cast<uint32_t>(vs.size()));
    for (VarIdx v : vs) rank[v] = r++;
  }
  header.push_back(0xfffffffeu);
  clause_signature_with_order(c, rank, header);
  return header;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Normalization: duplicate literals, tautologies, vacuous clauses and
// variables, duplicate clauses. Returns whether anything changed.
// ---------------------------------------------------------------------------

/// A clause with more distinct variables than individuals in some segment
/// has no instances.
inline bool clause_vacuous(const Theory& t, const Clause& c) {
  for (VarIdx i = 0; i < c.vars.size(); ++i) {
    const Size& sz = t.segments[c.vars[i].segment].size;
    if (sz.symbolic) continue;
    uint64_t same = 0;
    for (VarIdx j = 0; j < c.vars.size(); ++j)
      if (c.vars[j].segment == c.vars[i].segment) ++same;
    if (sz.value < same) return true;
  }
  return false;
}

namespace detail {
/// Everything but renaming-aware clause deduplication.
inline bool normalize_pass(Theory& t, bool dedupe) {
  bool changed = false;
  std::vector<Clause> kept;
  kept.reserve(t.clauses.size());
  std::set<ClauseSig> seen;
  for (auto& c : t.clauses) {
    if (clause_vacuous(t, c)) {
      changed = true;
      continue;
    }
    // unused variables quantify over nonempty populations and can be dropped
    for (VarIdx i = 0; i < c.vars.size();) {
      if (!c.var_used(i)) {
        c = detail::drop_var(c, i, Term::var(kNoId));
        changed = true;
      } else {
        ++i;
      }
    }
    // duplicate literals
    for (size_t i = 0; i < c.literals.size(); ++i)
      for (size_t j = c.literals.size(); j-- > i + 1;)
        if (c.literals[i] == c.literals[j]) {
          c.literals.erase(c.literals.begin() + static_cast<long>(j));
          changed = true;
        }
    // tautology
    bool taut = false;
    for (size_t i = 0; i < c.literals.size() && !taut; ++i)
      for (size_t j = i + 1; j < c.literals.size() && !taut; ++j)
        if (c.literals[i].positive != c.literals[j].positive &&
            c.literals[i].same_atom(c.literals[j]))
          taut = true;
    if (taut) {
      changed = true;
      continue;
    }
    if (dedupe && !seen.insert(clause_signature(c)).second) {
      changed = true;
      continue;
    }
    kept.push_back(std::move(c));
  }
  t.clauses = std::move(kept);
  return changed;
}
}  // namespace detail

inline bool normalize_step(Theory& t) { return detail::normalize_pass(t, true); }

// ---------------------------------------------------------------------------
// Subsumption. Clause c1 is dropped when another clause's literals map
// injectively into it under a segment-preserving injective variable mapping.
// Sound and incomplete; the mapping search is capped.
// ---------------------------------------------------------------------------

namespace detail {

inline bool subsumes(const Clause& small, const Clause& big, uint64_t* budget) {
  if (small.literals.size() > big.literals.size()) return false;
  std::vector<uint32_t> var_map(small.vars.size(), kNoId);
  std::vector<bool> var_taken(big.vars.size(), false);
  std::vector<bool> lit_taken(big.literals.size(), false);

  struct Frame {
    size_t li;
  };
  std::vector<int> choice(small.literals.size(), -1);

  // match literal terms; extend var_map injectively
  auto try_match = [&](const Literal& a, const Literal& b, std::vector<std::pair<VarIdx, VarIdx>>& added) {
    if (a.positive != b.positive || a.pred != b.pred) return false;
    for (size_t i = 0; i < a.args.size(); ++i) {
      const Term& ta = a.args[i];
      const Term& tb = b.args[i];
      if (!ta.is_var) {
        if (tb.is_var || tb.idx != ta.idx) goto fail;
        continue;
      }
      if (!tb.is_var) goto fail;  // variables cover whole segments, never one constant
      if (small.vars[ta.idx].segment != big.vars[tb.idx].segment) goto fail;
      if (var_map[ta.idx] == tb.idx) continue;
      if (var_map[ta.idx] != kNoId || var_taken[tb.idx]) goto fail;
      var_map[ta.idx] = tb.idx;
      var_taken[tb.idx] = true;
      added.emplace_back(ta.idx, tb.idx);
    }
    return true;
  fail:
    for (auto& [sa, sb] : added) {
      var_map[sa] = kNoId;
      var_taken[sb] = false;
    }
    added.clear();
    return false;
  };

  std::vector<std::vector<std::pair<VarIdx, VarIdx>>> undo(small.literals.size());
  size_t si = 0;
  while (true) {
    if (si == small.literals.size()) return true;
    bool advanced = false;
    for (size_t li = static_cast<size_t>(choice[si] + 1); li < big.literals.size(); ++li) {
      if (lit_taken[li]) continue;
      if (*budget == 0) return false;
      --*budget;
      undo[si].clear();
      if (try_match(small.literals[si], big.literals[li], undo[si])) {
        choice[si] = static_cast<int>(li);
        lit_taken[li] = true;
        ++si;
        advanced = true;
        break;
      }
    }
    if (advanced) continue;
    choice[si] = -1;
    if (si == 0) return false;
    --si;
    lit_taken[static_cast<size_t>(choice[si])] = false;
    for (auto& [sa, sb] : undo[si]) {
      var_map[sa] = kNoId;
      var_taken[sb] = false;
    }
    undo[si].clear();
  }
}

}  // namespace detail

/// Subsumption sweep alone; callers keep the theory normalized.
inline bool subsume_pass(Theory& t) {
  bool changed = false;
  std::vector<bool> dead(t.clauses.size(), false);
  for (size_t i = 0; i < t.clauses.size(); ++i) {
    if (dead[i]) continue;
    for (size_t j = 0; j < t.clauses.size(); ++j) {
      if (i == j || dead[j] || dead[i]) continue;
      if (t.clauses[i].literals.size() > t.clauses[j].literals.size()) continue;
      uint64_t budget = 1000;
      if (detail::subsumes(t.clauses[i], t.clauses[j], &budget)) dead[j] = true;
    }
  }
  std::vector<Clause> kept;
  for (size_t i = 0; i < t.clauses.size(); ++i)
    if (!dead[i])
      kept.push_back(std::move(t.clauses[i]));
    else
      changed = true;
  t.clauses = std::move(kept);
  return changed;
}

/// Drops tautologies (via normalize_step) and subsumed clauses.
/// Returns true if anything was removed.
inline bool rule_tautology_subsume(Theory& t) {
  bool changed = normalize_step(t);
  changed |= subsume_pass(t);
  return changed;
}

// ---------------------------------------------------------------------------
// Unit propagation (structural part; the engine applies the weights).
// ---------------------------------------------------------------------------

struct FixedAtoms {
  PredId pred = kNoId;
  bool positive = true;
  uint64_t count = 0;  // distinct ground atoms fixed
  GroupKey group;
};

struct UnitPropResult {
  Theory theory;
  std::vector<FixedAtoms> fixed;
  bool contradiction = false;
  bool applied = false;
};

/// Propagate every unit clause: fix its ground atoms, delete satisfied
/// clauses, strip falsified literals. An emptied clause marks the branch
/// contradictory.
inline UnitPropResult rule_unit_propagate(const Theory& t) {
  UnitPropResult res;
  res.theory = t;
  detail::normalize_pass(res.theory, false);
  bool symbolic = !res.theory.all_sizes_concrete();
  bool progress = true;
  while (progress) {
    progress = false;
    size_t unit_idx = res.theory.clauses.size();
    for (size_t i = 0; i < res.theory.clauses.size(); ++i)
      if (res.theory.clauses[i].literals.size() == 1 &&
          !clause_vacuous(res.theory, res.theory.clauses[i])) {
        unit_idx = i;
        break;
      }
    if (unit_idx == res.theory.clauses.size()) break;
    Clause unit = res.theory.clauses[unit_idx];
    res.theory.clauses.erase(res.theory.clauses.begin() + static_cast<long>(unit_idx));
    const Literal& ul = unit.literals[0];
    GroupKey ug = group_of(unit, ul);
    FixedAtoms fa;
    fa.pred = ul.pred;
    fa.positive = ul.positive;
    fa.group = ug;
    fa.count = symbolic ? 0 : group_count(res.theory, ug);
    res.fixed.push_back(fa);
    res.applied = true;
    progress = true;

    std::vector<Clause> next;
    next.reserve(res.theory.clauses.size());
    for (auto& c : res.theory.clauses) {
      bool satisfied = false;
      bool touched = false;
      SmallVec<Literal, 6> lits;
      for (auto& lit : c.literals) {
        if (lit.pred == ul.pred && group_of(c, lit) == ug) {
          if (lit.positive == ul.positive) {
            satisfied = true;
            break;
          }
          touched = true;
          continue;  // falsified in every instance
        }
        lits.push_back(lit);
      }
      if (satisfied) continue;
      if (!touched) {
        next.push_back(std::move(c));
        continue;
      }
      if (lits.empty()) {
        if (clause_vacuous(res.theory, c)) continue;  // no instances to violate
        res.contradiction = true;
        return res;
      }
      Clause nc = std::move(c);
      nc.literals = std::move(lits);
      next.push_back(std::move(nc));
    }
    res.theory.clauses = std::move(next);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Segment merging (un-shattering). Two live segments of one root may be
// fused when re-shattering the fused theory reproduces the original clause
// set exactly; the check makes the rewrite self-certifying.
// ---------------------------------------------------------------------------

namespace detail {
inline std::multiset<ClauseSig> clause_sigs(const Theory& t) {
  std::multiset<ClauseSig> out;
  for (const auto& c : t.clauses) out.insert(clause_signature(c));
  return out;
}
}  // namespace detail

inline bool try_merge_segments(Theory& t) {
  auto used = t.used_segments();
  std::vector<SegmentId> live;
  for (SegmentId s = 0; s < t.segments.size(); ++s)
    if (used[s]) live.push_back(s);
  for (size_t a = 0; a < live.size(); ++a) {
    for (size_t b = a + 1; b < live.size(); ++b) {
      SegmentId s1 = live[a], s2 = live[b];
      if (t.segments[s1].root != t.segments[s2].root) continue;
      if (t.segments[s1].size.symbolic != t.segments[s2].size.symbolic) continue;
      Theory merged = t;
      Size sz = t.segments[s1].size;
      if (!sz.symbolic) sz.value += t.segments[s2].size.value;
      std::vector<ConstId> excl;  // intersection of exclusions
      for (ConstId c : t.segments[s1].excluded)
        for (ConstId c2 : t.segments[s2].excluded)
          if (c == c2) excl.push_back(c);
      SegmentId fused = merged.add_segment(t.segments[s1].root, sz, excl);
      for (auto& c : merged.clauses)
        for (auto& v : c.vars)
          if (v.segment == s1 || v.segment == s2) v.segment = fused;
      normalize_step(merged);
      // verify: shattering the fused segment back reproduces t
      Theory check = merged;
      check.segments[fused].alive = false;
      check.segments[fused].child_left = s1;
      check.segments[fused].child_right = s2;
      check = rule_shatter(check);
      normalize_step(check);
      Theory base = t;
      normalize_step(base);
      if (detail::clause_sigs(check) == detail::clause_sigs(base)) {
        merged.segments[fused].alive = true;
        t = std::move(merged);
        return true;
      }
    }
  }
  return false;
}

}  // namespace wfomc
