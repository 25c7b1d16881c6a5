#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wfomc/canonical.hpp"
#include "wfomc/engine.hpp"
#include "wfomc/logic.hpp"
#include "wfomc/theory_ops.hpp"

namespace wfomc {

/// Three-valued membership result with a witness. Yes/no answers are sound;
/// unknown arises only from recursion cutoffs in the RU checkers.
struct ClassReport {
  enum class Status { Yes, No, Unknown };
  struct Entry {
    Status status = Status::Unknown;
    std::string witness;
  };
  Entry fo2, ru, s2fo2, s2ru;
};

inline const char* status_str(ClassReport::Status s) {
  switch (s) {
    case ClassReport::Status::Yes:
      return "yes";
    case ClassReport::Status::No:
      return "no";
    default:
      return "unknown";
  }
}

// ---------------------------------------------------------------------------
// FO2: every clause has at most two distinct logical variables. One pass.
// ---------------------------------------------------------------------------

inline ClassReport::Entry is_fo2(const Theory& t) {
  for (const auto& c : t.clauses) {
    std::set<VarIdx> used;
    for (const auto& lit : c.literals)
      for (const auto& tm : lit.args)
        if (tm.is_var) used.insert(tm.idx);
    if (used.size() > 2)
      return {ClassReport::Status::No,
              "clause with " + std::to_string(used.size()) + " logical variables: " +
                  clause_str(t, c)};
  }
  return {ClassReport::Status::Yes, ""};
}

// ---------------------------------------------------------------------------
// RU: apply the rules except lifted case analysis to exhaustion at symbolic
// domain sizes; every stuck theory must offer a unary PRV whose generic
// branch is recursively RU.
// ---------------------------------------------------------------------------

namespace ru_detail {

struct Checker {
  std::map<CanonicalKey, int> memo;  // 1 yes, 0 no, -1 unknown, 2 in progress
  WeightFunction unit_weights;       // structural runs carry no real weights
  size_t visited = 0;
  std::string witness;

  static Theory symbolize(const Theory& t) {
    Theory out = t;
    for (auto& s : out.segments) s.size = Size::sym();
    return out;
  }

  /// Exhaust every rule in R except lifted case analysis; collect the stuck
  /// residues of all branches.
  void exhaust(Theory t, std::vector<Theory>& stuck, int depth) {
    if (depth > 64 || ++visited > 60000) {
      stuck.push_back(std::move(t));  // give up; treated as a cutoff later
      return;
    }
    while (true) {
      for (const auto& c : t.clauses)
        if (c.literals.empty()) return;  // contradiction: branch closed
      while (normalize_step(t)) {
      }
      auto up = rule_unit_propagate(t);
      if (up.contradiction) return;
      if (up.applied) {
        t = std::move(up.theory);
        continue;
      }
      if (rule_tautology_subsume(t)) continue;
      if (try_merge_segments(t)) continue;
      if (t.clauses.empty()) return;  // solved
      auto comps = connected_components(t);
      if (comps.size() >= 2) {
        for (auto& comp : comps) exhaust(std::move(comp), stuck, depth + 1);
        return;
      }
      if (auto seg = rules::lifted_decompose_candidate(t)) {
        t = rules::apply_lifted_decompose(t, *seg);
        continue;
      }
      if (auto seg = rules::pair_decompose_candidate(t)) {
        t = rules::apply_pair_decompose(t, *seg);
        continue;
      }
      auto atoms = rules::ground_atoms(t);
      if (!atoms.empty()) {
        exhaust(rules::apply_case(t, atoms.front(), true), stuck, depth + 1);
        exhaust(rules::apply_case(t, atoms.front(), false), stuck, depth + 1);
        return;
      }
      {
        WeightFunction scratch = unit_weights;
        if (auto rw = rules::reused_var_rewrite(t, scratch)) {
          t = std::move(rw->theory);
          continue;
        }
      }
      stuck.push_back(std::move(t));
      return;
    }
  }

  int check(const Theory& t, int depth) {
    if (depth > 48) return -1;
    CanonicalKey key = canonical_key(t, unit_weights);
    if (auto it = memo.find(key); it != memo.end()) {
      if (it->second == 2) return -1;  // repeating shape: cut off
      return it->second;
    }
    memo[key] = 2;
    int result = 1;
    std::vector<Theory> stuck;
    exhaust(t, stuck, depth);
    for (const auto& leaf : stuck) {
      if (visited > 60000) {
        result = -1;
        break;
      }
      auto unary = rules::unary_atoms(leaf);
      if (unary.empty()) {
        witness = "no unary PRV after exhausting the rules: " + theory_str(leaf);
        result = 0;
        break;
      }
      int leaf_result = 0;
      for (const auto& ua : unary) {
        Theory branch = rules::apply_lifted_case_generic(leaf, ua);
        int r = check(branch, depth + 1);
        if (r == 1) {
          leaf_result = 1;
          break;
        }
        if (r == -1) leaf_result = -1;
      }
      if (leaf_result == 0) {
        if (witness.empty()) witness = "no liftable case analysis for: " + theory_str(leaf);
        result = 0;
        break;
      }
      if (leaf_result == -1) result = -1;
    }
    memo[key] = result;
    return result;
  }
};

}  // namespace ru_detail

inline ClassReport::Entry is_ru(const Theory& t) {
  ru_detail::Checker checker;
  Theory sym = ru_detail::Checker::symbolize(normalize_theory(t));
  int r = checker.check(sym, 0);
  if (r == 1) return {ClassReport::Status::Yes, ""};
  if (r == 0) return {ClassReport::Status::No, checker.witness};
  return {ClassReport::Status::Unknown, "recursion cutoff while checking"};
}

// ---------------------------------------------------------------------------
// S2FO2 / S2RU: search for a set of binary predicates S such that the
// alpha clauses have exactly two different literals of one S each and no
// other literals, while the remaining clauses carry at most one S literal,
// those carrying one have no other literal with more than one variable, and
// the remainder is FO2 (resp. RU).
// ---------------------------------------------------------------------------

namespace s2_detail {

struct Partition {
  std::vector<PredId> alpha_preds;
  Theory beta;
  std::string describe(const Theory& t) const {
    if (alpha_preds.empty()) return "S = {} (no two-literal clause set needed)";
    std::string out = "S = {";
    for (size_t i = 0; i < alpha_preds.size(); ++i) {
      if (i) out += ", ";
      out += t.predicates[alpha_preds[i]].name;
    }
    out += "}";
    return out;
  }
};

/// Try one candidate set; null when the clause constraints fail.
inline std::optional<Partition> try_partition(const Theory& t, const std::vector<PredId>& cand) {
  auto in_cand = [&](PredId p) {
    for (PredId q : cand)
      if (p == q) return true;
    return false;
  };
  Partition out;
  out.beta = t;
  out.beta.clauses.clear();
  std::set<PredId> used_alpha;
  for (const auto& c : t.clauses) {
    std::map<PredId, int> s_lits;
    int total_s = 0;
    for (const auto& lit : c.literals)
      if (in_cand(lit.pred)) {
        s_lits[lit.pred]++;
        ++total_s;
      }
    if (total_s == 0) {
      out.beta.clauses.push_back(c);
      continue;
    }
    bool pure_alpha = s_lits.size() == 1 && total_s == 2 &&
                      c.literals.size() == 2;  // two different literals of one S, nothing else
    if (pure_alpha) {
      used_alpha.insert(s_lits.begin()->first);
      continue;  // handled by the alpha component
    }
    if (total_s != 1) return std::nullopt;
    // one S literal: every other literal must have at most one variable
    for (const auto& lit : c.literals) {
      if (in_cand(lit.pred)) continue;
      std::set<VarIdx> vars;
      for (const auto& tm : lit.args)
        if (tm.is_var) vars.insert(tm.idx);
      if (vars.size() > 1) return std::nullopt;
    }
    out.beta.clauses.push_back(c);
  }
  for (PredId p : used_alpha) out.alpha_preds.push_back(p);
  return out;
}

template <typename BetaCheck>
inline ClassReport::Entry search(const Theory& t, BetaCheck&& beta_check) {
  // candidate alpha predicates: binary with two distinct argument domains
  std::vector<PredId> eligible;
  auto used = t.used_predicates();
  for (PredId p = 0; p < t.predicates.size(); ++p) {
    if (!used[p] || t.predicates[p].arity() != 2) continue;
    if (t.predicates[p].arg_domains[0] == t.predicates[p].arg_domains[1]) continue;
    eligible.push_back(p);
  }
  if (eligible.size() > 12) eligible.resize(12);
  bool saw_unknown = false;
  std::string reason;
  for (uint32_t mask = 0; mask < (1u << eligible.size()); ++mask) {
    std::vector<PredId> cand;
    for (size_t i = 0; i < eligible.size(); ++i)
      if ((mask >> i) & 1) cand.push_back(eligible[i]);
    auto part = try_partition(t, cand);
    if (!part) continue;
    ClassReport::Entry beta = beta_check(part->beta);
    if (beta.status == ClassReport::Status::Yes)
      return {ClassReport::Status::Yes, part->describe(t)};
    if (beta.status == ClassReport::Status::Unknown) saw_unknown = true;
    if (reason.empty()) reason = beta.witness;
  }
  if (saw_unknown) return {ClassReport::Status::Unknown, "recursion cutoff in a remainder check"};
  return {ClassReport::Status::No,
          reason.empty() ? "no admissible two-literal predicate set (alpha predicates must be "
                           "binary over two distinct domains)"
                         : reason};
}

}  // namespace s2_detail

inline ClassReport::Entry is_s2fo2(const Theory& t) {
  Theory n = normalize_theory(t);
  return s2_detail::search(n, [](const Theory& beta) { return is_fo2(beta); });
}

inline ClassReport::Entry is_s2ru(const Theory& t) {
  Theory n = normalize_theory(t);
  return s2_detail::search(n, [](const Theory& beta) { return is_ru(beta); });
}

inline ClassReport check_all(const Theory& t) {
  ClassReport r;
  Theory n = normalize_theory(t);
  r.fo2 = is_fo2(n);
  r.ru = is_ru(n);
  r.s2fo2 = is_s2fo2(n);
  r.s2ru = is_s2ru(n);
  return r;
}

}  // namespace wfomc
