#pragma once

#include <boost/container/small_vector.hpp>

#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wfomc/rational.hpp"

namespace wfomc {

template <class T, size_t N>
using SmallVec = boost::container::small_vector<T, N>;

using DomainId = uint32_t;
using SegmentId = uint32_t;
using ConstId = uint32_t;
using PredId = uint32_t;
using VarIdx = uint32_t;
inline constexpr uint32_t kNoId = UINT32_MAX;

struct EngineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SymbolicSizeError : EngineError {
  SymbolicSizeError() : EngineError("symbolic-size") {}
};
struct GroundingTooLarge : EngineError {
  GroundingTooLarge() : EngineError("grounding-too-large") {}
};
struct BudgetExceeded : EngineError {
  explicit BudgetExceeded(const std::string& what) : EngineError(what) {}
};
struct OracleLimitExceeded : EngineError {
  OracleLimitExceeded() : EngineError("oracle-limit-exceeded") {}
};

/// Sub-population cardinality. Symbolic sizes appear only inside the
/// liftability checkers; the counting engine requires concrete sizes.
struct Size {
  uint64_t value = 0;
  bool symbolic = false;

  static Size concrete(uint64_t n) { return Size{n, false}; }
  static Size sym() { return Size{0, true}; }
  uint64_t concrete_value() const {
    if (symbolic) throw SymbolicSizeError();
    return value;
  }
  bool is_zero() const { return !symbolic && value == 0; }
  bool operator==(const Size& o) const {
    return symbolic == o.symbolic && (symbolic || value == o.value);
  }
};

struct RootDomain {
  std::string name;
  uint64_t declared_size = 0;
};

/// A sub-population of a root domain, produced by shattering, case analysis
/// or domain recursion. Segments of one root that are referenced by clauses
/// are pairwise disjoint, and every named constant is split off from them.
struct Segment {
  DomainId root = kNoId;
  Size size;
  std::vector<ConstId> excluded;  // constants carved out of this sub-population
  bool alive = true;

  // Split lineage, set when the segment is retired. Either a two-way size
  // split (lifted case analysis) or one explicit individual plus the rest
  // (domain recursion / decomposition).
  SegmentId child_left = kNoId, child_right = kNoId;
  SegmentId child_rest = kNoId;
  ConstId child_const = kNoId;

  bool has_size_split() const { return child_left != kNoId; }
  bool has_const_split() const { return child_const != kNoId; }
};

struct Constant {
  std::string name;
  DomainId root = kNoId;
  bool alive = true;
};

struct PredicateSig {
  std::string name;
  std::vector<DomainId> arg_domains;
  uint32_t arity() const { return static_cast<uint32_t>(arg_domains.size()); }
};

struct Term {
  bool is_var = true;
  uint32_t idx = kNoId;  // VarIdx into the clause's vars, or ConstId

  static Term var(VarIdx v) { return Term{true, v}; }
  static Term constant(ConstId c) { return Term{false, c}; }
  bool operator==(const Term& o) const { return is_var == o.is_var && idx == o.idx; }
  bool operator!=(const Term& o) const { return !(*this == o); }
};

struct Literal {
  bool positive = true;
  PredId pred = kNoId;
  SmallVec<Term, 4> args;

  bool same_atom(const Literal& o) const { return pred == o.pred && args == o.args; }
  bool operator==(const Literal& o) const { return positive == o.positive && same_atom(o); }
};

struct ClauseVar {
  std::string name;  // informational; engine identity is the index
  SegmentId segment = kNoId;
};

/// Universally quantified disjunction. Distinct variables typed with the
/// same segment implicitly denote distinct individuals.
struct Clause {
  SmallVec<ClauseVar, 6> vars;
  SmallVec<Literal, 6> literals;

  bool var_used(VarIdx v) const {
    for (const auto& lit : literals)
      for (const auto& t : lit.args)
        if (t.is_var && t.idx == v) return true;
    return false;
  }
};

struct WeightFunction {
  std::vector<std::pair<Rational, Rational>> by_pred;

  void ensure(PredId p) {
    if (by_pred.size() <= p) by_pred.resize(p + 1, {Rational(1), Rational(1)});
  }
  void set(PredId p, Rational w_true, Rational w_false) {
    ensure(p);
    by_pred[p] = {std::move(w_true), std::move(w_false)};
  }
  const std::pair<Rational, Rational>& at(PredId p) const {
    static const std::pair<Rational, Rational> unit{Rational(1), Rational(1)};
    return p < by_pred.size() ? by_pred[p] : unit;
  }
  const Rational& pos(PredId p) const { return at(p).first; }
  const Rational& neg(PredId p) const { return at(p).second; }
};

using WfomcValue = Rational;

struct Theory {
  std::vector<RootDomain> domains;
  std::vector<Segment> segments;
  std::vector<Constant> constants;
  std::vector<PredicateSig> predicates;
  std::vector<Clause> clauses;

  DomainId add_domain(std::string name, uint64_t declared_size) {
    domains.push_back({std::move(name), declared_size});
    return static_cast<DomainId>(domains.size() - 1);
  }
  SegmentId add_segment(DomainId root, Size size, std::vector<ConstId> excluded = {}) {
    Segment s;
    s.root = root;
    s.size = size;
    s.excluded = std::move(excluded);
    segments.push_back(std::move(s));
    return static_cast<SegmentId>(segments.size() - 1);
  }
  ConstId add_constant(std::string name, DomainId root) {
    constants.push_back({std::move(name), root, true});
    return static_cast<ConstId>(constants.size() - 1);
  }
  PredId add_predicate(std::string name, std::vector<DomainId> arg_domains) {
    predicates.push_back({std::move(name), std::move(arg_domains)});
    return static_cast<PredId>(predicates.size() - 1);
  }

  std::vector<bool> used_predicates() const {
    std::vector<bool> used(predicates.size(), false);
    for (const auto& c : clauses)
      for (const auto& lit : c.literals) used[lit.pred] = true;
    return used;
  }
  std::vector<bool> used_segments() const {
    std::vector<bool> used(segments.size(), false);
    for (const auto& c : clauses)
      for (const auto& v : c.vars) used[v.segment] = true;
    return used;
  }
  std::vector<bool> used_constants() const {
    std::vector<bool> used(constants.size(), false);
    for (const auto& c : clauses)
      for (const auto& lit : c.literals)
        for (const auto& t : lit.args)
          if (!t.is_var) used[t.idx] = true;
    return used;
  }
  bool all_sizes_concrete() const {
    auto used = used_segments();
    for (size_t i = 0; i < segments.size(); ++i)
      if ((used[i] || segments[i].alive) && segments[i].size.symbolic) return false;
    return true;
  }
};

/// Human-readable rendering, used for witnesses and diagnostics.
inline std::string clause_str(const Theory& t, const Clause& c) {
  std::string out;
  for (size_t i = 0; i < c.literals.size(); ++i) {
    const auto& lit = c.literals[i];
    if (i) out += " | ";
    if (!lit.positive) out += "!";
    out += t.predicates[lit.pred].name;
    out += "(";
    for (size_t a = 0; a < lit.args.size(); ++a) {
      if (a) out += ",";
      const Term& tm = lit.args[a];
      if (tm.is_var) {
        const auto& v = c.vars[tm.idx];
        out += v.name.empty() ? ("v" + std::to_string(tm.idx)) : v.name;
      } else {
        out += t.constants[tm.idx].name;
      }
    }
    out += ")";
  }
  return out.empty() ? "<empty>" : out;
}

inline std::string theory_str(const Theory& t) {
  std::string out;
  for (const auto& c : t.clauses) {
    out += clause_str(t, c);
    out += "\n";
  }
  return out;
}

}  // namespace wfomc
