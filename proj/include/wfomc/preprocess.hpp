#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wfomc/logic.hpp"
#include "wfomc/oracle.hpp"
#include "wfomc/parser.hpp"
#include "wfomc/theory_ops.hpp"

namespace wfomc {

struct IntroducedPred {
  PredId pred = kNoId;
  enum class Kind { Skolem, Aux } kind = Kind::Skolem;
  std::string note;
};

struct EncodingArtifacts {
  std::vector<IntroducedPred> introduced;
};

/// Result of reducing surface input to weighted universal clausal form.
struct CompiledTheory {
  Theory theory;  // engine input: existentials skolemized, MLN lines encoded
  WeightFunction weights;
  EncodingArtifacts artifacts;
  /// Original semantics with existentials intact (MLN lines still encoded);
  /// evaluated directly by the oracle, independent of skolemization.
  QuantifiedTheory pre_skolem;
  std::map<std::string, DomainId> domain_by_name;
};

/// Duplicate-literal, tautology, duplicate-clause and vacuous-clause removal.
inline Theory normalize_theory(Theory t) {
  while (normalize_step(t)) {
  }
  return t;
}

namespace preprocess_detail {

inline std::string fresh_pred_name(const Theory& t, const std::string& base) {
  auto taken = [&](const std::string& n) {
    for (const auto& p : t.predicates)
      if (p.name == n) return true;
    return false;
  };
  std::string name = base;
  while (taken(name)) name += "'";
  return name;
}

struct ClauseBuilder {
  Clause clause;
  std::map<std::string, VarIdx> var_of;

  VarIdx var(const std::string& name, SegmentId seg) {
    auto [it, fresh] = var_of.emplace(name, static_cast<VarIdx>(clause.vars.size()));
    if (fresh) clause.vars.push_back({name, seg});
    return it->second;
  }
};

// negation normal form
inline Formula to_nnf(const Formula& f, bool positive) {
  switch (f.kind) {
    case Formula::Kind::Lit: {
      Formula out = f;
      if (!positive) {
        Formula n;
        n.kind = Formula::Kind::Not;
        n.children.push_back(out);
        return n;
      }
      return out;
    }
    case Formula::Kind::Not:
      return to_nnf(f.children[0], !positive);
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      Formula out;
      bool is_and = (f.kind == Formula::Kind::And) == positive;
      out.kind = is_and ? Formula::Kind::And : Formula::Kind::Or;
      out.children.push_back(to_nnf(f.children[0], positive));
      out.children.push_back(to_nnf(f.children[1], positive));
      return out;
    }
    case Formula::Kind::Implies: {
      Formula out;
      out.kind = positive ? Formula::Kind::Or : Formula::Kind::And;
      out.children.push_back(to_nnf(f.children[0], !positive));
      out.children.push_back(to_nnf(f.children[1], positive));
      return out;
    }
    case Formula::Kind::Iff: {
      // (a=>b) & (b=>a), or its negation
      Formula imp1;
      imp1.kind = Formula::Kind::Implies;
      imp1.children = {f.children[0], f.children[1]};
      Formula imp2;
      imp2.kind = Formula::Kind::Implies;
      imp2.children = {f.children[1], f.children[0]};
      Formula both;
      both.kind = Formula::Kind::And;
      both.children = {imp1, imp2};
      return to_nnf(both, positive);
    }
  }
  throw EngineError("unreachable");
}

using CnfLit = std::pair<bool, SrcLiteral>;  // sign, atom

inline std::vector<std::vector<CnfLit>> to_cnf(const Formula& nnf, size_t literal_bound) {
  switch (nnf.kind) {
    case Formula::Kind::Lit:
      return {{{true, nnf.lit}}};
    case Formula::Kind::Not:
      return {{{false, nnf.children[0].lit}}};
    case Formula::Kind::And: {
      auto a = to_cnf(nnf.children[0], literal_bound);
      auto b = to_cnf(nnf.children[1], literal_bound);
      for (auto& c : b) a.push_back(std::move(c));
      return a;
    }
    case Formula::Kind::Or: {
      auto a = to_cnf(nnf.children[0], literal_bound);
      auto b = to_cnf(nnf.children[1], literal_bound);
      std::vector<std::vector<CnfLit>> out;
      size_t total = 0;
      for (auto& ca : a)
        for (auto& cb : b) {
          std::vector<CnfLit> merged = ca;
          merged.insert(merged.end(), cb.begin(), cb.end());
          total += merged.size();
          if (total > literal_bound * 8 || merged.size() > literal_bound)
            throw EngineError("mln formula too large for direct CNF expansion");
          out.push_back(std::move(merged));
        }
      return out;
    }
    default:
      throw EngineError("to_cnf: not in NNF");
  }
}

/// Set partitions of {0..n-1}; used to enumerate variable identification
/// patterns for the diagonal pins.
inline std::vector<std::vector<uint32_t>> set_partitions(uint32_t n) {
  std::vector<std::vector<uint32_t>> out;
  std::vector<uint32_t> assign(n, 0);
  auto rec = [&](auto&& self, uint32_t i, uint32_t blocks) -> void {
    if (i == n) {
      out.push_back(assign);
      return;
    }
    for (uint32_t b = 0; b <= blocks; ++b) {
      assign[i] = b;
      self(self, i + 1, b == blocks ? blocks + 1 : blocks);
    }
  };
  if (n > 0) rec(rec, 0, 0);
  return out;
}

}  // namespace preprocess_detail

/// CNF-encode one weighted formula: Aux over the formula's free variables,
/// Aux <=> f by direct expansion, plus pins forcing Aux to its false-weight
/// on non-injective argument tuples so the count matches the partition
/// function over injective formula groundings.
inline std::vector<Clause> encode_mln_formula(Theory& t, WeightFunction& w, const Rational& weight,
                                              const SrcMln& m,
                                              const std::map<std::string, SegmentId>& seg_by_domain,
                                              const std::map<std::string, ConstId>& const_by_name,
                                              EncodingArtifacts* artifacts,
                                              size_t literal_bound = 16) {
  using namespace preprocess_detail;
  // free variables in first-occurrence order
  std::vector<std::string> free_vars;
  parse_detail::visit_literals(m.formula, [&](const SrcLiteral& lit) {
    for (const auto& term : lit.terms) {
      if (!parse_detail::is_variable_name(term)) continue;
      if (std::find(free_vars.begin(), free_vars.end(), term) == free_vars.end())
        free_vars.push_back(term);
    }
  });
  std::vector<DomainId> aux_domains;
  for (const auto& v : free_vars) {
    SegmentId s = seg_by_domain.at(m.var_domain.at(v));
    aux_domains.push_back(t.segments[s].root);
  }
  PredId aux = t.add_predicate(fresh_pred_name(t, "Aux"), aux_domains);
  w.set(aux, weight, Rational(1));
  if (artifacts)
    artifacts->introduced.push_back(
        {aux, IntroducedPred::Kind::Aux, "factor weight " + rational_str(weight)});

  auto build_clause = [&](const std::vector<CnfLit>& body, bool aux_positive) {
    ClauseBuilder cb;
    Literal auxlit;
    auxlit.positive = aux_positive;
    auxlit.pred = aux;
    for (const auto& v : free_vars)
      auxlit.args.push_back(Term::var(cb.var(v, seg_by_domain.at(m.var_domain.at(v)))));
    cb.clause.literals.push_back(std::move(auxlit));
    for (const auto& [sign, lit] : body) {
      Literal l;
      l.positive = sign;
      l.pred = kNoId;
      for (PredId p = 0; p < t.predicates.size(); ++p)
        if (t.predicates[p].name == lit.pred && t.predicates[p].arity() == lit.terms.size())
          l.pred = p;
      for (const auto& term : lit.terms) {
        if (parse_detail::is_variable_name(term))
          l.args.push_back(Term::var(cb.var(term, seg_by_domain.at(m.var_domain.at(term)))));
        else
          l.args.push_back(Term::constant(const_by_name.at(term)));
      }
      cb.clause.literals.push_back(std::move(l));
    }
    return cb.clause;
  };

  std::vector<Clause> out;
  Formula nnf_pos = to_nnf(m.formula, true);
  for (const auto& body : to_cnf(nnf_pos, literal_bound)) out.push_back(build_clause(body, false));
  Formula nnf_neg = to_nnf(m.formula, false);
  for (const auto& body : to_cnf(nnf_neg, literal_bound)) out.push_back(build_clause(body, true));

  // pins: one unit per non-injective identification pattern of same-root vars
  std::map<DomainId, std::vector<uint32_t>> positions_by_root;
  for (uint32_t i = 0; i < aux_domains.size(); ++i)
    positions_by_root[aux_domains[i]].push_back(i);
  std::vector<std::vector<std::vector<uint32_t>>> per_root_partitions;  // per root: partitions
  std::vector<std::vector<uint32_t>> roots_positions;
  for (auto& [root, positions] : positions_by_root) {
    per_root_partitions.push_back(set_partitions(static_cast<uint32_t>(positions.size())));
    roots_positions.push_back(positions);
  }
  std::vector<size_t> pick(per_root_partitions.size(), 0);
  while (true) {
    // build identification: position -> class id (root-local classes offset)
    std::vector<uint32_t> cls(aux_domains.size(), 0);
    uint32_t offset = 0;
    bool trivial = true;
    for (size_t r = 0; r < per_root_partitions.size(); ++r) {
      const auto& part = per_root_partitions[r][pick[r]];
      uint32_t maxb = 0;
      for (size_t i = 0; i < part.size(); ++i) {
        cls[roots_positions[r][i]] = offset + part[i];
        maxb = std::max(maxb, part[i]);
        for (size_t j = 0; j < i; ++j)
          if (part[i] == part[j]) trivial = false;
      }
      offset += maxb + 1;
    }
    if (!trivial) {
      ClauseBuilder cb;
      Literal l;
      l.positive = false;
      l.pred = aux;
      for (uint32_t i = 0; i < aux_domains.size(); ++i) {
        std::string vn = "u" + std::to_string(cls[i]);
        l.args.push_back(Term::var(cb.var(vn, seg_by_domain.at(m.var_domain.at(free_vars[i])))));
      }
      cb.clause.literals.push_back(std::move(l));
      out.push_back(cb.clause);
    }
    size_t r = 0;
    for (; r < pick.size(); ++r) {
      if (++pick[r] < per_root_partitions[r].size()) break;
      pick[r] = 0;
    }
    if (r == pick.size()) break;
  }
  return out;
}

/// Replace each single-existential sentence by its relaxed clausal form with
/// a fresh predicate weighted (1, -1); the weighted count is unchanged.
/// Returns the clauses to add; registers the predicate.
inline std::vector<Clause> skolemize_clause(Theory& t, WeightFunction& w, const Clause& c,
                                            VarIdx exists_var, EncodingArtifacts* artifacts) {
  using namespace preprocess_detail;
  std::vector<DomainId> sk_domains;
  std::vector<VarIdx> universals;
  for (VarIdx i = 0; i < c.vars.size(); ++i) {
    if (i == exists_var) continue;
    universals.push_back(i);
    sk_domains.push_back(t.segments[c.vars[i].segment].root);
  }
  PredId sk = t.add_predicate(fresh_pred_name(t, "Sk"), sk_domains);
  w.set(sk, Rational(1), Rational(-1));
  if (artifacts)
    artifacts->introduced.push_back(
        {sk, IntroducedPred::Kind::Skolem, "relaxation of existential sentence"});
  std::vector<Clause> out;
  for (const auto& lit : c.literals) {
    Clause nc;
    nc.vars = c.vars;
    Literal head;
    head.positive = true;
    head.pred = sk;
    for (VarIdx u : universals) head.args.push_back(Term::var(u));
    Literal body = lit;
    body.positive = !body.positive;
    nc.literals.push_back(std::move(head));
    nc.literals.push_back(std::move(body));
    out.push_back(std::move(nc));
  }
  return out;
}

inline CompiledTheory compile_source(const SourceTheory& st,
                                     const std::map<std::string, uint64_t>& domain_overrides = {}) {
  using namespace preprocess_detail;
  CompiledTheory out;
  Theory& t = out.theory;
  std::map<std::string, SegmentId> seg_by_domain;
  for (const auto& d : st.domains) {
    uint64_t size = d.size;
    auto ov = domain_overrides.find(d.name);
    if (ov != domain_overrides.end()) size = ov->second;
    DomainId root = t.add_domain(d.name, size);
    seg_by_domain[d.name] = t.add_segment(root, Size::concrete(size));
    out.domain_by_name[d.name] = root;
  }
  for (const auto& p : st.predicates) {
    std::vector<DomainId> domains;
    for (const auto& dn : p.arg_domains) domains.push_back(out.domain_by_name.at(dn));
    PredId id = t.add_predicate(p.name, std::move(domains));
    out.weights.set(id, p.w_pos, p.w_neg);
  }
  // constants named in clause lines (internal dumps only)
  std::map<std::string, ConstId> const_by_name;
  auto intern_const = [&](const std::string& name, DomainId root) {
    auto it = const_by_name.find(name);
    if (it != const_by_name.end()) return it->second;
    ConstId c = t.add_constant(name, root);
    const_by_name[name] = c;
    return c;
  };

  auto find_pred = [&](const std::string& name, size_t arity) {
    for (PredId p = 0; p < t.predicates.size(); ++p)
      if (t.predicates[p].name == name && t.predicates[p].arity() == arity) return p;
    throw EngineError("unknown predicate " + name);
  };

  std::vector<Clause> universal;
  std::vector<std::pair<Clause, VarIdx>> existential;
  for (const auto& sc : st.clause_lines) {
    ClauseBuilder cb;
    for (const auto& lit : sc.literals) {
      Literal l;
      l.positive = lit.positive;
      l.pred = find_pred(lit.pred, lit.terms.size());
      for (size_t i = 0; i < lit.terms.size(); ++i) {
        const std::string& term = lit.terms[i];
        if (parse_detail::is_variable_name(term)) {
          l.args.push_back(Term::var(cb.var(term, seg_by_domain.at(sc.var_domain.at(term)))));
        } else {
          DomainId root = t.predicates[l.pred].arg_domains[i];
          l.args.push_back(Term::constant(intern_const(term, root)));
        }
      }
      cb.clause.literals.push_back(std::move(l));
    }
    if (sc.exists_var)
      existential.emplace_back(cb.clause, cb.var_of.at(*sc.exists_var));
    else
      universal.push_back(cb.clause);
  }
  for (const auto& m : st.mln_lines) {
    auto clauses =
        encode_mln_formula(t, out.weights, m.weight, m, seg_by_domain, const_by_name, &out.artifacts);
    for (auto& c : clauses) universal.push_back(std::move(c));
  }

  // pre-skolemization view for the oracle
  out.pre_skolem.base = t;
  for (const auto& c : universal) {
    out.pre_skolem.base.clauses.push_back(c);
    out.pre_skolem.exists_var.push_back(-1);
  }
  for (const auto& [c, ev] : existential) {
    out.pre_skolem.base.clauses.push_back(c);
    out.pre_skolem.exists_var.push_back(static_cast<int32_t>(ev));
  }

  t.clauses = universal;
  for (const auto& [c, ev] : existential) {
    auto sk = skolemize_clause(t, out.weights, c, ev, &out.artifacts);
    for (auto& nc : sk) t.clauses.push_back(std::move(nc));
  }
  t = normalize_theory(std::move(t));
  return out;
}

inline CompiledTheory compile_text(const std::string& text,
                                   const std::map<std::string, uint64_t>& overrides = {}) {
  return compile_source(parse_theory(text), overrides);
}

}  // namespace wfomc
