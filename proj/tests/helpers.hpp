#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "wfomc/engine.hpp"
#include "wfomc/logic.hpp"
#include "wfomc/oracle.hpp"
#include "wfomc/parser.hpp"
#include "wfomc/preprocess.hpp"

namespace testutil {

using namespace wfomc;

// --- small builder -----------------------------------------------------

struct Build {
  Theory t;
  WeightFunction w;
  std::map<std::string, SegmentId> seg;
  std::map<std::string, PredId> pred;
  std::map<std::string, ConstId> cst;

  DomainId domain(const std::string& name, uint64_t n) {
    DomainId d = t.add_domain(name, n);
    seg[name] = t.add_segment(d, Size::concrete(n));
    return d;
  }
  PredId predicate(const std::string& name, std::vector<std::string> domains,
                   Rational wp = Rational(1), Rational wn = Rational(1)) {
    std::vector<DomainId> ds;
    for (auto& dn : domains) ds.push_back(t.segments[seg.at(dn)].root);
    PredId p = t.add_predicate(name, ds);
    w.set(p, wp, wn);
    pred[name] = p;
    return p;
  }
  ConstId constant(const std::string& name, const std::string& domain) {
    ConstId c = t.add_constant(name, t.segments[seg.at(domain)].root);
    cst[name] = c;
    return c;
  }

  // literal spec: "P(x,y)" or "!P(x,A)"; lowercase terms are variables typed
  // by the segment given in vars, uppercase terms reference constants.
  void clause(const std::vector<std::string>& lits,
              const std::map<std::string, std::string>& vars) {
    Clause c;
    std::map<std::string, VarIdx> vidx;
    for (const auto& text : lits) {
      Literal l;
      size_t i = 0;
      if (text[i] == '!') {
        l.positive = false;
        ++i;
      }
      size_t open = text.find('(', i);
      l.pred = pred.at(text.substr(i, open - i));
      size_t pos = open + 1;
      while (pos < text.size() && text[pos] != ')') {
        size_t end = text.find_first_of(",)", pos);
        std::string term = text.substr(pos, end - pos);
        if (std::islower(static_cast<unsigned char>(term[0]))) {
          auto [it, fresh] = vidx.emplace(term, static_cast<VarIdx>(c.vars.size()));
          if (fresh) c.vars.push_back({term, seg.at(vars.at(term))});
          l.args.push_back(Term::var(it->second));
        } else {
          l.args.push_back(Term::constant(cst.at(term)));
        }
        pos = end + (text[end] == ',' ? 1 : 0);
        if (text[pos] == ')') break;
      }
      c.literals.push_back(std::move(l));
    }
    t.clauses.push_back(std::move(c));
  }
};

// --- bundled theories, built programmatically --------------------------

inline Build smokers(uint64_t n) {
  Build b;
  b.domain("people", n);
  b.predicate("Smokes", {"people"}, Rational(1, 5), Rational(1, 2));
  b.predicate("Cancer", {"people"}, Rational(4, 5), Rational(6, 5));
  b.clause({"!Smokes(x)", "Cancer(x)"}, {{"x", "people"}});
  return b;
}

/// Symmetric transitivity with the diagonal-closure clause; model count is
/// the Bell number B(n+1).
inline Build symtrans(uint64_t n) {
  Build b;
  b.domain("p", n);
  b.predicate("F", {"p", "p"});
  b.clause({"!F(x,y)", "!F(y,z)", "F(x,z)"}, {{"x", "p"}, {"y", "p"}, {"z", "p"}});
  b.clause({"!F(x,y)", "F(y,x)"}, {{"x", "p"}, {"y", "p"}});
  b.clause({"!F(x,y)", "!F(y,x)", "F(x,x)"}, {{"x", "p"}, {"y", "p"}});
  return b;
}

/// The paper's two-clause symmetric transitivity (no diagonal closure).
inline Build symtrans_bare(uint64_t n) {
  Build b;
  b.domain("p", n);
  b.predicate("F", {"p", "p"});
  b.clause({"!F(x,y)", "!F(y,z)", "F(x,z)"}, {{"x", "p"}, {"y", "p"}, {"z", "p"}});
  b.clause({"!F(x,y)", "F(y,x)"}, {{"x", "p"}, {"y", "p"}});
  return b;
}

inline Build s4(uint64_t nx, uint64_t ny) {
  Build b;
  b.domain("dx", nx);
  b.domain("dy", ny);
  b.predicate("S", {"dx", "dy"});
  b.clause({"S(x1,y1)", "!S(x2,y1)", "S(x2,y2)", "!S(x1,y2)"},
           {{"x1", "dx"}, {"x2", "dx"}, {"y1", "dy"}, {"y2", "dy"}});
  return b;
}

inline std::string birthday_text(uint64_t people, uint64_t days, bool injective) {
  std::string out;
  out += "domain people " + std::to_string(people) + "\n";
  out += "domain day " + std::to_string(days) + "\n";
  out += "predicate Born(people,day)\n";
  out += "exists d: Born(p,d)\n";
  out += "!Born(p,d1) | !Born(p,d2)\n";
  if (injective) out += "!Born(p1,d) | !Born(p2,d)\n";
  return out;
}

// --- independent combinatorial references ------------------------------

/// Bell numbers by the Bell triangle; independent of the engine and oracle.
inline std::vector<Rational> bell_numbers(size_t count) {
  std::vector<Rational> bell;
  std::vector<mpz_class> row{1};
  bell.push_back(Rational(1));  // B(0)
  for (size_t i = 1; i < count; ++i) {
    std::vector<mpz_class> next{row.back()};
    for (size_t j = 0; j < row.size(); ++j) next.push_back(next.back() + row[j]);
    bell.push_back(Rational(next.front()));
    row = std::move(next);
  }
  return bell;
}

// --- random theory generator --------------------------------------------

struct RandomTheoryOptions {
  int max_predicates = 3;
  int max_arity = 2;
  int max_clauses = 3;
  int max_literals = 3;
  int max_domains = 2;
  uint64_t max_domain_size = 3;
  int max_vars = 3;
  bool negative_weights = true;
  uint64_t max_atoms = 16;  // resample cap on the ground universe
};

inline std::pair<Theory, WeightFunction> random_theory(std::mt19937& rng,
                                                       const RandomTheoryOptions& opt = {}) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  while (true) {
    Theory t;
    WeightFunction w;
    int ndom = pick(1, opt.max_domains);
    std::vector<SegmentId> segs;
    for (int d = 0; d < ndom; ++d) {
      uint64_t size = static_cast<uint64_t>(pick(1, static_cast<int>(opt.max_domain_size)));
      DomainId root = t.add_domain("d" + std::to_string(d), size);
      segs.push_back(t.add_segment(root, Size::concrete(size)));
    }
    int npred = pick(1, opt.max_predicates);
    for (int p = 0; p < npred; ++p) {
      int arity = pick(0, opt.max_arity);
      std::vector<DomainId> doms;
      for (int a = 0; a < arity; ++a) doms.push_back(t.segments[segs[pick(0, ndom - 1)]].root);
      PredId id = t.add_predicate("P" + std::to_string(p), doms);
      auto rat = [&]() {
        int num = pick(opt.negative_weights ? -3 : 0, 4);
        int den = pick(1, 4);
        Rational r(num, den);
        r.canonicalize();
        return r;
      };
      w.set(id, rat(), rat());
    }
    int nclauses = pick(1, opt.max_clauses);
    for (int c = 0; c < nclauses; ++c) {
      Clause cl;
      int nvars = pick(1, opt.max_vars);
      for (int v = 0; v < nvars; ++v)
        cl.vars.push_back({"v" + std::to_string(v), segs[pick(0, ndom - 1)]});
      int nlits = pick(1, opt.max_literals);
      for (int l = 0; l < nlits; ++l) {
        Literal lit;
        lit.positive = pick(0, 1) == 1;
        lit.pred = static_cast<PredId>(pick(0, npred - 1));
        bool ok = true;
        for (DomainId need : t.predicates[lit.pred].arg_domains) {
          std::vector<VarIdx> fits;
          for (VarIdx v = 0; v < cl.vars.size(); ++v)
            if (t.segments[cl.vars[v].segment].root == need) fits.push_back(v);
          if (fits.empty()) {
            ok = false;
            break;
          }
          lit.args.push_back(Term::var(fits[static_cast<size_t>(pick(0, static_cast<int>(fits.size()) - 1))]));
        }
        if (ok) cl.literals.push_back(std::move(lit));
      }
      if (cl.literals.empty()) continue;
      // drop unused variables
      for (VarIdx v = 0; v < cl.vars.size();)
        if (!cl.var_used(v))
          cl = wfomc::detail::drop_var(cl, v, Term::var(kNoId));
        else
          ++v;
      if (!cl.literals.empty()) t.clauses.push_back(std::move(cl));
    }
    if (t.clauses.empty()) continue;
    uint64_t atoms = 0;
    GroundTheory g;
    try {
      g = ground_theory(t, 1u << 20);
    } catch (const OracleLimitExceeded&) {
      continue;
    }
    atoms = g.total_atoms;
    if (atoms == 0 || atoms > opt.max_atoms) continue;
    return {std::move(t), std::move(w)};
  }
}

/// MLN partition function by direct enumeration: per world, the product over
/// injective formula groundings of (weight when satisfied, 1 otherwise).
inline Rational mln_partition_oracle(const SourceTheory& st,
                                     const std::map<std::string, uint64_t>& overrides = {}) {
  // materialize domains
  std::map<std::string, uint64_t> size_of;
  for (const auto& d : st.domains) {
    size_of[d.name] = d.size;
    auto it = overrides.find(d.name);
    if (it != overrides.end()) size_of[d.name] = it->second;
  }
  // atoms of declared predicates over full domains
  struct Atom {
    std::string pred;
    std::vector<uint64_t> args;
    bool operator<(const Atom& o) const {
      return std::tie(pred, args) < std::tie(o.pred, o.args);
    }
  };
  std::map<Atom, uint32_t> index;
  std::vector<std::pair<Rational, Rational>> atom_w;
  for (const auto& p : st.predicates) {
    std::vector<uint64_t> tuple(p.arg_domains.size(), 0);
    auto rec = [&](auto&& self, size_t i) -> void {
      if (i == tuple.size()) {
        index.emplace(Atom{p.name, tuple}, static_cast<uint32_t>(index.size()));
        atom_w.emplace_back(p.w_pos, p.w_neg);
        return;
      }
      for (uint64_t v = 0; v < size_of.at(p.arg_domains[i]); ++v) {
        tuple[i] = v;
        self(self, i + 1);
      }
    };
    rec(rec, 0);
  }
  if (index.size() > 24) throw OracleLimitExceeded();

  auto eval_formula = [&](const Formula& f, const std::map<std::string, uint64_t>& env,
                          uint64_t world, auto&& self) -> bool {
    switch (f.kind) {
      case Formula::Kind::Lit: {
        Atom a;
        a.pred = f.lit.pred;
        for (const auto& term : f.lit.terms) a.args.push_back(env.at(term));
        return (world >> index.at(a)) & 1;
      }
      case Formula::Kind::Not:
        return !self(f.children[0], env, world, self);
      case Formula::Kind::And:
        return self(f.children[0], env, world, self) && self(f.children[1], env, world, self);
      case Formula::Kind::Or:
        return self(f.children[0], env, world, self) || self(f.children[1], env, world, self);
      case Formula::Kind::Implies:
        return !self(f.children[0], env, world, self) || self(f.children[1], env, world, self);
      case Formula::Kind::Iff:
        return self(f.children[0], env, world, self) == self(f.children[1], env, world, self);
    }
    return false;
  };

  // hard clause lines must hold for every injective grounding
  auto clause_holds = [&](const SrcClause& c, uint64_t world) -> bool {
    std::vector<std::string> vars;
    for (const auto& [v, d] : c.var_domain) vars.push_back(v);
    std::map<std::string, uint64_t> env;
    bool all_ok = true;
    auto rec = [&](auto&& self, size_t i) -> void {
      if (!all_ok) return;
      if (i == vars.size()) {
        bool any = false;
        for (const auto& lit : c.literals) {
          Atom a;
          a.pred = lit.pred;
          for (const auto& term : lit.terms) a.args.push_back(env.at(term));
          bool val = (world >> index.at(a)) & 1;
          if (val == lit.positive) any = true;
        }
        if (!any) all_ok = false;
        return;
      }
      const std::string& v = vars[i];
      for (uint64_t val = 0; val < size_of.at(c.var_domain.at(v)); ++val) {
        bool clash = false;
        for (size_t j = 0; j < i; ++j)
          if (c.var_domain.at(vars[j]) == c.var_domain.at(v) && env.at(vars[j]) == val) clash = true;
        if (clash) continue;
        env[v] = val;
        self(self, i + 1);
      }
      env.erase(v);
    };
    rec(rec, 0);
    return all_ok;
  };

  Rational total(0);
  for (uint64_t world = 0; world < (uint64_t{1} << index.size()); ++world) {
    bool hard_ok = true;
    for (const auto& c : st.clause_lines) {
      if (c.exists_var) throw EngineError("mln oracle: existentials unsupported");
      if (!clause_holds(c, world)) {
        hard_ok = false;
        break;
      }
    }
    if (!hard_ok) continue;
    Rational weight(1);
    for (uint32_t a = 0; a < index.size(); ++a)
      weight *= ((world >> a) & 1) ? atom_w[a].first : atom_w[a].second;
    for (const auto& m : st.mln_lines) {
      std::vector<std::string> vars;
      for (const auto& [v, d] : m.var_domain) vars.push_back(v);
      std::map<std::string, uint64_t> env;
      auto rec = [&](auto&& self, size_t i) -> void {
        if (i == vars.size()) {
          if (eval_formula(m.formula, env, world, eval_formula)) weight *= m.weight;
          return;
        }
        const std::string& v = vars[i];
        for (uint64_t val = 0; val < size_of.at(m.var_domain.at(v)); ++val) {
          bool clash = false;
          for (size_t j = 0; j < i; ++j)
            if (m.var_domain.at(vars[j]) == m.var_domain.at(v) && env.at(vars[j]) == val)
              clash = true;
          if (clash) continue;
          env[v] = val;
          self(self, i + 1);
        }
        env.erase(v);
      };
      rec(rec, 0);
    }
    total += weight;
  }
  return total;
}

}  // namespace testutil
