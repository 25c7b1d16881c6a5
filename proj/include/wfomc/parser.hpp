#pragma once

#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wfomc/rational.hpp"

namespace wfomc {

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(int line_, int col_, const std::string& msg)
      : std::runtime_error("parse error at " + std::to_string(line_) + ":" + std::to_string(col_) +
                           ": " + msg),
        line(line_),
        col(col_) {}
};

struct SrcDomain {
  std::string name;
  uint64_t size = 0;
  bool operator==(const SrcDomain& o) const { return name == o.name && size == o.size; }
};

struct SrcPredicate {
  std::string name;
  std::vector<std::string> arg_domains;
  Rational w_pos{1}, w_neg{1};
  bool operator==(const SrcPredicate& o) const {
    return name == o.name && arg_domains == o.arg_domains && w_pos == o.w_pos && w_neg == o.w_neg;
  }
};

struct SrcLiteral {
  bool positive = true;
  std::string pred;
  std::vector<std::string> terms;  // lowercase: variable, uppercase: constant
  bool operator==(const SrcLiteral& o) const {
    return positive == o.positive && pred == o.pred && terms == o.terms;
  }
};

struct SrcClause {
  std::optional<std::string> exists_var;
  std::vector<SrcLiteral> literals;
  std::map<std::string, std::string> var_domain;  // inferred
  int line = 0;
  bool operator==(const SrcClause& o) const {
    return exists_var == o.exists_var && literals == o.literals && var_domain == o.var_domain;
  }
};

struct Formula {
  enum class Kind { Lit, Not, And, Or, Implies, Iff };
  Kind kind = Kind::Lit;
  SrcLiteral lit;  // when kind == Lit (positive flag unused; negation via Not)
  std::vector<Formula> children;

  bool operator==(const Formula& o) const {
    return kind == o.kind && lit == o.lit && children == o.children;
  }
};

struct SrcMln {
  Rational weight{1};
  Formula formula;
  std::map<std::string, std::string> var_domain;
  int line = 0;
  bool operator==(const SrcMln& o) const {
    return weight == o.weight && formula == o.formula && var_domain == o.var_domain;
  }
};

struct SourceTheory {
  std::vector<SrcDomain> domains;
  std::vector<SrcPredicate> predicates;
  std::vector<SrcClause> clause_lines;
  std::vector<SrcMln> mln_lines;

  bool operator==(const SourceTheory& o) const {
    return domains == o.domains && predicates == o.predicates && clause_lines == o.clause_lines &&
           mln_lines == o.mln_lines;
  }
  const SrcPredicate* find_pred(const std::string& name, size_t arity) const {
    for (const auto& p : predicates)
      if (p.name == name && p.arg_domains.size() == arity) return &p;
    return nullptr;
  }
  const SrcDomain* find_domain(const std::string& name) const {
    for (const auto& d : domains)
      if (d.name == name) return &d;
    return nullptr;
  }
};

namespace parse_detail {

struct Scanner {
  const std::string& text;
  size_t pos = 0;
  int line = 1, col = 1;

  explicit Scanner(const std::string& t) : text(t) {}

  char peek() const { return pos < text.size() ? text[pos] : '\0'; }
  char get() {
    char c = peek();
    if (c) {
      ++pos;
      if (c == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    return c;
  }
  void skip_space_in_line() {
    while (true) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r') {
        get();
      } else if (c == '/' && pos + 1 < text.size() && text[pos + 1] == '/') {
        while (peek() && peek() != '\n') get();
      } else {
        break;
      }
    }
  }
  bool at_line_end() {
    skip_space_in_line();
    return peek() == '\n' || peek() == '\0';
  }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line, col, msg); }

  std::string ident() {
    skip_space_in_line();
    if (!std::isalpha(static_cast<unsigned char>(peek())) && peek() != '_')
      fail("expected identifier");
    std::string out;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '\'')
      out += get();
    return out;
  }
  void expect(char c) {
    skip_space_in_line();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    get();
  }
  bool accept(char c) {
    skip_space_in_line();
    if (peek() != c) return false;
    get();
    return true;
  }
  bool accept_word(const std::string& w) {
    skip_space_in_line();
    size_t save_pos = pos;
    int save_line = line, save_col = col;
    for (char c : w) {
      if (peek() != c) {
        pos = save_pos;
        line = save_line;
        col = save_col;
        return false;
      }
      get();
    }
    // must not continue as identifier
    if (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') {
      pos = save_pos;
      line = save_line;
      col = save_col;
      return false;
    }
    return true;
  }
  std::string number_token() {
    skip_space_in_line();
    std::string out;
    if (peek() == '-' || peek() == '+') out += get();
    while (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == '/')
      out += get();
    if (out.empty()) fail("expected number");
    return out;
  }
};

inline bool is_variable_name(const std::string& s) {
  return !s.empty() && (std::islower(static_cast<unsigned char>(s[0])) || s[0] == '_');
}

inline SrcLiteral parse_literal(Scanner& sc) {
  SrcLiteral lit;
  sc.skip_space_in_line();
  if (sc.accept('!')) lit.positive = false;
  lit.pred = sc.ident();
  sc.expect('(');
  while (true) {
    lit.terms.push_back(sc.ident());
    if (sc.accept(',')) continue;
    sc.expect(')');
    break;
  }
  return lit;
}

// <=> lowest, then =>, |, &, !, atoms
inline Formula parse_formula(Scanner& sc);

inline Formula parse_formula_atom(Scanner& sc) {
  sc.skip_space_in_line();
  if (sc.accept('(')) {
    Formula f = parse_formula(sc);
    sc.expect(')');
    return f;
  }
  if (sc.accept('!')) {
    Formula f;
    f.kind = Formula::Kind::Not;
    f.children.push_back(parse_formula_atom(sc));
    return f;
  }
  Formula f;
  f.kind = Formula::Kind::Lit;
  f.lit = parse_literal(sc);
  if (!f.lit.positive) {
    f.lit.positive = true;
    Formula n;
    n.kind = Formula::Kind::Not;
    n.children.push_back(std::move(f));
    return n;
  }
  return f;
}

inline Formula parse_formula_and(Scanner& sc) {
  Formula f = parse_formula_atom(sc);
  while (true) {
    sc.skip_space_in_line();
    if (sc.peek() == '&') {
      sc.get();
      Formula rhs = parse_formula_atom(sc);
      Formula node;
      node.kind = Formula::Kind::And;
      node.children.push_back(std::move(f));
      node.children.push_back(std::move(rhs));
      f = std::move(node);
    } else {
      return f;
    }
  }
}

inline Formula parse_formula_or(Scanner& sc) {
  Formula f = parse_formula_and(sc);
  while (true) {
    sc.skip_space_in_line();
    if (sc.peek() == '|') {
      sc.get();
      Formula rhs = parse_formula_and(sc);
      Formula node;
      node.kind = Formula::Kind::Or;
      node.children.push_back(std::move(f));
      node.children.push_back(std::move(rhs));
      f = std::move(node);
    } else {
      return f;
    }
  }
}

inline Formula parse_formula_implies(Scanner& sc) {
  Formula f = parse_formula_or(sc);
  sc.skip_space_in_line();
  if (sc.peek() == '=' && sc.pos + 1 < sc.text.size() && sc.text[sc.pos + 1] == '>') {
    sc.get();
    sc.get();
    Formula rhs = parse_formula_implies(sc);  // right associative
    Formula node;
    node.kind = Formula::Kind::Implies;
    node.children.push_back(std::move(f));
    node.children.push_back(std::move(rhs));
    return node;
  }
  return f;
}

inline Formula parse_formula(Scanner& sc) {
  Formula f = parse_formula_implies(sc);
  sc.skip_space_in_line();
  if (sc.peek() == '<' && sc.pos + 2 < sc.text.size() && sc.text[sc.pos + 1] == '=' &&
      sc.text[sc.pos + 2] == '>') {
    sc.get();
    sc.get();
    sc.get();
    Formula rhs = parse_formula(sc);
    Formula node;
    node.kind = Formula::Kind::Iff;
    node.children.push_back(std::move(f));
    node.children.push_back(std::move(rhs));
    return node;
  }
  return f;
}

template <typename Fn>
inline void visit_literals(const Formula& f, Fn&& fn) {
  if (f.kind == Formula::Kind::Lit) {
    fn(f.lit);
    return;
  }
  for (const auto& c : f.children) visit_literals(c, fn);
}

/// Infer each variable's domain from predicate argument positions; register
/// constant roots. Errors carry the given line.
inline std::map<std::string, std::string> infer_domains(
    const SourceTheory& st, const std::vector<const SrcLiteral*>& lits, int line,
    std::map<std::string, std::string>* const_roots) {
  std::map<std::string, std::string> var_domain;
  for (const SrcLiteral* lit : lits) {
    const SrcPredicate* p = st.find_pred(lit->pred, lit->terms.size());
    if (!p) {
      const bool name_known = [&] {
        for (const auto& q : st.predicates)
          if (q.name == lit->pred) return true;
        return false;
      }();
      throw ParseError(line, 1,
                       name_known ? ("arity mismatch for predicate '" + lit->pred + "'")
                                  : ("unknown predicate '" + lit->pred + "'"));
    }
    for (size_t i = 0; i < lit->terms.size(); ++i) {
      const std::string& term = lit->terms[i];
      const std::string& dom = p->arg_domains[i];
      auto& table = is_variable_name(term) ? var_domain : *const_roots;
      auto [it, fresh] = table.emplace(term, dom);
      if (!fresh && it->second != dom)
        throw ParseError(line, 1,
                         std::string(is_variable_name(term) ? "variable '" : "constant '") + term +
                             "' used with inconsistent domains ('" + it->second + "' vs '" + dom +
                             "')");
    }
  }
  return var_domain;
}

}  // namespace parse_detail

inline SourceTheory parse_theory(const std::string& text) {
  using namespace parse_detail;
  SourceTheory st;
  Scanner sc(text);
  std::map<std::string, std::string> const_roots;

  while (sc.peek()) {
    sc.skip_space_in_line();
    if (sc.peek() == '\n') {
      sc.get();
      continue;
    }
    if (!sc.peek()) break;
    int line = sc.line;
    if (sc.accept_word("domain")) {
      SrcDomain d;
      d.name = sc.ident();
      sc.skip_space_in_line();
      std::string num = sc.number_token();
      auto r = parse_rational(num);
      if (!r || r->get_den() != 1 || *r < 0) sc.fail("expected natural number");
      d.size = static_cast<uint64_t>(r->get_num().get_ui());
      if (st.find_domain(d.name)) throw ParseError(line, 1, "duplicate domain '" + d.name + "'");
      st.domains.push_back(std::move(d));
    } else if (sc.accept_word("predicate")) {
      SrcPredicate p;
      p.name = sc.ident();
      sc.expect('(');
      while (true) {
        std::string dom = sc.ident();
        if (!st.find_domain(dom)) sc.fail("unknown domain '" + dom + "'");
        p.arg_domains.push_back(std::move(dom));
        if (sc.accept(',')) continue;
        sc.expect(')');
        break;
      }
      if (!sc.at_line_end()) {
        auto w1 = parse_rational(sc.number_token());
        if (!w1) sc.fail("malformed weight");
        sc.skip_space_in_line();
        auto w2 = parse_rational(sc.number_token());
        if (!w2) sc.fail("malformed weight");
        p.w_pos = *w1;
        p.w_neg = *w2;
      }
      if (st.find_pred(p.name, p.arg_domains.size()))
        throw ParseError(line, 1, "duplicate predicate '" + p.name + "'");
      st.predicates.push_back(std::move(p));
    } else if (sc.accept_word("mln")) {
      SrcMln m;
      m.line = line;
      auto w = parse_rational(sc.number_token());
      if (!w) sc.fail("malformed weight");
      m.weight = *w;
      m.formula = parse_formula(sc);
      std::vector<const SrcLiteral*> lits;
      visit_literals(m.formula, [&](const SrcLiteral& l) { lits.push_back(&l); });
      m.var_domain = infer_domains(st, lits, line, &const_roots);
      st.mln_lines.push_back(std::move(m));
    } else {
      SrcClause c;
      c.line = line;
      if (sc.accept_word("exists")) {
        c.exists_var = sc.ident();
        sc.expect(':');
      }
      while (true) {
        c.literals.push_back(parse_literal(sc));
        if (sc.accept('|')) continue;
        break;
      }
      std::vector<const SrcLiteral*> lits;
      for (const auto& l : c.literals) lits.push_back(&l);
      c.var_domain = infer_domains(st, lits, line, &const_roots);
      if (c.exists_var && !c.var_domain.count(*c.exists_var))
        throw ParseError(line, 1, "existential variable '" + *c.exists_var + "' not used");
      st.clause_lines.push_back(std::move(c));
    }
    if (!sc.at_line_end()) sc.fail("trailing input on line");
    if (sc.peek() == '\n') sc.get();
  }
  return st;
}

namespace parse_detail {

inline std::string formula_str(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::Lit: {
      std::string out = f.lit.pred + "(";
      for (size_t i = 0; i < f.lit.terms.size(); ++i) {
        if (i) out += ",";
        out += f.lit.terms[i];
      }
      return out + ")";
    }
    case Formula::Kind::Not:
      return "!(" + formula_str(f.children[0]) + ")";
    case Formula::Kind::And:
      return "(" + formula_str(f.children[0]) + " & " + formula_str(f.children[1]) + ")";
    case Formula::Kind::Or:
      return "(" + formula_str(f.children[0]) + " | " + formula_str(f.children[1]) + ")";
    case Formula::Kind::Implies:
      return "(" + formula_str(f.children[0]) + " => " + formula_str(f.children[1]) + ")";
    case Formula::Kind::Iff:
      return "(" + formula_str(f.children[0]) + " <=> " + formula_str(f.children[1]) + ")";
  }
  return "";
}

}  // namespace parse_detail

inline std::string serialize_theory(const SourceTheory& st) {
  std::string out;
  for (const auto& d : st.domains)
    out += "domain " + d.name + " " + std::to_string(d.size) + "\n";
  for (const auto& p : st.predicates) {
    out += "predicate " + p.name + "(";
    for (size_t i = 0; i < p.arg_domains.size(); ++i) {
      if (i) out += ",";
      out += p.arg_domains[i];
    }
    out += ") " + rational_str(p.w_pos) + " " + rational_str(p.w_neg) + "\n";
  }
  for (const auto& c : st.clause_lines) {
    std::string line;
    if (c.exists_var) line += "exists " + *c.exists_var + ": ";
    for (size_t i = 0; i < c.literals.size(); ++i) {
      if (i) line += " | ";
      const auto& lit = c.literals[i];
      if (!lit.positive) line += "!";
      line += lit.pred + "(";
      for (size_t j = 0; j < lit.terms.size(); ++j) {
        if (j) line += ",";
        line += lit.terms[j];
      }
      line += ")";
    }
    out += line + "\n";
  }
  for (const auto& m : st.mln_lines)
    out += "mln " + rational_str(m.weight) + " " + parse_detail::formula_str(m.formula) + "\n";
  return out;
}

}  // namespace wfomc
