#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "wfomc/oracle.hpp"
#include "wfomc/preprocess.hpp"

using namespace wfomc;
using namespace testutil;

TEST_CASE("grounding the smokers theory") {
  auto b = smokers(2);
  GroundTheory g = ground_theory(b.t);
  CHECK(g.total_atoms == 4);
  CHECK(g.clauses.size() == 2);
}

TEST_CASE("grounding honors implicit distinctness") {
  auto b = symtrans_bare(2);
  GroundTheory g = ground_theory(b.t);
  CHECK(g.total_atoms == 4);
  // no transitivity instance survives at n=2; symmetry contributes 2
  CHECK(g.clauses.size() == 2);
}

TEST_CASE("grounding S4 over 2x2") {
  auto b = s4(2, 2);
  GroundTheory g = ground_theory(b.t);
  CHECK(g.total_atoms == 4);
  CHECK(g.clauses.size() == 4);  // 2 orderings x 2 orderings
}

TEST_CASE("ground_theory enforces the atom limit") {
  auto b = symtrans(5);
  CHECK_THROWS_AS(ground_theory(b.t, 20), OracleLimitExceeded);
  CHECK_NOTHROW(ground_theory(b.t, 25));
}

TEST_CASE("smokers weighted count matches the nine models") {
  auto b = smokers(2);
  CHECK(oracle_wfomc(b.t, b.w) == Rational(841, 625));
}

TEST_CASE("unsatisfiable ground theory counts zero") {
  Build b;
  b.domain("p", 1);
  b.predicate("P", {"p"});
  b.constant("A", "p");
  b.clause({"P(A)"}, {});
  b.clause({"!P(A)"}, {});
  CHECK(oracle_wfomc(b.t, b.w) == Rational(0));
}

TEST_CASE("symmetric transitivity model counts are Bell numbers") {
  auto bell = bell_numbers(8);
  for (uint64_t n = 1; n <= 4; ++n) {
    auto b = symtrans(n);
    CHECK(oracle_wfomc(b.t, b.w) == bell[n + 1]);
  }
  // the bare two-clause form leaves diagonals free and counts differently
  auto bare = symtrans_bare(2);
  CHECK(oracle_wfomc(bare.t, bare.w) == Rational(8));
}

TEST_CASE("unused predicate contributes a free factor") {
  Build b;
  b.domain("p", 3);
  b.predicate("P", {"p"});
  CHECK(oracle_wfomc(b.t, b.w) == Rational(8));
}

TEST_CASE("existential semantics evaluated directly") {
  SECTION("exactly-one encoding without injectivity counts d^n") {
    for (auto [n, d] : {std::pair<uint64_t, uint64_t>{1, 1}, {2, 3}, {3, 4}}) {
      auto compiled = compile_text(birthday_text(n, d, false));
      Rational expect = rat_pow(Rational(d), n);
      CHECK(oracle_wfomc(compiled.pre_skolem, compiled.weights) == expect);
    }
  }
  SECTION("with injectivity counts d!/(d-n)!") {
    for (auto [n, d] : {std::pair<uint64_t, uint64_t>{1, 1}, {2, 3}, {3, 4}}) {
      auto compiled = compile_text(birthday_text(n, d, true));
      Rational expect(falling_factorial(d, n));
      CHECK(oracle_wfomc(compiled.pre_skolem, compiled.weights) == expect);
    }
  }
}

TEST_CASE("oracle is deterministic and order independent") {
  auto b = symtrans(3);
  Rational first = oracle_wfomc(b.t, b.w);
  CHECK(first == Rational(15));
  std::reverse(b.t.clauses.begin(), b.t.clauses.end());
  CHECK(oracle_wfomc(b.t, b.w) == first);
}

TEST_CASE("clause-universe oracle ignores unconstrained declared atoms") {
  Build b;
  b.domain("p", 3);
  b.predicate("P", {"p"});
  b.predicate("Q", {"p"});
  b.constant("A", "p");
  b.clause({"P(A)"}, {});
  // the live extension is the whole-root segment plus the named constant:
  // 4 individuals, so 3 free P atoms and 4 free Q atoms
  CHECK(oracle_wfomc(b.t, b.w) == Rational(1) * 8 * 16);
  CHECK(oracle_wfomc_clause_universe(b.t, b.w) == Rational(1));
}
