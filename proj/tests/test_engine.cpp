#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "wfomc/engine.hpp"
#include "wfomc/oracle.hpp"

using namespace wfomc;
using namespace testutil;

TEST_CASE("smokers at two people") {
  auto b = smokers(2);
  CHECK(wfomc::wfomc(b.t, b.w) == Rational(841, 625));
}

TEST_CASE("an unconstrained predicate is pure smoothing") {
  Build b;
  b.domain("p", 3);
  b.predicate("P", {"p"});
  CHECK(wfomc::wfomc(b.t, b.w) == Rational(8));
}

TEST_CASE("symmetric transitivity at three people") {
  auto b = symtrans(3);
  CHECK(wfomc::wfomc(b.t, b.w) == Rational(15));
}

TEST_CASE("modes agree wherever both terminate") {
  EngineConfig r_only;
  r_only.mode = EngineConfig::Mode::R;
  r_only.ground_atom_limit = 64;
  for (uint64_t n : {2, 3, 4}) {
    auto b = symtrans(n);
    Engine er(b.w, r_only);
    Engine erd(b.w, EngineConfig{});
    CHECK(er.wfomc(b.t) == erd.wfomc(b.t));
  }
  for (auto [nx, ny] : {std::pair<uint64_t, uint64_t>{2, 2}, {2, 3}}) {
    auto b = s4(nx, ny);
    Engine er(b.w, r_only);
    Engine erd(b.w, EngineConfig{});
    CHECK(er.wfomc(b.t) == erd.wfomc(b.t));
  }
}

TEST_CASE("engine equals oracle on random theories in both modes") {
  std::mt19937 rng(97);
  EngineConfig rd;
  EngineConfig r_only;
  r_only.mode = EngineConfig::Mode::R;
  r_only.ground_atom_limit = 40;
  for (int iter = 0; iter < 150; ++iter) {
    auto [t, w] = random_theory(rng);
    Rational expect = oracle_wfomc(t, w);
    Engine e1(w, rd);
    REQUIRE(e1.wfomc(t) == expect);
    Engine e2(w, r_only);
    REQUIRE(e2.wfomc(t) == expect);
  }
}

TEST_CASE("weight scaling law") {
  // scaling both weights of F by c multiplies the count by c^groundings
  SECTION("smokers") {
    auto b = smokers(3);
    Rational base = wfomc::wfomc(b.t, b.w);
    Rational c(3, 7);
    b.w.set(b.pred["Smokes"], b.w.pos(b.pred["Smokes"]) * c, b.w.neg(b.pred["Smokes"]) * c);
    CHECK(wfomc::wfomc(b.t, b.w) == base * rat_pow(c, 3));
  }
  SECTION("birthday") {
    auto compiled = compile_text(birthday_text(2, 3, true));
    Rational base = wfomc::wfomc(compiled.theory, compiled.weights);
    Rational c(-2);
    PredId born = 0;  // first declared predicate
    compiled.weights.set(born, compiled.weights.pos(born) * c, compiled.weights.neg(born) * c);
    CHECK(wfomc::wfomc(compiled.theory, compiled.weights) == base * rat_pow(c, 6));
  }
}

TEST_CASE("fresh predicate smoothing law") {
  auto b = smokers(2);
  Rational base = wfomc::wfomc(b.t, b.w);
  b.predicate("Extra", {"people", "people"}, Rational(1, 3), Rational(1, 4));
  CHECK(wfomc::wfomc(b.t, b.w) == base * rat_pow(Rational(1, 3) + Rational(1, 4), 4));
}

TEST_CASE("cache correctness: shared cache equals fresh caches") {
  std::mt19937 rng(1234);
  auto shared = std::make_shared<Cache<Rational>>();
  for (int iter = 0; iter < 40; ++iter) {
    auto [t, w] = random_theory(rng);
    Engine with_shared(w, EngineConfig{}, shared);
    Engine fresh(w, EngineConfig{});
    REQUIRE(with_shared.wfomc(t) == fresh.wfomc(t));
  }
  CHECK(shared->entries() > 0);
}

TEST_CASE("node budget is enforced") {
  auto b = symtrans(12);
  EngineConfig cfg;
  cfg.node_limit = 10;
  Engine e(b.w, cfg);
  CHECK_THROWS_AS(e.wfomc(b.t), BudgetExceeded);
}

TEST_CASE("time budget is enforced") {
  auto b = symtrans(40);
  EngineConfig cfg;
  cfg.time_limit = std::chrono::milliseconds(1);
  Engine e(b.w, cfg);
  try {
    e.wfomc(b.t);  // may finish if the machine is very fast
  } catch (const BudgetExceeded& ex) {
    CHECK(std::string(ex.what()).find("timeout") != std::string::npos);
  }
}

TEST_CASE("grounding limit failure reports grounding-too-large") {
  Build b;  // non-symmetric transitivity cannot be lifted
  b.domain("p", 9);
  b.predicate("F", {"p", "p"});
  b.clause({"!F(x,y)", "!F(y,z)", "F(x,z)"}, {{"x", "p"}, {"y", "p"}, {"z", "p"}});
  EngineConfig cfg;
  cfg.mode = EngineConfig::Mode::R;
  cfg.ground_atom_limit = 30;  // 81 atoms needed
  Engine e(b.w, cfg);
  CHECK_THROWS_AS(e.wfomc(b.t), GroundingTooLarge);
}

TEST_CASE("unprobed recursion still solves oversized non-symmetric transitivity") {
  Build b;
  b.domain("p", 5);
  b.predicate("F", {"p", "p"});
  b.clause({"!F(x,y)", "!F(y,z)", "F(x,z)"}, {{"x", "p"}, {"y", "p"}, {"z", "p"}});
  Rational expect = oracle_wfomc(b.t, b.w);
  EngineConfig cfg;  // RD with dr_before_grounding
  cfg.ground_atom_limit = 12;  // grounding five individuals would need 25
  cfg.probe_budget = 1;        // starve the probes so they reject
  Engine e(b.w, cfg);
  CHECK(e.wfomc(b.t) == expect);
  CHECK(e.stats().unprobed_dr_steps > 0);
}

TEST_CASE("float mode approximates the exact value") {
  auto b = symtrans(6);
  Engine exact(b.w, EngineConfig{});
  FloatEngine approx(b.w, EngineConfig{});
  double expect = exact.wfomc(b.t).get_d();
  double got = approx.wfomc(b.t);
  CHECK(std::abs(got - expect) <= 1e-9 * std::abs(expect));
}

TEST_CASE("stats are reported") {
  auto b = symtrans(5);
  Engine e(b.w, EngineConfig{});
  e.wfomc(b.t);
  CHECK(e.stats().nodes > 0);
  CHECK(e.stats().dr_steps > 0);
  CHECK(e.cache().entries() > 0);
}

TEST_CASE("disjoint copies multiply") {
  // two independent one-person smokers theories over disjoint domains
  Build b;
  b.domain("a", 1);
  b.domain("b", 1);
  b.predicate("S1", {"a"}, Rational(1, 5), Rational(1, 2));
  b.predicate("C1", {"a"}, Rational(4, 5), Rational(6, 5));
  b.predicate("S2", {"b"}, Rational(1, 5), Rational(1, 2));
  b.predicate("C2", {"b"}, Rational(4, 5), Rational(6, 5));
  b.clause({"!S1(x)", "C1(x)"}, {{"x", "a"}});
  b.clause({"!S2(y)", "C2(y)"}, {{"y", "b"}});
  CHECK(connected_components(b.t).size() == 2);
  CHECK(wfomc::wfomc(b.t, b.w) == rat_pow(Rational(29, 25), 2));
  CHECK(oracle_wfomc(b.t, b.w) == rat_pow(Rational(29, 25), 2));
}
