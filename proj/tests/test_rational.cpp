#include <catch2/catch_amalgamated.hpp>

#include "wfomc/rational.hpp"

using namespace wfomc;

TEST_CASE("decimal literals parse to exact rationals") {
  CHECK(*parse_rational("0.2") == Rational(1, 5));
  CHECK(*parse_rational("1.2") == Rational(6, 5));
  CHECK(*parse_rational("-0.25") == Rational(-1, 4));
  CHECK(*parse_rational("3") == Rational(3));
  CHECK(*parse_rational("2/6") == Rational(1, 3));
  CHECK(*parse_rational("-7/2") == Rational(-7, 2));
  CHECK(!parse_rational("1/0"));
  CHECK(!parse_rational("abc"));
  CHECK(!parse_rational(""));
}

TEST_CASE("rational rendering") {
  CHECK(rational_str(Rational(841, 625)) == "841/625");
  CHECK(rational_str(Rational(15)) == "15");
  CHECK(rational_str(Rational(-1, 3)) == "-1/3");
}

TEST_CASE("decimal rendering keeps 12 significant digits") {
  CHECK(decimal_str(Rational(841, 625)) == "1.34560000000");
  CHECK(decimal_str(Rational(15)) == "15.0000000000");
  CHECK(decimal_str(Rational(0)) == "0.00000000000");
  CHECK(decimal_str(Rational(-1, 3)) == "-0.333333333333");
  CHECK(decimal_str(Rational(1, 2)) == "0.500000000000");
  CHECK(decimal_str(Rational(2, 3)) == "0.666666666667");
}

TEST_CASE("powers and binomials") {
  CHECK(rat_pow(Rational(2, 3), 3) == Rational(8, 27));
  CHECK(rat_pow(Rational(-1), 5) == Rational(-1));
  CHECK(rat_pow(Rational(7), 0) == Rational(1));
  CHECK(binomial(5, 2) == Rational(10));
  CHECK(binomial(5, 6) == Rational(0));
  CHECK(falling_factorial(5, 2) == 20);
  CHECK(falling_factorial(3, 3) == 6);
  CHECK(falling_factorial(2, 3) == 0);
  CHECK(falling_factorial(4, 0) == 1);
}
