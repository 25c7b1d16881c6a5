#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <string>

namespace wfomc {

/// Exact signed rational. All counting results and weights use this type;
/// no binary floating point enters the pipeline unless float mode is chosen
/// explicitly.
using Rational = mpq_class;

inline Rational rat_pow(const Rational& base, uint64_t exp) {
  Rational num, den;
  mpz_pow_ui(num.get_num_mpz_t(), base.get_num_mpz_t(), exp);
  mpz_pow_ui(den.get_num_mpz_t(), base.get_den_mpz_t(), exp);
  // num/den is already canonical when base is.
  Rational out;
  mpq_set_num(out.get_mpq_t(), num.get_num_mpz_t());
  mpq_set_den(out.get_mpq_t(), den.get_num_mpz_t());
  out.canonicalize();
  return out;
}

inline Rational binomial(uint64_t n, uint64_t k) {
  if (k > n) return Rational(0);
  mpz_class b;
  mpz_bin_uiui(b.get_mpz_t(), n, k);
  return Rational(b);
}

/// n · (n-1) · ... · (n-k+1); the number of injective assignments of k
/// pairwise-distinct variables to an n-element population.
inline uint64_t falling_factorial(uint64_t n, uint64_t k) {
  uint64_t out = 1;
  for (uint64_t i = 0; i < k; ++i) {
    if (i > n) return 0;
    out *= (n - i);
  }
  return k > n ? 0 : out;
}

/// Accepts "p/q", "-p/q", integers and decimal literals ("0.2" -> 1/5).
inline std::optional<Rational> parse_rational(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::string s = text;
  bool neg = false;
  if (s[0] == '+' || s[0] == '-') {
    neg = s[0] == '-';
    s = s.substr(1);
  }
  if (s.empty()) return std::nullopt;
  auto all_digits = [](const std::string& t) {
    if (t.empty()) return false;
    for (char c : t)
      if (c < '0' || c > '9') return false;
    return true;
  };
  Rational value;
  auto slash = s.find('/');
  auto dot = s.find('.');
  if (slash != std::string::npos) {
    std::string p = s.substr(0, slash), q = s.substr(slash + 1);
    if (!all_digits(p) || !all_digits(q) || q == "0") return std::nullopt;
    value = Rational(mpz_class(p), mpz_class(q));
  } else if (dot != std::string::npos) {
    std::string ip = s.substr(0, dot), fp = s.substr(dot + 1);
    if (ip.empty()) ip = "0";
    if (!all_digits(ip) || (!fp.empty() && !all_digits(fp))) return std::nullopt;
    mpz_class num(ip);
    mpz_class scale(1);
    for (char c : fp) {
      num = num * 10 + (c - '0');
      scale *= 10;
    }
    value = Rational(num, scale);
  } else {
    if (!all_digits(s)) return std::nullopt;
    value = Rational(mpz_class(s));
  }
  value.canonicalize();
  if (neg) value = -value;
  return value;
}

/// "p" when integral, else "p/q".
inline std::string rational_str(const Rational& q) {
  return q.get_str();
}

/// Fixed number of significant digits, half-up rounding; fixed-point layout
/// for moderate magnitudes, scientific otherwise. Display only.
inline std::string decimal_str(const Rational& q, int sig_digits = 12) {
  if (sgn(q) == 0) {
    std::string z = "0.";
    z.append(static_cast<size_t>(sig_digits - 1), '0');
    return z;
  }
  mpz_class num = abs(q.get_num());
  mpz_class den = q.get_den();
  // exponent e with 10^e <= num/den < 10^(e+1)
  long e = static_cast<long>(mpz_sizeinbase(num.get_mpz_t(), 10)) -
           static_cast<long>(mpz_sizeinbase(den.get_mpz_t(), 10)) + 1;
  auto scaled = [&](long shift) {
    // round(num * 10^shift / den), half-up
    mpz_class n = num, d = den;
    if (shift >= 0) {
      mpz_class p;
      mpz_ui_pow_ui(p.get_mpz_t(), 10, static_cast<unsigned long>(shift));
      n *= p;
    } else {
      mpz_class p;
      mpz_ui_pow_ui(p.get_mpz_t(), 10, static_cast<unsigned long>(-shift));
      d *= p;
    }
    return mpz_class((2 * n + d) / (2 * d));
  };
  mpz_class digits = scaled(sig_digits - 1 - e);
  std::string ds = digits.get_str();
  while (static_cast<int>(ds.size()) > sig_digits) {  // rounding overflowed a digit
    ++e;
    digits = scaled(sig_digits - 1 - e);
    ds = digits.get_str();
  }
  while (static_cast<int>(ds.size()) < sig_digits) {
    --e;
    digits = scaled(sig_digits - 1 - e);
    ds = digits.get_str();
  }
  std::string sign = sgn(q) < 0 ? "-" : "";
  if (e >= -4 && e < sig_digits + 3) {
    if (e < 0) {
      std::string out = sign + "0.";
      out.append(static_cast<size_t>(-e - 1), '0');
      return out + ds;
    }
    if (e + 1 >= sig_digits) {
      std::string out = ds;
      out.append(static_cast<size_t>(e + 1 - sig_digits), '0');
      return sign + out;
    }
    return sign + ds.substr(0, static_cast<size_t>(e + 1)) + "." +
           ds.substr(static_cast<size_t>(e + 1));
  }
  std::string out = sign + ds.substr(0, 1) + "." + ds.substr(1) + "e" +
                    (e < 0 ? "-" : "+") + std::to_string(e < 0 ? -e : e);
  return out;
}

}  // namespace wfomc
