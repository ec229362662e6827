#pragma once

#include <boost/multiprecision/gmp.hpp>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pwflow {

using Rational = boost::multiprecision::mpq_rational;

// Arithmetic mode selected per instance; rational is for event geometry,
// minors and reproducibility, double for long orbits.
enum class ArithmeticMode { Float64, Rational };

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Traits bundling the tolerance regime of each scalar type.  Rational mode
// compares exactly; float mode uses the ladder of epsilons fixed here.
template <class T>
struct scalar_traits;

template <>
struct scalar_traits<double> {
  static constexpr bool exact = false;
  static double tie_tol() { return 1e-10; }     // relative, best-response ties
  static double simplex_tol() { return 1e-9; }  // coordinate / sum-to-one slack
  static double zero_tol() { return 1e-12; }
  static double abs(double x) { return std::fabs(x); }
  static double to_double(double x) { return x; }
  static double from_int(long v) { return static_cast<double>(v); }
};

template <>
struct scalar_traits<Rational> {
  static constexpr bool exact = true;
  static Rational tie_tol() { return Rational(0); }
  static Rational simplex_tol() { return Rational(0); }
  static Rational zero_tol() { return Rational(0); }
  static Rational abs(const Rational& x) { return x < 0 ? Rational(-x) : x; }
  static double to_double(const Rational& x) { return x.convert_to<double>(); }
  static Rational from_int(long v) { return Rational(v); }
};

// High precision scalar for deep refinement searches and conjugacy checks on
// chaotic stretches, where double roundoff is amplified past any tolerance.
using BigFloat =
    boost::multiprecision::number<boost::multiprecision::gmp_float<300>>;

template <>
struct scalar_traits<BigFloat> {
  static constexpr bool exact = false;
  static double tie_tol() { return 1e-40; }
  static double simplex_tol() { return 1e-40; }
  static double zero_tol() { return 1e-60; }
  static BigFloat abs(const BigFloat& x) { return x < 0 ? BigFloat(-x) : x; }
  static double to_double(const BigFloat& x) { return x.convert_to<double>(); }
  static BigFloat from_int(long v) { return BigFloat(v); }
};

inline double to_double(double x) { return x; }
inline double to_double(const Rational& x) { return x.convert_to<double>(); }
inline double to_double(const BigFloat& x) { return x.convert_to<double>(); }

// Parses "a/b" or a plain integer/decimal string into a rational.
inline Rational parse_rational(const std::string& s) {
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    return Rational(boost::multiprecision::mpz_int(s.substr(0, slash)),
                    boost::multiprecision::mpz_int(s.substr(slash + 1)));
  }
  auto e = s.find_first_of("eE");
  if (e != std::string::npos) {
    Rational mant = parse_rational(s.substr(0, e));
    long exp = std::stol(s.substr(e + 1));
    Rational ten(10);
    for (long i = 0; i < std::labs(exp); ++i) {
      if (exp > 0) mant *= ten;
      else mant /= ten;
    }
    return mant;
  }
  auto dot = s.find('.');
  if (dot == std::string::npos) return Rational(boost::multiprecision::mpz_int(s));
  std::string digits = s.substr(0, dot) + s.substr(dot + 1);
  bool neg = !digits.empty() && digits[0] == '-';
  if (neg || (!digits.empty() && digits[0] == '+')) digits.erase(0, 1);
  auto nz = digits.find_first_not_of('0');  // mpz_int rejects leading zeros
  digits = nz == std::string::npos ? "0" : digits.substr(nz);
  Rational den = 1;
  for (size_t i = dot + 1; i < s.size(); ++i) den *= 10;
  Rational num{boost::multiprecision::mpz_int(digits)};
  return (neg ? -num : num) / den;
}

inline std::string rational_string(const Rational& r) {
  return r.str();
}

}  // namespace pwflow
