#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace riskhedge {

/// Exact scalar for the rational solve mode. Doubles convert to it losslessly.
using Rational = boost::multiprecision::cpp_rational;

namespace detail {

/// Parses "p/q", a decimal literal, or an integer into an exact rational.
inline Rational rational_from_string(const std::string& s) {
  using boost::multiprecision::cpp_int;
  const auto slash = s.find('/');
  if (slash != std::string::npos) {
    const std::string a = s.substr(0, slash), b = s.substr(slash + 1);
    if (a.empty() || b.empty()) throw std::invalid_argument("bad fraction '" + s + "'");
    const cpp_int num(a), den(b);
    if (den == 0) throw std::invalid_argument("zero denominator in '" + s + "'");
    return Rational(num, den);
  }
  std::size_t i = 0;
  bool neg = false;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) neg = s[i++] == '-';
  cpp_int digits = 0;
  long frac = 0, expo = 0;
  bool any = false;
  for (; i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])); ++i) {
    digits = digits * 10 + (s[i] - '0');
    any = true;
  }
  if (i < s.size() && s[i] == '.') {
    for (++i; i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])); ++i) {
      digits = digits * 10 + (s[i] - '0');
      ++frac;
      any = true;
    }
  }
  if (any && i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    bool eneg = false;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) eneg = s[i++] == '-';
    bool edig = false;
    for (; i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])); ++i) {
      expo = expo * 10 + (s[i] - '0');
      edig = true;
    }
    if (!edig) throw std::invalid_argument("bad exponent in '" + s + "'");
    if (eneg) expo = -expo;
  }
  if (!any || i != s.size()) throw std::invalid_argument("bad numeric literal '" + s + "'");
  Rational r(digits);
  if (neg) r = -r;
  long shift = expo - frac;
  cpp_int scale = 1;
  for (long k = 0; k < (shift < 0 ? -shift : shift); ++k) scale *= 10;
  if (shift >= 0)
    r *= Rational(scale);
  else
    r /= Rational(scale);
  return r;
}

}  // namespace detail

template <class S>
struct scalar_traits;

template <>
struct scalar_traits<double> {
  static constexpr bool exact = false;
  static double default_tol() { return 1e-9; }
  static bool finite(double v) { return std::isfinite(v); }
  static double from_double(double v) { return v; }
  static double to_double(double v) { return v; }
  static double from_string(const std::string& s) {
    return detail::rational_from_string(s).convert_to<double>();
  }
};

template <>
struct scalar_traits<Rational> {
  static constexpr bool exact = true;
  static Rational default_tol() { return Rational(0); }
  static bool finite(const Rational&) { return true; }
  static Rational from_double(double v) { return Rational(v); }
  static double to_double(const Rational& v) { return v.convert_to<double>(); }
  static Rational from_string(const std::string& s) { return detail::rational_from_string(s); }
};

template <class S>
inline S abs_of(const S& v) {
  return v < S(0) ? S(-v) : v;
}

template <class S>
inline S max_of(const S& a, const S& b) {
  return a < b ? b : a;
}

template <class S>
inline S min_of(const S& a, const S& b) {
  return b < a ? b : a;
}

}  // namespace riskhedge
