#pragma once

#include <sstream>
#include <string>

#include "jetfree/jetspace.hpp"

namespace jetfree {

namespace detail {

inline std::string format_poly(const JetSpace& js, const Poly& p) {
  if (p.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& t : p.terms()) {
    Scalar c = t.coef;
    bool negative = c < 0;
    if (negative) c = -c;
    if (first)
      os << (negative ? "-" : "");
    else
      os << (negative ? " - " : " + ");
    first = false;
    bool need_star = false;
    if (t.mono.is_one() || c != 1) {
      os << c.get_str();
      need_star = true;
    }
    for (const auto& f : t.mono.factors()) {
      if (need_star) os << "*";
      os << js.name(f.first);
      if (f.second > 1) os << "^" << f.second;
      need_star = true;
    }
  }
  return os.str();
}

}  // namespace detail

/// Text form that the pseudogroup DSL parses back to the same expression.
inline std::string format_expr(const JetSpace& js, const Expr& e) {
  std::string n = detail::format_poly(js, e.num());
  if (e.is_polynomial()) return n;
  return "(" + n + ")/(" + detail::format_poly(js, e.den()) + ")";
}

}  // namespace jetfree
