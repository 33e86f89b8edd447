#pragma once

#include <map>
#include <unordered_map>
#include <utility>
#include <vector>

#include "jetfree/poly.hpp"

namespace jetfree {

using Bindings = std::map<VarId, Scalar>;

/// Rational function num / den in canonical form: den is monic, the two
/// share no common factor, and zero is 0 / 1. Immutable value type.
class Expr {
 public:
  Expr() : den_(1) {}
  Expr(const Scalar& c) : num_(c), den_(1) {}  // NOLINT(google-explicit-constructor)
  Expr(long c) : Expr(Scalar(c)) {}            // NOLINT(google-explicit-constructor)
  Expr(Poly p) : num_(std::move(p)), den_(1) {}  // NOLINT(google-explicit-constructor)

  static Expr variable(VarId v) { return Expr(Poly::variable(v)); }

  /// Reduces num / den to canonical form.
  static Expr fraction(Poly num, Poly den) {
    if (den.is_zero()) throw Error(ErrorKind::DivisionByZero, "zero denominator");
    if (num.is_zero()) return Expr();
    if (!den.is_constant()) {
      Poly g = gcd(num, den);
      if (!g.is_constant()) {
        num = *exact_divide(num, g);
        den = *exact_divide(den, g);
      }
    }
    return from_coprime(std::move(num), std::move(den));
  }

  /// Caller guarantees gcd(num, den) = 1; only the scaling is normalized.
  static Expr from_coprime(Poly num, Poly den) {
    if (den.is_zero()) throw Error(ErrorKind::DivisionByZero, "zero denominator");
    Expr e;
    if (num.is_zero()) return e;
    Scalar lc = den.leading_coef();
    if (lc != 1) {
      Scalar inv = 1 / lc;
      num = num.scaled(inv);
      den = den.scaled(inv);
    }
    e.num_ = std::move(num);
    e.den_ = std::move(den);
    return e;
  }

  const Poly& num() const { return num_; }
  const Poly& den() const { return den_; }
  bool is_zero() const { return num_.is_zero(); }
  bool is_polynomial() const { return den_.is_constant(); }
  bool is_constant() const { return num_.is_constant() && den_.is_constant(); }
  Scalar constant_value() const { return num_.constant_value() / den_.constant_value(); }

  std::set<VarId> variables() const {
    auto v = num_.variables();
    auto w = den_.variables();
    v.insert(w.begin(), w.end());
    return v;
  }
  bool contains(VarId v) const { return num_.contains(v) || den_.contains(v); }

  friend bool operator==(const Expr& a, const Expr& b) { return a.num_ == b.num_ && a.den_ == b.den_; }
  friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

  Expr operator-() const {
    Expr r = *this;
    r.num_ = -r.num_;
    return r;
  }

  friend Expr operator+(const Expr& a, const Expr& b) { return add(a, b, false); }
  friend Expr operator-(const Expr& a, const Expr& b) { return add(a, b, true); }

  friend Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_zero() || b.is_zero()) return Expr();
    if (a.is_polynomial() && b.is_polynomial()) return Expr(a.num_ * b.num_);
    // Cross-cancel: gcd(a.num, b.den) and gcd(b.num, a.den).
    Poly an = a.num_, ad = a.den_, bn = b.num_, bd = b.den_;
    cancel(an, bd);
    cancel(bn, ad);
    return from_coprime(an * bn, ad * bd);
  }

  friend Expr operator/(const Expr& a, const Expr& b) {
    if (b.is_zero()) throw Error(ErrorKind::DivisionByZero, "division by the zero expression");
    return a * b.inverse();
  }

  Expr inverse() const {
    if (is_zero()) throw Error(ErrorKind::DivisionByZero, "inverse of the zero expression");
    return from_coprime(den_, num_);
  }

  Expr& operator+=(const Expr& b) { return *this = *this + b; }
  Expr& operator-=(const Expr& b) { return *this = *this - b; }
  Expr& operator*=(const Expr& b) { return *this = *this * b; }
  Expr& operator/=(const Expr& b) { return *this = *this / b; }

  /// Integer power; negative exponents invert.
  Expr pow(long e) const {
    if (e < 0) return inverse().pow(-e);
    if (is_polynomial()) return Expr(num_.pow(static_cast<unsigned>(e)).scaled(1 / jetfree::pow(den_.constant_value(), static_cast<unsigned>(e))));
    return from_coprime(num_.pow(static_cast<unsigned>(e)), den_.pow(static_cast<unsigned>(e)));
  }

  /// Formal partial derivative.
  Expr diff(VarId v) const {
    if (is_polynomial()) return Expr(num_.diff(v).scaled(1 / den_.constant_value()));
    Poly dn = num_.diff(v), dd = den_.diff(v);
    if (dd.is_zero()) return fraction(dn, den_);
    return fraction(dn * den_ - num_ * dd, den_ * den_);
  }

  /// Exact value; every variable must be bound.
  template <class Lookup>
  Scalar eval_with(Lookup&& lookup) const {
    Scalar n = num_.eval_as<Scalar>(lookup);
    if (is_polynomial()) return n / den_.constant_value();
    Scalar d = den_.eval_as<Scalar>(lookup);
    if (d == 0) throw Error(ErrorKind::DivisionByZero, "denominator vanishes at the evaluation point");
    return n / d;
  }

  Scalar eval(const Bindings& point) const {
    return eval_with([&](VarId v) -> const Scalar* {
      auto it = point.find(v);
      return it == point.end() ? nullptr : &it->second;
    });
  }

  template <class Lookup>
  double eval_double(Lookup&& lookup) const {
    double n = num_.eval_as<double>(lookup);
    double d = den_.eval_as<double>(lookup);
    return n / d;
  }

  /// Binds some variables to values, keeping the others symbolic.
  template <class Lookup>
  Expr partial_eval_with(Lookup&& lookup) const {
    Poly n = num_.partial_eval(lookup);
    if (is_polynomial()) return Expr(n.scaled(1 / den_.constant_value()));
    Poly d = den_.partial_eval(lookup);
    if (d.is_zero()) throw Error(ErrorKind::DivisionByZero, "denominator vanishes identically after substitution");
    return fraction(std::move(n), std::move(d));
  }

  Expr partial_eval(const Bindings& point) const {
    return partial_eval_with([&](VarId v) -> const Scalar* {
      auto it = point.find(v);
      return it == point.end() ? nullptr : &it->second;
    });
  }

 private:
  static void cancel(Poly& n, Poly& d) {
    if (d.is_constant() || n.is_constant()) return;
    Poly g = gcd(n, d);
    if (g.is_constant()) return;
    n = *exact_divide(n, g);
    d = *exact_divide(d, g);
  }

  static Expr add(const Expr& a, const Expr& b, bool subtract) {
    if (a.is_polynomial() && b.is_polynomial()) {
      Poly bn = b.den_.constant_value() == 1 ? b.num_ : b.num_.scaled(1 / b.den_.constant_value());
      Poly an = a.den_.constant_value() == 1 ? a.num_ : a.num_.scaled(1 / a.den_.constant_value());
      return Expr(subtract ? an - bn : an + bn);
    }
    if (a.den_ == b.den_) {
      Poly n = subtract ? a.num_ - b.num_ : a.num_ + b.num_;
      return fraction(std::move(n), a.den_);
    }
    // With g = gcd(a.den, b.den), only g can share factors with the new
    // numerator.
    Poly g = gcd(a.den_, b.den_);
    Poly ad = a.den_, bd = b.den_;
    if (!g.is_constant()) {
      ad = *exact_divide(ad, g);
      bd = *exact_divide(bd, g);
    }
    Poly n = subtract ? a.num_ * bd - b.num_ * ad : a.num_ * bd + b.num_ * ad;
    Poly d = ad * bd;
    if (n.is_zero()) return Expr();
    if (!g.is_constant()) {
      Poly h = gcd(n, g);
      if (!h.is_constant()) {
        n = *exact_divide(n, h);
        g = *exact_divide(g, h);
      }
      d = d * g;
    }
    return from_coprime(std::move(n), std::move(d));
  }

  Poly num_;
  Poly den_;
};

/// Simultaneous substitution of expressions for variables.
inline Expr substitute(const Expr& e, const std::map<VarId, Expr>& bindings) {
  auto subst_poly = [&](const Poly& p) {
    Expr sum;
    std::map<std::pair<VarId, std::uint32_t>, Expr> powers;
    auto power = [&](VarId v, std::uint32_t k) -> const Expr& {
      auto key = std::make_pair(v, k);
      auto it = powers.find(key);
      if (it != powers.end()) return it->second;
      return powers.emplace(key, bindings.at(v).pow(k)).first->second;
    };
    // Keep unbound factors as a polynomial part of each term.
    std::vector<Poly::Term> plain;
    for (const auto& t : p.terms()) {
      Expr factor(t.coef);
      std::vector<Monomial::Factor> rest;
      bool touched = false;
      for (const auto& f : t.mono.factors()) {
        if (bindings.count(f.first)) {
          factor = factor * power(f.first, f.second);
          touched = true;
        } else {
          rest.push_back(f);
        }
      }
      if (!touched) {
        plain.push_back(t);
        continue;
      }
      sum += factor * Expr(Poly::monomial(Monomial(std::move(rest)), Scalar(1)));
    }
    return sum + Expr(Poly::from_terms(std::move(plain)));
  };
  Expr n = subst_poly(e.num());
  if (e.is_polynomial()) return n * Expr(Scalar(1 / e.den().constant_value()));
  Expr d = subst_poly(e.den());
  if (d.is_zero()) throw Error(ErrorKind::DivisionByZero, "denominator vanishes identically after substitution");
  return n / d;
}

}  // namespace jetfree
