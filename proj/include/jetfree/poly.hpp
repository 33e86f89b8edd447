#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "jetfree/scalar.hpp"

namespace jetfree {

using VarId = std::uint32_t;

/// Power product of variables. Factors are sorted by variable id and carry
/// strictly positive exponents, so equal monomials are equal vectors.
class Monomial {
 public:
  using Factor = std::pair<VarId, std::uint32_t>;

  Monomial() = default;
  explicit Monomial(std::vector<Factor> factors) : factors_(std::move(factors)) {
    std::sort(factors_.begin(), factors_.end());
    std::vector<Factor> merged;
    for (const auto& f : factors_) {
      if (f.second == 0) continue;
      if (!merged.empty() && merged.back().first == f.first)
        merged.back().second += f.second;
      else
        merged.push_back(f);
    }
    factors_ = std::move(merged);
    recount();
  }

  static Monomial variable(VarId v, std::uint32_t e = 1) { return Monomial({{v, e}}); }

  const std::vector<Factor>& factors() const { return factors_; }
  std::uint32_t degree() const { return degree_; }
  bool is_one() const { return factors_.empty(); }

  std::uint32_t exponent(VarId v) const {
    auto it = std::lower_bound(factors_.begin(), factors_.end(), Factor{v, 0});
    return (it != factors_.end() && it->first == v) ? it->second : 0;
  }

  friend Monomial operator*(const Monomial& a, const Monomial& b) {
    Monomial r;
    r.factors_.reserve(a.factors_.size() + b.factors_.size());
    auto i = a.factors_.begin(), j = b.factors_.begin();
    while (i != a.factors_.end() || j != b.factors_.end()) {
      if (j == b.factors_.end() || (i != a.factors_.end() && i->first < j->first)) {
        r.factors_.push_back(*i++);
      } else if (i == a.factors_.end() || j->first < i->first) {
        r.factors_.push_back(*j++);
      } else {
        r.factors_.emplace_back(i->first, i->second + j->second);
        ++i;
        ++j;
      }
    }
    r.degree_ = a.degree_ + b.degree_;
    return r;
  }

  /// True when `d` divides this monomial.
  bool divisible_by(const Monomial& d) const {
    auto i = factors_.begin();
    for (const auto& f : d.factors_) {
      while (i != factors_.end() && i->first < f.first) ++i;
      if (i == factors_.end() || i->first != f.first || i->second < f.second) return false;
    }
    return true;
  }

  /// Quotient; caller guarantees divisibility.
  Monomial divided_by(const Monomial& d) const {
    Monomial r;
    auto j = d.factors_.begin();
    for (const auto& f : factors_) {
      while (j != d.factors_.end() && j->first < f.first) ++j;
      std::uint32_t e = f.second;
      if (j != d.factors_.end() && j->first == f.first) e -= j->second;
      if (e) r.factors_.emplace_back(f.first, e);
    }
    r.recount();
    return r;
  }

  /// Removes one power of `v` (caller checks exponent > 0).
  Monomial lowered(VarId v) const {
    Monomial r = *this;
    for (auto it = r.factors_.begin(); it != r.factors_.end(); ++it) {
      if (it->first == v) {
        if (--it->second == 0) r.factors_.erase(it);
        break;
      }
    }
    r.recount();
    return r;
  }

  Monomial without(VarId v) const {
    Monomial r;
    for (const auto& f : factors_)
      if (f.first != v) r.factors_.push_back(f);
    r.recount();
    return r;
  }

  static Monomial gcd(const Monomial& a, const Monomial& b) {
    Monomial r;
    auto i = a.factors_.begin(), j = b.factors_.begin();
    while (i != a.factors_.end() && j != b.factors_.end()) {
      if (i->first < j->first) {
        ++i;
      } else if (j->first < i->first) {
        ++j;
      } else {
        r.factors_.emplace_back(i->first, std::min(i->second, j->second));
        ++i;
        ++j;
      }
    }
    r.recount();
    return r;
  }

  friend bool operator==(const Monomial& a, const Monomial& b) { return a.factors_ == b.factors_; }
  friend bool operator!=(const Monomial& a, const Monomial& b) { return !(a == b); }

 private:
  void recount() {
    degree_ = 0;
    for (const auto& f : factors_) degree_ += f.second;
  }

  std::vector<Factor> factors_;
  std::uint32_t degree_ = 0;
};

/// Graded lexicographic order; lower variable ids are more significant.
/// Returns <0, 0, >0 like strcmp.
inline int grlex_compare(const Monomial& a, const Monomial& b) {
  if (a.degree() != b.degree()) return a.degree() < b.degree() ? -1 : 1;
  const auto& fa = a.factors();
  const auto& fb = b.factors();
  std::size_t n = std::min(fa.size(), fb.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (fa[i].first != fb[i].first) return fa[i].first < fb[i].first ? 1 : -1;
    if (fa[i].second != fb[i].second) return fa[i].second < fb[i].second ? -1 : 1;
  }
  if (fa.size() != fb.size()) return fa.size() < fb.size() ? -1 : 1;
  return 0;
}

struct GrlexGreater {
  bool operator()(const Monomial& a, const Monomial& b) const { return grlex_compare(a, b) > 0; }
};

/// Sparse multivariate polynomial over the rationals. Terms are kept sorted
/// with the leading (grlex-largest) monomial first and no zero coefficients,
/// so structural equality is mathematical equality.
class Poly {
 public:
  struct Term {
    Monomial mono;
    Scalar coef;
    friend bool operator==(const Term& a, const Term& b) { return a.mono == b.mono && a.coef == b.coef; }
  };

  Poly() = default;
  Poly(const Scalar& c) {  // NOLINT(google-explicit-constructor)
    if (c != 0) terms_.push_back({Monomial(), c});
  }
  Poly(long c) : Poly(Scalar(c)) {}  // NOLINT(google-explicit-constructor)

  static Poly variable(VarId v) {
    Poly p;
    p.terms_.push_back({Monomial::variable(v), Scalar(1)});
    return p;
  }
  static Poly monomial(Monomial m, Scalar c) {
    Poly p;
    if (c != 0) p.terms_.push_back({std::move(m), std::move(c)});
    return p;
  }
  /// Builds from unsorted terms, combining duplicates.
  static Poly from_terms(std::vector<Term> terms) {
    Poly p;
    p.terms_ = std::move(terms);
    p.normalize();
    return p;
  }

  const std::vector<Term>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_[0].mono.is_one()); }
  Scalar constant_value() const { return terms_.empty() ? Scalar(0) : (terms_.back().mono.is_one() ? terms_.back().coef : Scalar(0)); }
  bool is_monomial() const { return terms_.size() == 1; }
  const Term& leading() const { return terms_.front(); }
  const Scalar& leading_coef() const { return terms_.front().coef; }

  std::uint32_t total_degree() const { return terms_.empty() ? 0 : terms_.front().mono.degree(); }

  std::uint32_t degree_in(VarId v) const {
    std::uint32_t d = 0;
    for (const auto& t : terms_) d = std::max(d, t.mono.exponent(v));
    return d;
  }

  std::set<VarId> variables() const {
    std::set<VarId> vs;
    for (const auto& t : terms_)
      for (const auto& f : t.mono.factors()) vs.insert(f.first);
    return vs;
  }

  bool contains(VarId v) const {
    for (const auto& t : terms_)
      if (t.mono.exponent(v)) return true;
    return false;
  }

  friend bool operator==(const Poly& a, const Poly& b) { return a.terms_ == b.terms_; }
  friend bool operator!=(const Poly& a, const Poly& b) { return !(a == b); }

  Poly operator-() const {
    Poly r = *this;
    for (auto& t : r.terms_) t.coef = -t.coef;
    return r;
  }

  friend Poly operator+(const Poly& a, const Poly& b) { return merge(a, b, false); }
  friend Poly operator-(const Poly& a, const Poly& b) { return merge(a, b, true); }

  friend Poly operator*(const Poly& a, const Poly& b) {
    if (a.is_zero() || b.is_zero()) return {};
    if (b.is_constant()) return a.scaled(b.constant_value());
    if (a.is_constant()) return b.scaled(a.constant_value());
    if (b.is_monomial()) return a.times_term(b.terms_[0]);
    if (a.is_monomial()) return b.times_term(a.terms_[0]);
    std::vector<Term> out;
    out.reserve(a.size() * b.size());
    for (const auto& s : a.terms_)
      for (const auto& t : b.terms_) out.push_back({s.mono * t.mono, s.coef * t.coef});
    return from_terms(std::move(out));
  }

  Poly& operator+=(const Poly& b) { return *this = *this + b; }
  Poly& operator-=(const Poly& b) { return *this = *this - b; }
  Poly& operator*=(const Poly& b) { return *this = *this * b; }

  Poly scaled(const Scalar& c) const {
    if (c == 0) return {};
    Poly r = *this;
    for (auto& t : r.terms_) t.coef *= c;
    return r;
  }

  Poly times_term(const Term& s) const {
    Poly r;
    r.terms_.reserve(terms_.size());
    // Multiplying by a monomial preserves grlex order.
    for (const auto& t : terms_) r.terms_.push_back({t.mono * s.mono, t.coef * s.coef});
    return r;
  }

  Poly pow(unsigned e) const {
    Poly r(1), b = *this;
    while (e) {
      if (e & 1U) r = r * b;
      e >>= 1U;
      if (e) b = b * b;
    }
    return r;
  }

  Poly diff(VarId v) const {
    std::vector<Term> out;
    for (const auto& t : terms_) {
      std::uint32_t e = t.mono.exponent(v);
      if (e) out.push_back({t.mono.lowered(v), t.coef * e});
    }
    return from_terms(std::move(out));
  }

  /// Divides by the leading coefficient.
  Poly monic() const {
    if (is_zero() || leading_coef() == 1) return *this;
    Scalar inv = 1 / leading_coef();
    return scaled(inv);
  }

  /// Evaluates with `lookup(v)` returning a pointer to the bound value or
  /// nullptr. Unbound variables throw.
  template <class T, class Lookup>
  T eval_as(Lookup&& lookup) const {
    T sum = T(0);
    for (const auto& t : terms_) {
      T prod = convert<T>(t.coef);
      for (const auto& f : t.mono.factors()) {
        const T* val = lookup(f.first);
        if (!val) throw Error(ErrorKind::UnboundVariable, "variable #" + std::to_string(f.first) + " has no value");
        for (std::uint32_t k = 0; k < f.second; ++k) prod *= *val;
      }
      sum += prod;
    }
    return sum;
  }

  /// Substitutes values for the bound variables and keeps the rest symbolic.
  template <class Lookup>
  Poly partial_eval(Lookup&& lookup) const {
    std::vector<Term> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) {
      Scalar c = t.coef;
      std::vector<Monomial::Factor> rest;
      for (const auto& f : t.mono.factors()) {
        const Scalar* val = lookup(f.first);
        if (val)
          c *= jetfree::pow(*val, f.second);
        else
          rest.push_back(f);
      }
      if (c != 0) out.push_back({Monomial(std::move(rest)), std::move(c)});
    }
    return from_terms(std::move(out));
  }

  /// Monomial gcd of all terms.
  Monomial monomial_content() const {
    if (terms_.empty()) return {};
    Monomial g = terms_[0].mono;
    for (std::size_t i = 1; i < terms_.size() && !g.is_one(); ++i) g = Monomial::gcd(g, terms_[i].mono);
    return g;
  }

  Poly divided_by_monomial(const Monomial& m) const {
    Poly r;
    r.terms_.reserve(terms_.size());
    for (const auto& t : terms_) r.terms_.push_back({t.mono.divided_by(m), t.coef});
    return r;
  }

  /// Coefficients of powers of `v`: result[i] is free of `v`.
  std::vector<Poly> univariate_coeffs(VarId v) const {
    std::vector<std::vector<Term>> buckets(degree_in(v) + 1);
    for (const auto& t : terms_) {
      std::uint32_t e = t.mono.exponent(v);
      buckets[e].push_back({e ? t.mono.without(v) : t.mono, t.coef});
    }
    std::vector<Poly> out;
    out.reserve(buckets.size());
    for (auto& b : buckets) out.push_back(from_terms(std::move(b)));
    return out;
  }

  static Poly from_univariate(const std::vector<Poly>& coeffs, VarId v) {
    std::vector<Term> out;
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      Monomial vi = Monomial::variable(v, static_cast<std::uint32_t>(i));
      for (const auto& t : coeffs[i].terms_) out.push_back({t.mono * vi, t.coef});
    }
    return from_terms(std::move(out));
  }

 private:
  template <class T>
  static T convert(const Scalar& c) {
    if constexpr (std::is_same_v<T, Scalar>)
      return c;
    else
      return static_cast<T>(c.get_d());
  }

  void normalize() {
    std::sort(terms_.begin(), terms_.end(),
              [](const Term& a, const Term& b) { return grlex_compare(a.mono, b.mono) > 0; });
    std::vector<Term> out;
    out.reserve(terms_.size());
    for (auto& t : terms_) {
      if (!out.empty() && out.back().mono == t.mono) {
        out.back().coef += t.coef;
      } else {
        if (!out.empty() && out.back().coef == 0) out.pop_back();
        out.push_back(std::move(t));
      }
    }
    if (!out.empty() && out.back().coef == 0) out.pop_back();
    terms_ = std::move(out);
  }

  static Poly merge(const Poly& a, const Poly& b, bool subtract) {
    Poly r;
    r.terms_.reserve(a.size() + b.size());
    auto i = a.terms_.begin(), j = b.terms_.begin();
    while (i != a.terms_.end() || j != b.terms_.end()) {
      int c;
      if (i == a.terms_.end())
        c = -1;
      else if (j == b.terms_.end())
        c = 1;
      else
        c = grlex_compare(i->mono, j->mono);
      if (c > 0) {
        r.terms_.push_back(*i++);
      } else if (c < 0) {
        r.terms_.push_back(subtract ? Term{j->mono, -j->coef} : *j);
        ++j;
      } else {
        Scalar s = subtract ? Scalar(i->coef - j->coef) : Scalar(i->coef + j->coef);
        if (s != 0) r.terms_.push_back({i->mono, std::move(s)});
        ++i;
        ++j;
      }
    }
    return r;
  }

  std::vector<Term> terms_;
};

/// Exact quotient a / b, or nullopt when b does not divide a.
inline std::optional<Poly> exact_divide(const Poly& a, const Poly& b) {
  if (b.is_zero()) throw Error(ErrorKind::DivisionByZero, "polynomial division by zero");
  if (a.is_zero()) return Poly();
  if (b.is_constant()) return a.scaled(1 / b.constant_value());
  if (a.total_degree() < b.total_degree()) return std::nullopt;
  if (b.is_monomial()) {
    const auto& bt = b.leading();
    std::vector<Poly::Term> out;
    out.reserve(a.size());
    for (const auto& t : a.terms()) {
      if (!t.mono.divisible_by(bt.mono)) return std::nullopt;
      out.push_back({t.mono.divided_by(bt.mono), t.coef / bt.coef});
    }
    return Poly::from_terms(std::move(out));
  }
  for (const auto& f : b.leading().mono.factors())
    if (a.degree_in(f.first) < f.second) return std::nullopt;
  std::vector<Poly::Term> quotient;
  Poly r = a;
  const auto& lb = b.leading();
  while (!r.is_zero()) {
    const auto& lr = r.leading();
    if (!lr.mono.divisible_by(lb.mono)) return std::nullopt;
    Poly::Term q{lr.mono.divided_by(lb.mono), lr.coef / lb.coef};
    r = r - b.times_term(q);
    quotient.push_back(std::move(q));
  }
  return Poly::from_terms(std::move(quotient));
}

namespace detail {

using UPoly = std::vector<Poly>;  // coefficients in the main variable, low to high

inline void trim(UPoly& p) {
  while (!p.empty() && p.back().is_zero()) p.pop_back();
}

inline int udeg(const UPoly& p) { return static_cast<int>(p.size()) - 1; }

inline UPoly pseudo_remainder(UPoly a, const UPoly& b) {
  int db = udeg(b);
  int e = udeg(a) - db + 1;
  const Poly& lb = b.back();
  while (!a.empty() && udeg(a) >= db) {
    Poly lr = a.back();
    int shift = udeg(a) - db;
    for (auto& c : a) c = c * lb;
    for (int i = 0; i <= db; ++i) a[i + shift] -= lr * b[i];
    trim(a);
    --e;
  }
  if (e > 0) {
    Poly f = lb.pow(static_cast<unsigned>(e));
    for (auto& c : a) c = c * f;
  }
  return a;
}

}  // namespace detail

Poly gcd(const Poly& a, const Poly& b);

inline Poly content_gcd(const std::vector<Poly>& coeffs) {
  Poly g;
  for (const auto& c : coeffs) {
    if (c.is_zero()) continue;
    g = gcd(g, c);
    if (g.is_constant()) return Poly(1);
  }
  return g;
}

namespace detail {

inline UPoly primitive_part(const UPoly& p) {
  Poly c = content_gcd(p);
  if (c.is_constant()) {
    UPoly r = p;
    Scalar inv = 1 / r.back().leading_coef();
    for (auto& x : r) x = x.scaled(inv);
    return r;
  }
  UPoly r;
  r.reserve(p.size());
  for (const auto& x : p) r.push_back(*exact_divide(x, c));
  return r;
}

/// gcd of primitive univariate polynomials via the subresultant sequence.
inline UPoly subresultant_gcd(UPoly a, UPoly b) {
  if (udeg(a) < udeg(b)) std::swap(a, b);
  if (udeg(b) == 0) return {Poly(1)};
  Poly g(1), h(1);
  for (;;) {
    int delta = udeg(a) - udeg(b);
    UPoly r = pseudo_remainder(a, b);
    if (r.empty()) return primitive_part(b);
    if (udeg(r) == 0) return {Poly(1)};
    Poly div = g * h.pow(static_cast<unsigned>(delta));
    a = std::move(b);
    b.clear();
    for (const auto& c : r) b.push_back(*exact_divide(c, div));
    g = a.back();
    if (delta == 0) {
      // h unchanged
    } else if (delta == 1) {
      h = g;
    } else {
      h = *exact_divide(g.pow(static_cast<unsigned>(delta)), h.pow(static_cast<unsigned>(delta - 1)));
    }
  }
}

}  // namespace detail

/// Monic greatest common divisor over Q; gcd(0, 0) = 0.
inline Poly gcd(const Poly& a, const Poly& b) {
  if (a.is_zero()) return b.monic();
  if (b.is_zero()) return a.monic();
  if (a.is_constant() || b.is_constant()) return Poly(1);
  Monomial ma = a.monomial_content(), mb = b.monomial_content();
  Monomial gm = Monomial::gcd(ma, mb);
  Poly mono_part = Poly::monomial(gm, Scalar(1));
  Poly ra = ma.is_one() ? a : a.divided_by_monomial(ma);
  Poly rb = mb.is_one() ? b : b.divided_by_monomial(mb);
  if (ra.is_constant() || rb.is_constant()) return mono_part;
  if (ra.size() <= rb.size()) {
    if (exact_divide(rb, ra)) return mono_part * ra.monic();
  } else {
    if (exact_divide(ra, rb)) return mono_part * rb.monic();
  }
  std::set<VarId> va = ra.variables(), vb = rb.variables();
  VarId best = 0;
  std::uint32_t best_deg = 0;
  bool found = false;
  for (VarId v : va) {
    if (!vb.count(v)) continue;
    std::uint32_t d = std::min(ra.degree_in(v), rb.degree_in(v));
    if (!found || d < best_deg) {
      best = v;
      best_deg = d;
      found = true;
    }
  }
  if (!found) return mono_part;
  detail::UPoly ua = ra.univariate_coeffs(best), ub = rb.univariate_coeffs(best);
  Poly ca = content_gcd(ua), cb = content_gcd(ub);
  Poly c = gcd(ca, cb);
  detail::UPoly pa, pb;
  for (const auto& x : ua) pa.push_back(*exact_divide(x, ca));
  for (const auto& x : ub) pb.push_back(*exact_divide(x, cb));
  detail::UPoly g = detail::subresultant_gcd(std::move(pa), std::move(pb));
  return (mono_part * c * Poly::from_univariate(g, best)).monic();
}

}  // namespace jetfree
