#pragma once

#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <mutex>
#include <string_view>
#include <typeindex>
#include <unordered_map>
#include <vector>

#include "jetfree/expr.hpp"

namespace jetfree {

/// Splitting of the coordinates of M into independent variables x^i and
/// dependent variables u^alpha. Slots 0..p-1 are the x's, p..m-1 the u's.
struct SpaceSpec {
  std::vector<std::string> independent;
  std::vector<std::string> dependent;

  int p() const { return static_cast<int>(independent.size()); }
  int q() const { return static_cast<int>(dependent.size()); }
  int m() const { return p() + q(); }

  std::vector<std::string> names() const {
    std::vector<std::string> all = independent;
    all.insert(all.end(), dependent.begin(), dependent.end());
    return all;
  }

  friend bool operator==(const SpaceSpec&, const SpaceSpec&) = default;
};

inline std::string upper_name(std::string_view s) {
  std::string r(s);
  for (auto& c : r) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return r;
}

inline bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])))) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

/// Checks naming rules. With `require_split`, also 1 <= p < m as needed for
/// submanifold jets; diffeomorphism jets alone only need m >= 1.
inline void validate(const SpaceSpec& s, bool require_split = true) {
  auto all = s.names();
  if (all.empty()) throw Error(ErrorKind::InvalidSpec, "space has no coordinates");
  if (require_split && (s.p() < 1 || s.q() < 1))
    throw Error(ErrorKind::InvalidSpec, "need at least one independent and one dependent variable");
  std::set<std::string> seen;
  for (const auto& n : all) {
    if (!is_identifier(n)) throw Error(ErrorKind::InvalidSpec, "bad coordinate name '" + n + "'");
    if (n == "zeta") throw Error(ErrorKind::InvalidSpec, "'zeta' is reserved");
    if (!seen.insert(n).second) throw Error(ErrorKind::InvalidSpec, "duplicate coordinate name '" + n + "'");
  }
  for (const auto& n : all) {
    std::string up = upper_name(n);
    if (up == n || !seen.insert(up).second)
      throw Error(ErrorKind::InvalidSpec, "target name '" + up + "' of coordinate '" + n + "' collides with another name");
  }
}

/// Symmetric multi-index: nondecreasing list of coordinate slots.
using MultiIndex = std::vector<int>;

inline MultiIndex concat(MultiIndex a, int slot) {
  a.insert(std::upper_bound(a.begin(), a.end(), slot), slot);
  return a;
}

/// All C(s+k-1, k) nondecreasing multi-indices of length k over s symbols,
/// in lexicographic order.
inline std::vector<MultiIndex> mi_enumerate(int s, int k) {
  std::vector<MultiIndex> out;
  MultiIndex cur(static_cast<std::size_t>(k), 0);
  if (s < 1) return k == 0 ? std::vector<MultiIndex>{MultiIndex{}} : out;
  for (;;) {
    out.push_back(cur);
    int i = k - 1;
    while (i >= 0 && cur[static_cast<std::size_t>(i)] == s - 1) --i;
    if (i < 0) break;
    int v = cur[static_cast<std::size_t>(i)] + 1;
    for (int j = i; j < k; ++j) cur[static_cast<std::size_t>(j)] = v;
  }
  return out;
}

inline std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

struct JetDims {
  int order = 0;
  std::size_t jet_fiber = 0;     // q * C(p+n, n): u-jets over a point of the x-space
  std::size_t jet_total = 0;     // p + jet_fiber
  std::size_t target_fiber = 0;  // m * C(m+n, n)
  std::size_t vector_field = 0;  // m * C(m+n, n)
};

inline JetDims jet_dims(const SpaceSpec& s, int n) {
  auto p = static_cast<std::size_t>(s.p()), q = static_cast<std::size_t>(s.q()), m = static_cast<std::size_t>(s.m());
  auto nn = static_cast<std::size_t>(n);
  JetDims d;
  d.order = n;
  d.jet_fiber = q * binomial(p + nn, nn);
  d.jet_total = p + d.jet_fiber;
  d.target_fiber = m * binomial(m + nn, nn);
  d.vector_field = d.target_fiber;
  return d;
}

enum class JetKind { Source, Target, Submanifold, VectorField };

struct JetVariable {
  JetKind kind;
  int base;  // coordinate slot a (source/target/vector field) or alpha (submanifold)
  MultiIndex index;
  std::string name;
  int order() const { return static_cast<int>(index.size()); }
};

/// Frozen registry of every jet variable up to a fixed order cap. Ids are
/// laid out order by order, so the ids of order <= k do not depend on the
/// cap. Derivative operators that would need a variable beyond the cap throw
/// OrderCapExceeded.
class JetSpace {
 public:
  JetSpace(SpaceSpec spec, int cap) : spec_(std::move(spec)), names_(spec_.names()), cap_(cap) {
    validate(spec_, false);
    if (cap_ < 0) throw Error(ErrorKind::InvalidArgument, "negative order cap");
    const int m = spec_.m(), p = spec_.p(), q = spec_.q();
    for (int a = 0; a < m; ++a) add({JetKind::Source, a, {}, names_[static_cast<std::size_t>(a)]});
    for (int k = 0; k <= cap_; ++k) {
      auto full = mi_enumerate(m, k);
      for (int a = 0; a < m; ++a)
        for (const auto& b : full) add({JetKind::Target, a, b, target_name(a, b)});
      if (k >= 1 && p >= 1) {
        auto sub = mi_enumerate(p, k);
        for (int al = 0; al < q; ++al)
          for (const auto& j : sub) add({JetKind::Submanifold, al, j, submanifold_name(al, j)});
      }
      for (int a = 0; a < m; ++a)
        for (const auto& b : full) add({JetKind::VectorField, a, b, zeta_name(a, b)});
    }
  }

  static std::shared_ptr<const JetSpace> make(SpaceSpec spec, int cap) {
    return std::make_shared<const JetSpace>(std::move(spec), cap);
  }

  const SpaceSpec& spec() const { return spec_; }
  int cap() const { return cap_; }
  int m() const { return spec_.m(); }
  int p() const { return spec_.p(); }
  int q() const { return spec_.q(); }
  std::size_t size() const { return vars_.size(); }

  bool contains(VarId v) const { return v < vars_.size(); }
  const JetVariable& var(VarId v) const {
    if (!contains(v)) throw Error(ErrorKind::UnknownVariable, "variable #" + std::to_string(v) + " is not registered");
    return vars_[v];
  }
  const std::string& name(VarId v) const { return var(v).name; }

  std::optional<VarId> find(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }
  VarId lookup(std::string_view name) const {
    auto v = find(name);
    if (!v) throw Error(ErrorKind::UnknownVariable, "no jet variable named '" + std::string(name) + "'");
    return *v;
  }

  VarId source(int a) const { return static_cast<VarId>(a); }
  VarId x(int i) const { return source(i); }
  VarId u(int alpha) const { return source(p() + alpha); }

  VarId target(int a, const MultiIndex& b) const { return get(JetKind::Target, a, b); }
  VarId zeta(int a, const MultiIndex& b) const { return get(JetKind::VectorField, a, b); }
  VarId submanifold(int alpha, const MultiIndex& j) const {
    if (j.empty()) return u(alpha);
    return get(JetKind::Submanifold, alpha, j);
  }

  /// Target jets Z^a_B with |B| = k, ordered by a then B.
  std::vector<VarId> target_vars_of_order(int k) const { return of_order(JetKind::Target, k); }
  std::vector<VarId> zeta_vars_of_order(int k) const { return of_order(JetKind::VectorField, k); }
  std::vector<VarId> target_vars(int n) const { return up_to(JetKind::Target, n); }
  std::vector<VarId> zeta_vars(int n) const { return up_to(JetKind::VectorField, n); }

  /// Coordinates of J^n: x^i, u^alpha, then u^alpha_J by order.
  std::vector<VarId> jet_coordinates(int n) const {
    check_cap(n);
    std::vector<VarId> out;
    for (int a = 0; a < m(); ++a) out.push_back(source(a));
    for (int k = 1; k <= n; ++k) {
      auto more = of_order(JetKind::Submanifold, k);
      out.insert(out.end(), more.begin(), more.end());
    }
    return out;
  }

  /// Position of a target, vector-field or jet coordinate in target_vars(n),
  /// zeta_vars(n) or jet_coordinates(n) respectively (any n >= its order).
  std::size_t position(VarId v) const { return rank_.at(v); }

  /// Per-space memo slot for derived data (formula tables). T must be
  /// default constructible and do its own locking.
  template <class T>
  T& memo() const {
    std::lock_guard<std::mutex> lock(memo_mutex_);
    auto& slot = memo_[std::type_index(typeid(T))];
    if (!slot) slot = std::make_shared<T>();
    return *static_cast<T*>(slot.get());
  }

  /// Jet order of a variable; source coordinates have order 0.
  int order(VarId v) const { return var(v).order(); }

  /// Highest order of a variable of `kind` in e, or -1 if none.
  int max_order(const Expr& e, JetKind kind) const {
    int best = -1;
    for (VarId v : e.variables()) {
      const auto& jv = var(v);
      if (jv.kind == kind) best = std::max(best, jv.order());
    }
    return best;
  }

  void check_cap(int n) const {
    if (n > cap_)
      throw Error(ErrorKind::OrderCapExceeded, "order " + std::to_string(n) + " exceeds the registry cap " + std::to_string(cap_));
  }

  std::string slot_name(int s) const {
    const auto& n = names_[static_cast<std::size_t>(s)];
    return n.size() == 1 ? n : "{" + n + "}";
  }

  std::string suffix(const MultiIndex& b) const {
    std::string s;
    for (int slot : b) s += slot_name(slot);
    return s;
  }

 private:
  std::string target_name(int a, const MultiIndex& b) const {
    std::string n = upper_name(names_[static_cast<std::size_t>(a)]);
    return b.empty() ? n : n + "." + suffix(b);
  }
  std::string zeta_name(int a, const MultiIndex& b) const {
    std::string n = "zeta{" + names_[static_cast<std::size_t>(a)] + "}";
    return b.empty() ? n : n + "." + suffix(b);
  }
  std::string submanifold_name(int alpha, const MultiIndex& j) const {
    return spec_.dependent[static_cast<std::size_t>(alpha)] + "." + suffix(j);
  }

  void add(JetVariable v) {
    auto id = static_cast<VarId>(vars_.size());
    int family = v.kind == JetKind::Submanifold ? static_cast<int>(JetKind::Source) : static_cast<int>(v.kind);
    rank_.push_back(counts_[family]++);
    by_name_.emplace(v.name, id);
    index_[key(v.kind, v.base, v.index)] = id;
    by_order_[{static_cast<int>(v.kind), v.order()}].push_back(id);
    vars_.push_back(std::move(v));
  }

  static std::string key(JetKind kind, int base, const MultiIndex& b) {
    std::string k;
    k.push_back(static_cast<char>('0' + static_cast<int>(kind)));
    k += std::to_string(base);
    for (int s : b) {
      k.push_back(',');
      k += std::to_string(s);
    }
    return k;
  }

  VarId get(JetKind kind, int base, const MultiIndex& b) const {
    check_cap(static_cast<int>(b.size()));
    if (kind == JetKind::Target || kind == JetKind::VectorField) {
      if (base < 0 || base >= m()) throw Error(ErrorKind::InvalidArgument, "coordinate slot out of range");
    }
    auto it = index_.find(key(kind, base, b));
    if (it == index_.end()) throw Error(ErrorKind::UnknownVariable, "no such jet variable");
    return it->second;
  }

  std::vector<VarId> of_order(JetKind kind, int k) const {
    check_cap(k);
    if (kind == JetKind::Submanifold && k == 0) {
      std::vector<VarId> out;
      for (int al = 0; al < q(); ++al) out.push_back(u(al));
      return out;
    }
    auto it = by_order_.find({static_cast<int>(kind), k});
    return it == by_order_.end() ? std::vector<VarId>{} : it->second;
  }

  std::vector<VarId> up_to(JetKind kind, int n) const {
    std::vector<VarId> out;
    for (int k = 0; k <= n; ++k) {
      auto more = of_order(kind, k);
      out.insert(out.end(), more.begin(), more.end());
    }
    return out;
  }

  SpaceSpec spec_;
  std::vector<std::string> names_;
  int cap_;
  std::vector<JetVariable> vars_;
  std::unordered_map<std::string, VarId> by_name_;
  std::unordered_map<std::string, VarId> index_;
  std::map<std::pair<int, int>, std::vector<VarId>> by_order_;
  std::vector<std::size_t> rank_;
  std::map<int, std::size_t> counts_;
  mutable std::mutex memo_mutex_;
  mutable std::map<std::type_index, std::shared_ptr<void>> memo_;
};

using JetSpacePtr = std::shared_ptr<const JetSpace>;

/// Applies the derivation sum_v coeff(v) d/dv, where coeff returns a
/// polynomial (possibly zero) for each variable present.
template <class CoeffFn>
Poly apply_derivation(const Poly& p, CoeffFn&& coeff) {
  std::map<VarId, Poly> cache;
  std::vector<Poly::Term> out;
  for (const auto& t : p.terms()) {
    for (const auto& f : t.mono.factors()) {
      auto it = cache.find(f.first);
      if (it == cache.end()) it = cache.emplace(f.first, coeff(f.first)).first;
      const Poly& c = it->second;
      if (c.is_zero()) continue;
      Monomial rest = t.mono.lowered(f.first);
      Scalar k = t.coef * f.second;
      for (const auto& ct : c.terms()) out.push_back({rest * ct.mono, k * ct.coef});
    }
  }
  return Poly::from_terms(std::move(out));
}

template <class CoeffFn>
Expr apply_derivation(const Expr& e, CoeffFn&& coeff) {
  Poly dn = apply_derivation(e.num(), coeff);
  if (e.is_polynomial()) return Expr(dn.scaled(1 / e.den().constant_value()));
  Poly dd = apply_derivation(e.den(), coeff);
  if (dd.is_zero()) return Expr::fraction(dn, e.den());
  return Expr::fraction(dn * e.den() - e.num() * dd, e.den() * e.den());
}

/// D_{z^b}: total derivative on the diffeomorphism jet bundle (acting on
/// target jets Z) and on vector-field jets (zeta), by index concatenation.
/// Submanifold jets are treated as constants.
inline Expr total_derivative(const JetSpace& js, const Expr& e, int b) {
  if (b < 0 || b >= js.m()) throw Error(ErrorKind::InvalidArgument, "total derivative slot out of range");
  return apply_derivation(e, [&](VarId v) -> Poly {
    const auto& jv = js.var(v);
    switch (jv.kind) {
      case JetKind::Source:
        return jv.base == b ? Poly(1) : Poly();
      case JetKind::Target:
        return Poly::variable(js.target(jv.base, concat(jv.index, b)));
      case JetKind::VectorField:
        return Poly::variable(js.zeta(jv.base, concat(jv.index, b)));
      case JetKind::Submanifold:
        return Poly();
    }
    return Poly();
  });
}

/// Coefficient of d/dv in the lifted total derivative with respect to x^j.
inline Poly lifted_coefficient(const JetSpace& js, VarId v, int j) {
  const int p = js.p(), q = js.q();
  const auto& jv = js.var(v);
  switch (jv.kind) {
    case JetKind::Source:
      if (jv.base < p) return jv.base == j ? Poly(1) : Poly();
      return Poly::variable(js.submanifold(jv.base - p, {j}));
    case JetKind::Submanifold:
      return Poly::variable(js.submanifold(jv.base, concat(jv.index, j)));
    case JetKind::Target:
    case JetKind::VectorField: {
      auto next = [&](int slot) {
        return jv.kind == JetKind::Target ? js.target(jv.base, concat(jv.index, slot))
                                          : js.zeta(jv.base, concat(jv.index, slot));
      };
      Poly r = Poly::variable(next(j));
      for (int al = 0; al < q; ++al)
        r += Poly::variable(js.submanifold(al, {j})) * Poly::variable(next(p + al));
      return r;
    }
  }
  return Poly();
}

/// Lifted total derivative with respect to the independent variable x^j:
/// D_{x^j} + u^a_j D_{u^a} + sum u^a_{jJ} d/du^a_J. Vector-field jets are
/// differentiated the same way as target jets.
inline Expr lifted_total_derivative(const JetSpace& js, const Expr& e, int j) {
  if (j < 0 || j >= js.p()) throw Error(ErrorKind::InvalidArgument, "independent slot out of range");
  return apply_derivation(e, [&](VarId v) { return lifted_coefficient(js, v, j); });
}

inline Poly lifted_total_derivative(const JetSpace& js, const Poly& e, int j) {
  if (j < 0 || j >= js.p()) throw Error(ErrorKind::InvalidArgument, "independent slot out of range");
  return apply_derivation(e, [&](VarId v) { return lifted_coefficient(js, v, j); });
}

/// Determinant by cofactor expansion; p is small.
inline Expr determinant(const std::vector<std::vector<Expr>>& a) {
  std::size_t n = a.size();
  if (n == 0) return Expr(1);
  if (n == 1) return a[0][0];
  if (n == 2) return a[0][0] * a[1][1] - a[0][1] * a[1][0];
  Expr det;
  for (std::size_t c = 0; c < n; ++c) {
    if (a[0][c].is_zero()) continue;
    std::vector<std::vector<Expr>> minor;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<Expr> row;
      for (std::size_t k = 0; k < n; ++k)
        if (k != c) row.push_back(a[r][k]);
      minor.push_back(std::move(row));
    }
    Expr term = a[0][c] * determinant(minor);
    det = (c % 2 == 0) ? det + term : det - term;
  }
  return det;
}

/// Total Jacobian jac[k][j] = lifted D_{x^k} X^j.
inline std::vector<std::vector<Expr>> total_jacobian(const JetSpace& js) {
  const int p = js.p();
  std::vector<std::vector<Expr>> jac(static_cast<std::size_t>(p), std::vector<Expr>(static_cast<std::size_t>(p)));
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j)
      jac[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] =
          lifted_total_derivative(js, Expr::variable(js.target(j, {})), k);
  return jac;
}

/// Symbolic inverse of the total Jacobian, w[j][k] = (jac^{-1})_{jk}, so that
/// D_{X^j} = sum_k w[j][k] D_{x^k}.
inline std::vector<std::vector<Expr>> inverse_total_jacobian(const JetSpace& js) {
  auto jac = total_jacobian(js);
  Expr det = determinant(jac);
  if (det.is_zero()) throw Error(ErrorKind::SingularJacobian, "total Jacobian determinant is identically zero");
  const std::size_t p = jac.size();
  std::vector<std::vector<Expr>> w(p, std::vector<Expr>(p));
  Expr inv_det = det.inverse();
  for (std::size_t r = 0; r < p; ++r) {
    for (std::size_t c = 0; c < p; ++c) {
      // cofactor of jac[c][r] gives (adj)_{rc}
      std::vector<std::vector<Expr>> minor;
      for (std::size_t i = 0; i < p; ++i) {
        if (i == c) continue;
        std::vector<Expr> row;
        for (std::size_t k = 0; k < p; ++k)
          if (k != r) row.push_back(jac[i][k]);
        minor.push_back(std::move(row));
      }
      Expr cof = determinant(minor);
      if ((r + c) % 2) cof = -cof;
      w[r][c] = cof * inv_det;
    }
  }
  return w;
}

/// Lifted invariant total derivative D_{X^j} e = sum_k W^k_j D_{x^k} e,
/// returned as a single rational expression.
inline Expr invariant_total_derivative(const JetSpace& js, const Expr& e, int j,
                                       const std::vector<std::vector<Expr>>& w) {
  if (j < 0 || j >= js.p()) throw Error(ErrorKind::InvalidArgument, "independent slot out of range");
  Expr sum;
  for (int k = 0; k < js.p(); ++k) {
    const Expr& coef = w[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
    if (coef.is_zero()) continue;
    sum += coef * lifted_total_derivative(js, e, k);
  }
  return sum;
}

inline Expr invariant_total_derivative(const JetSpace& js, const Expr& e, int j) {
  return invariant_total_derivative(js, e, j, inverse_total_jacobian(js));
}

/// Formal partial derivative checked against the registry.
inline Expr expr_diff(const JetSpace& js, const Expr& e, VarId v) {
  if (!js.contains(v)) throw Error(ErrorKind::UnknownVariable, "variable #" + std::to_string(v) + " is not registered");
  return e.diff(v);
}

}  // namespace jetfree
