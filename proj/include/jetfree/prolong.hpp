#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <vector>

#include "jetfree/jetspace.hpp"
#include "jetfree/linalg.hpp"

namespace jetfree {

/// Dense lookup table from VarId to a bound value, usable as an evaluation
/// lookup for Poly and Expr.
template <class T>
class Binder {
 public:
  explicit Binder(std::size_t size) : table_(size, nullptr) {}
  void bind(VarId v, const T& value) { table_.at(v) = &value; }
  const T* operator()(VarId v) const { return v < table_.size() ? table_[v] : nullptr; }

 private:
  std::vector<const T*> table_;
};

inline void check_same_space(const JetSpacePtr& a, const JetSpacePtr& b) {
  if (a != b && !(a->spec() == b->spec()))
    throw Error(ErrorKind::DomainMismatch, "objects live on different spaces");
}

/// n-jet of a local diffeomorphism of M at `source`: the values Z^a_B for
/// 0 <= |B| <= n, aligned with JetSpace::target_vars(n).
struct DiffeoJet {
  JetSpacePtr space;
  int order = 0;
  Vector source;
  Vector coeffs;

  Scalar coef(int a, const MultiIndex& b) const { return coeffs.at(space->position(space->target(a, b))); }
  Scalar& coef(int a, const MultiIndex& b) { return coeffs.at(space->position(space->target(a, b))); }

  Vector target() const { return Vector(coeffs.begin(), coeffs.begin() + space->m()); }

  Matrix first_order() const {
    const int m = space->m();
    Matrix a = zero_matrix(static_cast<std::size_t>(m), static_cast<std::size_t>(m));
    if (order < 1) return a;
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = coef(r, {c});
    return a;
  }

  static DiffeoJet identity(JetSpacePtr space, Vector source, int n) {
    space->check_cap(n);
    DiffeoJet g{space, n, source, Vector(space->target_vars(n).size())};
    const int m = space->m();
    for (int a = 0; a < m; ++a) {
      g.coef(a, {}) = source.at(static_cast<std::size_t>(a));
      if (n >= 1) g.coef(a, {a}) = 1;
    }
    return g;
  }

  bool is_identity() const { return *this == identity(space, source, order); }

  DiffeoJet truncated(int k) const {
    if (k > order) throw Error(ErrorKind::OrderMismatch, "cannot truncate to a higher order");
    DiffeoJet r = *this;
    r.order = k;
    r.coeffs.resize(space->target_vars(k).size());
    return r;
  }

  void bind(Binder<Scalar>& b) const {
    auto vars = space->target_vars(order);
    for (std::size_t i = 0; i < vars.size(); ++i) b.bind(vars[i], coeffs[i]);
  }

  friend bool operator==(const DiffeoJet& a, const DiffeoJet& b) {
    return a.order == b.order && a.space->spec() == b.space->spec() && a.source == b.source && a.coeffs == b.coeffs;
  }
};

/// Point z^(n) = (x, u^(n)) of J^n, values aligned with jet_coordinates(n).
struct SubmanifoldJetPoint {
  JetSpacePtr space;
  int order = 0;
  Vector values;

  Vector base() const { return Vector(values.begin(), values.begin() + space->m()); }
  const Scalar& value(VarId v) const { return values.at(space->position(v)); }
  Scalar& value(VarId v) { return values.at(space->position(v)); }

  SubmanifoldJetPoint truncated(int k) const {
    if (k > order) throw Error(ErrorKind::OrderMismatch, "cannot truncate to a higher order");
    SubmanifoldJetPoint r = *this;
    r.order = k;
    r.values.resize(space->jet_coordinates(k).size());
    return r;
  }

  void bind(Binder<Scalar>& b) const {
    auto vars = space->jet_coordinates(order);
    for (std::size_t i = 0; i < vars.size(); ++i) b.bind(vars[i], values[i]);
  }

  Bindings bindings() const {
    Bindings out;
    auto vars = space->jet_coordinates(order);
    for (std::size_t i = 0; i < vars.size(); ++i) out[vars[i]] = values[i];
    return out;
  }

  friend bool operator==(const SubmanifoldJetPoint& a, const SubmanifoldJetPoint& b) {
    return a.order == b.order && a.space->spec() == b.space->spec() && a.values == b.values;
  }
};

/// n-jet of a vector field at `base`: values of zeta^a_B aligned with
/// zeta_vars(n).
struct VectorFieldJet {
  JetSpacePtr space;
  int order = 0;
  Vector base;
  Vector coeffs;

  Scalar coef(int a, const MultiIndex& b) const { return coeffs.at(space->position(space->zeta(a, b))); }
  bool is_zero() const { return jetfree::is_zero(coeffs); }
};

/// Vector field v = v^a(z) d/dz^a with components over the source variables.
struct VectorField {
  std::vector<Expr> components;

  Expr xi(const JetSpace&, int i) const { return components.at(static_cast<std::size_t>(i)); }
  Expr phi(const JetSpace& js, int alpha) const { return components.at(static_cast<std::size_t>(js.p() + alpha)); }
};

/// Components of a prolonged vector field aligned with jet_coordinates(n).
struct ProlongedVF {
  JetSpacePtr space;
  int order = 0;
  std::vector<Expr> components;
};

namespace detail {

inline Scalar factorial(int k) {
  Scalar r(1);
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

/// Multiplicity-weighted factorial B! of a multi-index.
inline Scalar index_factorial(const MultiIndex& b) {
  Scalar r(1);
  std::size_t i = 0;
  while (i < b.size()) {
    std::size_t j = i;
    while (j < b.size() && b[j] == b[i]) ++j;
    r *= factorial(static_cast<int>(j - i));
    i = j;
  }
  return r;
}

inline MultiIndex drop_last(MultiIndex b) {
  b.pop_back();
  return b;
}

}  // namespace detail

/// Groupoid multiplication h . g, i.e. the jet of the composite map. The
/// composite is differentiated symbolically: the Taylor polynomial of h is
/// written in the order-0 target variables and D_B is applied to it, then
/// the target jets of g are substituted.
inline DiffeoJet jet_compose(const DiffeoJet& h, const DiffeoJet& g) {
  check_same_space(h.space, g.space);
  if (h.order != g.order) throw Error(ErrorKind::OrderMismatch, "composed jets have different orders");
  if (h.source != g.target()) throw Error(ErrorKind::BasePointMismatch, "source of the left factor is not the target of the right factor");
  const JetSpace& js = *g.space;
  const int m = js.m(), n = g.order;
  Binder<Scalar> binder(js.size());
  g.bind(binder);
  DiffeoJet out{g.space, n, g.source, Vector(g.coeffs.size())};
  std::vector<Poly> shifted;
  for (int c = 0; c < m; ++c)
    shifted.push_back(Poly::variable(js.target(c, {})) - Poly(h.source[static_cast<std::size_t>(c)]));
  for (int a = 0; a < m; ++a) {
    Poly taylor;
    for (int k = 0; k <= n; ++k) {
      for (const auto& b : mi_enumerate(m, k)) {
        Scalar c = h.coef(a, b);
        if (c == 0) continue;
        Poly term(c / detail::index_factorial(b));
        for (int slot : b) term = term * shifted[static_cast<std::size_t>(slot)];
        taylor += term;
      }
    }
    std::map<MultiIndex, Expr> derived{{MultiIndex{}, Expr(taylor)}};
    for (int k = 0; k <= n; ++k) {
      for (const auto& b : mi_enumerate(m, k)) {
        if (k > 0) derived[b] = total_derivative(js, derived.at(detail::drop_last(b)), b.back());
        out.coef(a, b) = derived.at(b).eval_with(binder);
      }
    }
  }
  return out;
}

/// Groupoid inverse: order 1 by matrix inversion, higher orders by solving
/// the compose-to-identity conditions, which are affine in the top order.
inline DiffeoJet jet_invert(const DiffeoJet& g) {
  const JetSpace& js = *g.space;
  const int m = js.m(), n = g.order;
  DiffeoJet h{g.space, n, g.target(), Vector(g.coeffs.size())};
  for (int a = 0; a < m; ++a) h.coef(a, {}) = g.source[static_cast<std::size_t>(a)];
  if (n == 0) return h;
  auto inv = inverse(g.first_order());
  if (!inv) throw Error(ErrorKind::SingularJet, "first-order block is not invertible");
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) h.coef(a, {b}) = (*inv)[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  for (int k = 2; k <= n; ++k) {
    auto top = js.target_vars_of_order(k);
    auto slice = [&](const DiffeoJet& hh) {
      DiffeoJet c = jet_compose(hh.truncated(k), g.truncated(k));
      Vector v;
      for (VarId t : top) v.push_back(c.coeffs[js.position(t)]);
      return v;
    };
    DiffeoJet base = h;
    Vector r0 = slice(base);
    Matrix a = zero_matrix(top.size(), top.size());
    for (std::size_t j = 0; j < top.size(); ++j) {
      DiffeoJet probe = base;
      probe.coeffs[js.position(top[j])] = 1;
      Vector c = slice(probe);
      for (std::size_t i = 0; i < top.size(); ++i) a[i][j] = c[i] - r0[i];
    }
    Vector rhs(top.size());
    for (std::size_t i = 0; i < top.size(); ++i) rhs[i] = -r0[i];
    auto sol = solve_linear(a, rhs, top.size());
    if (!sol.consistent || !sol.homogeneous.empty()) throw Error(ErrorKind::SingularJet, "top-order inversion system is singular");
    for (std::size_t j = 0; j < top.size(); ++j) h.coeffs[js.position(top[j])] = sol.particular[j];
  }
  return h;
}

/// Symbolic prolonged action: for every submanifold coordinate u^a_J the
/// transformed coordinate is N_J / det^e_J where det is the total Jacobian
/// determinant. Built lazily per order and shared through the space memo.
class ActionFormulas {
 public:
  struct Entry {
    Poly numerator;
    int exponent = 0;
  };

  void ensure(const JetSpace& js, int n) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!init_) {
      auto jac = total_jacobian(js);
      det_ = determinant(jac).num();
      const std::size_t p = jac.size();
      adj_.assign(p, std::vector<Poly>(p));
      for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c) {
          std::vector<std::vector<Expr>> minor;
          for (std::size_t i = 0; i < p; ++i) {
            if (i == c) continue;
            std::vector<Expr> row;
            for (std::size_t k = 0; k < p; ++k)
              if (k != r) row.push_back(jac[i][k]);
            minor.push_back(std::move(row));
          }
          Poly cof = determinant(minor).num();
          adj_[r][c] = (r + c) % 2 ? -cof : cof;
        }
      }
      for (int al = 0; al < js.q(); ++al) entries_[js.u(al)] = {Poly::variable(js.target(js.p() + al, {})), 0};
      init_ = true;
    }
    js.check_cap(n);
    if (n >= 2 && ddet_.empty())
      for (int k = 0; k < js.p(); ++k) ddet_.push_back(lifted_total_derivative(js, det_, k));
    for (int k = built_ + 1; k <= n; ++k) {
      for (int al = 0; al < js.q(); ++al) {
        for (const auto& jj : mi_enumerate(js.p(), k)) {
          const Entry& prev = entries_.at(js.submanifold(al, detail::drop_last(jj)));
          entries_[js.submanifold(al, jj)] = derive(js, prev, jj.back());
        }
      }
      built_ = k;
    }
  }

  const Poly& det() const { return det_; }
  Entry entry(VarId v) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.at(v);
  }

 private:
  // D_{X^j}(N / det^e) = sum_k adj[j][k] (D_k N det - e N D_k det) / det^(e+2),
  // with the e = 0 case needing one power of det only.
  Entry derive(const JetSpace& js, const Entry& prev, int j) const {
    Poly sum;
    for (int k = 0; k < js.p(); ++k) {
      const Poly& a = adj_[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
      if (a.is_zero()) continue;
      Poly d = lifted_total_derivative(js, prev.numerator, k);
      if (prev.exponent > 0) d = d * det_ - prev.numerator * ddet_[static_cast<std::size_t>(k)].scaled(Scalar(prev.exponent));
      sum += a * d;
    }
    return {sum, prev.exponent == 0 ? 1 : prev.exponent + 2};
  }

  mutable std::mutex mutex_;
  bool init_ = false;
  int built_ = 0;
  Poly det_;
  std::vector<std::vector<Poly>> adj_;
  std::vector<Poly> ddet_;
  std::map<VarId, Entry> entries_;
};

inline ActionFormulas& action_formulas(const JetSpace& js, int n) {
  auto& f = js.memo<ActionFormulas>();
  f.ensure(js, n);
  return f;
}

/// Prolonged action g^(n) . z^(n): X = Z^i, U^a = Z^{p+a} and U^a_J by
/// repeated invariant total differentiation.
inline SubmanifoldJetPoint act_on_jet(const DiffeoJet& g, const SubmanifoldJetPoint& z) {
  check_same_space(g.space, z.space);
  if (g.order != z.order) throw Error(ErrorKind::OrderMismatch, "group jet and submanifold jet have different orders");
  if (g.source != z.base()) throw Error(ErrorKind::BasePointMismatch, "group jet is not based at the point");
  const JetSpace& js = *z.space;
  const int n = z.order;
  SubmanifoldJetPoint out{z.space, n, Vector(z.values.size())};
  for (int a = 0; a < js.m(); ++a) out.values[static_cast<std::size_t>(a)] = g.coef(a, {});
  if (n == 0) return out;
  auto& f = action_formulas(js, n);
  Binder<Scalar> binder(js.size());
  z.bind(binder);
  g.bind(binder);
  Scalar det = f.det().eval_as<Scalar>(binder);
  if (det == 0) throw Error(ErrorKind::SingularTotalJacobian, "total Jacobian is singular at the point: the jet leaves the coordinate chart");
  std::vector<Scalar> powers{Scalar(1)};
  for (VarId v : js.jet_coordinates(n)) {
    if (js.var(v).kind != JetKind::Submanifold) continue;
    auto e = f.entry(v);
    while (static_cast<int>(powers.size()) <= e.exponent) powers.push_back(powers.back() * det);
    out.value(v) = e.numerator.eval_as<Scalar>(binder) / powers[static_cast<std::size_t>(e.exponent)];
  }
  return out;
}

/// Bracket [A, B]^i = A(B^i) - B(A^i) of vector fields with components
/// over the coordinates `coords`.
inline std::vector<Expr> lie_bracket(const std::vector<VarId>& coords, const std::vector<Expr>& a, const std::vector<Expr>& b) {
  if (a.size() != coords.size() || b.size() != coords.size())
    throw Error(ErrorKind::InvalidArgument, "vector fields do not match the coordinate list");
  std::vector<Expr> out(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    Expr c;
    for (std::size_t k = 0; k < coords.size(); ++k) {
      if (!a[k].is_zero()) c += a[k] * b[i].diff(coords[k]);
      if (!b[k].is_zero()) c -= b[k] * a[i].diff(coords[k]);
    }
    out[i] = c;
  }
  return out;
}

inline VectorField lie_bracket(const JetSpace& js, const VectorField& v, const VectorField& w) {
  std::vector<VarId> coords;
  for (int a = 0; a < js.m(); ++a) coords.push_back(js.source(a));
  return {lie_bracket(coords, v.components, w.components)};
}

/// Coefficients of the lift of v to D^(n): the d/dZ^a_B component is
/// D_B(v^a(Z)), aligned with target_vars(n).
inline std::vector<Expr> lift_vector_field(const JetSpace& js, const VectorField& v, int n) {
  js.check_cap(n);
  const int m = js.m();
  if (static_cast<int>(v.components.size()) != m) throw Error(ErrorKind::InvalidArgument, "vector field has the wrong number of components");
  std::map<VarId, Expr> to_target;
  for (int a = 0; a < m; ++a) to_target[js.source(a)] = Expr::variable(js.target(a, {}));
  std::vector<Expr> out(js.target_vars(n).size());
  for (int a = 0; a < m; ++a) {
    for (VarId w : v.components[static_cast<std::size_t>(a)].variables())
      if (js.var(w).kind != JetKind::Source) throw Error(ErrorKind::InvalidArgument, "vector field components must depend on z only");
    std::map<MultiIndex, Expr> derived{{MultiIndex{}, substitute(v.components[static_cast<std::size_t>(a)], to_target)}};
    for (int k = 0; k <= n; ++k) {
      for (const auto& b : mi_enumerate(m, k)) {
        if (k > 0) derived[b] = total_derivative(js, derived.at(detail::drop_last(b)), b.back());
        out[js.position(js.target(a, b))] = derived.at(b);
      }
    }
  }
  return out;
}

/// Characteristic Q^a = phi^a - xi^i u^a_i.
inline std::vector<Expr> characteristic(const JetSpace& js, const VectorField& v) {
  std::vector<Expr> q;
  for (int al = 0; al < js.q(); ++al) {
    Expr e = v.phi(js, al);
    for (int i = 0; i < js.p(); ++i) e -= v.xi(js, i) * Expr::variable(js.submanifold(al, {i}));
    q.push_back(e);
  }
  return q;
}

/// pr^(n) v by the prolongation formula phi_J = D_J Q + xi^i u_{iJ}.
inline ProlongedVF prolong_vector_field(const JetSpacePtr& space, const VectorField& v, int n) {
  const JetSpace& js = *space;
  js.check_cap(n + 1);
  if (static_cast<int>(v.components.size()) != js.m()) throw Error(ErrorKind::InvalidArgument, "vector field has the wrong number of components");
  ProlongedVF out{space, n, std::vector<Expr>(js.jet_coordinates(n).size())};
  for (int a = 0; a < js.m(); ++a) out.components[static_cast<std::size_t>(a)] = v.components[static_cast<std::size_t>(a)];
  auto q = characteristic(js, v);
  for (int al = 0; al < js.q(); ++al) {
    std::map<MultiIndex, Expr> dq{{MultiIndex{}, q[static_cast<std::size_t>(al)]}};
    for (int k = 1; k <= n; ++k) {
      for (const auto& jj : mi_enumerate(js.p(), k)) {
        dq[jj] = lifted_total_derivative(js, dq.at(detail::drop_last(jj)), jj.back());
        Expr c = dq[jj];
        for (int i = 0; i < js.p(); ++i) c += v.xi(js, i) * Expr::variable(js.submanifold(al, concat(jj, i)));
        out.components[js.position(js.submanifold(al, jj))] = c;
      }
    }
  }
  return out;
}

/// The general vector field with formal components zeta^a.
inline VectorField formal_vector_field(const JetSpace& js) {
  VectorField v;
  for (int a = 0; a < js.m(); ++a) v.components.push_back(Expr::variable(js.zeta(a, {})));
  return v;
}

/// Linear coefficient tables of the formal prolongation: for each jet
/// coordinate of J^n, the coefficient polynomial of every zeta variable.
class ProlongationFormulas {
 public:
  using Row = std::vector<std::pair<VarId, Poly>>;

  void ensure(const JetSpacePtr& space, int n) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (n <= built_) return;
    auto pr = prolong_vector_field(space, formal_vector_field(*space), n);
    rows_.clear();
    for (const auto& c : pr.components) rows_.push_back(split(*space, c));
    built_ = n;
  }

  std::vector<Row> rows(const JetSpace& js, int n) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return std::vector<Row>(rows_.begin(), rows_.begin() + static_cast<long>(js.jet_coordinates(n).size()));
  }

 private:
  static Row split(const JetSpace& js, const Expr& e) {
    if (!e.is_polynomial()) throw Error(ErrorKind::InvalidArgument, "formal prolongation is not polynomial");
    std::map<VarId, std::vector<Poly::Term>> by_zeta;
    Scalar inv = 1 / e.den().constant_value();
    for (const auto& t : e.num().terms()) {
      VarId z = 0;
      bool found = false;
      std::vector<Monomial::Factor> rest;
      for (const auto& f : t.mono.factors()) {
        if (js.var(f.first).kind == JetKind::VectorField) {
          if (found || f.second != 1) throw Error(ErrorKind::InvalidArgument, "prolongation is not linear in zeta");
          z = f.first;
          found = true;
        } else {
          rest.push_back(f);
        }
      }
      if (!found) throw Error(ErrorKind::InvalidArgument, "prolongation has a zeta-free term");
      by_zeta[z].push_back({Monomial(std::move(rest)), t.coef * inv});
    }
    Row row;
    for (auto& [z, terms] : by_zeta) row.emplace_back(z, Poly::from_terms(std::move(terms)));
    return row;
  }

  mutable std::mutex mutex_;
  int built_ = -1;
  std::vector<Row> rows_;
};

/// The linear map from zeta-jets of order n at the base point of z to
/// T_z J^n: rows jet_coordinates(n), columns zeta_vars(n).
inline Matrix prolong_at_point(const SubmanifoldJetPoint& z) {
  const JetSpace& js = *z.space;
  const int n = z.order;
  auto& f = js.memo<ProlongationFormulas>();
  f.ensure(z.space, n);
  auto rows = f.rows(js, n);
  Binder<Scalar> binder(js.size());
  z.bind(binder);
  Matrix a = zero_matrix(rows.size(), js.zeta_vars(n).size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (const auto& [zv, coef] : rows[r]) a[r][js.position(zv)] = coef.eval_as<Scalar>(binder);
  return a;
}

/// Applies prolong_at_point to a single vector-field jet.
inline Vector prolong_at_point(const SubmanifoldJetPoint& z, const VectorFieldJet& v) {
  if (v.order != z.order) throw Error(ErrorKind::OrderMismatch, "vector-field jet and point have different orders");
  if (v.base != z.base()) throw Error(ErrorKind::BasePointMismatch, "vector-field jet is not based at the point");
  return mat_vec(prolong_at_point(z), v.coeffs);
}

/// Vector-field jet of a concrete field at a base point.
inline VectorFieldJet jet_of_vector_field(const JetSpacePtr& space, const VectorField& v, const Vector& base, int n) {
  const JetSpace& js = *space;
  js.check_cap(n);
  Bindings at;
  for (int a = 0; a < js.m(); ++a) at[js.source(a)] = base.at(static_cast<std::size_t>(a));
  VectorFieldJet out{space, n, base, Vector(js.zeta_vars(n).size())};
  for (int a = 0; a < js.m(); ++a) {
    std::map<MultiIndex, Expr> d{{MultiIndex{}, v.components.at(static_cast<std::size_t>(a))}};
    for (int k = 0; k <= n; ++k) {
      for (const auto& b : mi_enumerate(js.m(), k)) {
        if (k > 0) d[b] = d.at(detail::drop_last(b)).diff(js.source(b.back()));
        out.coeffs[js.position(js.zeta(a, b))] = d.at(b).eval(at);
      }
    }
  }
  return out;
}

/// n-jet at z0 of the map z -> (phi^a(z)).
inline DiffeoJet jet_of_map(const JetSpacePtr& space, const std::vector<Expr>& phi, const Vector& z0, int n) {
  const JetSpace& js = *space;
  js.check_cap(n);
  Bindings at;
  for (int a = 0; a < js.m(); ++a) at[js.source(a)] = z0.at(static_cast<std::size_t>(a));
  DiffeoJet g{space, n, z0, Vector(js.target_vars(n).size())};
  for (int a = 0; a < js.m(); ++a) {
    std::map<MultiIndex, Expr> d{{MultiIndex{}, phi.at(static_cast<std::size_t>(a))}};
    for (int k = 0; k <= n; ++k) {
      for (const auto& b : mi_enumerate(js.m(), k)) {
        if (k > 0) d[b] = d.at(detail::drop_last(b)).diff(js.source(b.back()));
        g.coef(a, b) = d.at(b).eval(at);
      }
    }
  }
  return g;
}

/// n-jet at x0 of the submanifold u^a = s^a(x); s depends on the x's only.
inline SubmanifoldJetPoint jet_of_graph(const JetSpacePtr& space, const std::vector<Expr>& s, const Vector& x0, int n) {
  const JetSpace& js = *space;
  js.check_cap(n);
  Bindings at;
  for (int i = 0; i < js.p(); ++i) at[js.x(i)] = x0.at(static_cast<std::size_t>(i));
  SubmanifoldJetPoint z{space, n, Vector(js.jet_coordinates(n).size())};
  for (int i = 0; i < js.p(); ++i) z.value(js.x(i)) = x0[static_cast<std::size_t>(i)];
  for (int al = 0; al < js.q(); ++al) {
    std::map<MultiIndex, Expr> d{{MultiIndex{}, s.at(static_cast<std::size_t>(al))}};
    for (int k = 0; k <= n; ++k) {
      for (const auto& jj : mi_enumerate(js.p(), k)) {
        if (k > 0) d[jj] = d.at(detail::drop_last(jj)).diff(js.x(jj.back()));
        z.value(js.submanifold(al, jj)) = d.at(jj).eval(at);
      }
    }
  }
  return z;
}

/// Random diffeomorphism jet with bounded rational coefficients and an
/// invertible first-order block.
inline DiffeoJet sample_diffeo_jet(const JetSpacePtr& space, const Vector& source, int n, RationalSampler& rng,
                                   std::int64_t bound = 10) {
  for (;;) {
    DiffeoJet g{space, n, source, Vector(space->target_vars(n).size())};
    for (auto& c : g.coeffs) c = rng.rational(bound);
    if (n == 0 || inverse(g.first_order())) return g;
  }
}

/// Float-mode diffeomorphism jet produced by the flow integrator.
struct FloatDiffeoJet {
  JetSpacePtr space;
  int order = 0;
  Vector source;
  std::vector<double> coeffs;
};

inline FloatDiffeoJet to_float(const DiffeoJet& g) {
  FloatDiffeoJet f{g.space, g.order, g.source, {}};
  for (const auto& c : g.coeffs) f.coeffs.push_back(c.get_d());
  return f;
}

/// Integrates dZ/dt = lift(v)(Z) from g0 with classical RK4.
inline FloatDiffeoJet flow_jet(const VectorField& v, double t, const DiffeoJet& g0, int steps = 0) {
  const JetSpace& js = *g0.space;
  auto lift = lift_vector_field(js, v, g0.order);
  auto vars = js.target_vars(g0.order);
  FloatDiffeoJet cur = to_float(g0);
  if (t == 0) return cur;
  if (steps <= 0) steps = std::max(1, static_cast<int>(std::ceil(std::fabs(t) / 1e-2)));
  const double h = t / steps;
  const std::size_t dim = vars.size();
  auto field = [&](const std::vector<double>& y) {
    Binder<double> b(js.size());
    for (std::size_t i = 0; i < dim; ++i) b.bind(vars[i], y[i]);
    std::vector<double> out(dim);
    for (std::size_t i = 0; i < dim; ++i) out[i] = lift[i].eval_double(b);
    return out;
  };
  auto axpy = [&](const std::vector<double>& y, const std::vector<double>& k, double s) {
    std::vector<double> r(dim);
    for (std::size_t i = 0; i < dim; ++i) r[i] = y[i] + s * k[i];
    return r;
  };
  for (int s = 0; s < steps; ++s) {
    auto& y = cur.coeffs;
    auto k1 = field(y);
    auto k2 = field(axpy(y, k1, h / 2));
    auto k3 = field(axpy(y, k2, h / 2));
    auto k4 = field(axpy(y, k3, h));
    for (std::size_t i = 0; i < dim; ++i) {
      y[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
      if (!std::isfinite(y[i])) throw Error(ErrorKind::StepFailure, "flow integration produced a non-finite value");
    }
  }
  return cur;
}

/// Float evaluation of the prolonged action; returns values aligned with
/// jet_coordinates(n).
inline std::vector<double> act_on_jet(const FloatDiffeoJet& g, const SubmanifoldJetPoint& z) {
  const JetSpace& js = *z.space;
  if (g.order != z.order) throw Error(ErrorKind::OrderMismatch, "group jet and submanifold jet have different orders");
  if (g.source != z.base()) throw Error(ErrorKind::BasePointMismatch, "group jet is not based at the point");
  const int n = z.order;
  std::vector<double> zd;
  for (const auto& v : z.values) zd.push_back(v.get_d());
  Binder<double> b(js.size());
  auto coords = js.jet_coordinates(n);
  for (std::size_t i = 0; i < coords.size(); ++i) b.bind(coords[i], zd[i]);
  auto tv = js.target_vars(n);
  for (std::size_t i = 0; i < tv.size(); ++i) b.bind(tv[i], g.coeffs[i]);
  std::vector<double> out(coords.size());
  for (int a = 0; a < js.m(); ++a) out[static_cast<std::size_t>(a)] = g.coeffs[static_cast<std::size_t>(a)];
  if (n == 0) return out;
  auto& f = action_formulas(js, n);
  double det = f.det().eval_as<double>(b);
  if (det == 0 || !std::isfinite(det)) throw Error(ErrorKind::SingularTotalJacobian, "total Jacobian is singular at the point");
  for (std::size_t i = static_cast<std::size_t>(js.m()); i < coords.size(); ++i) {
    auto e = f.entry(coords[i]);
    out[i] = e.numerator.eval_as<double>(b) / std::pow(det, e.exponent);
  }
  return out;
}

}  // namespace jetfree
