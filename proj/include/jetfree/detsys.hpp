#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jetfree/linalg.hpp"
#include "jetfree/prolong.hpp"

namespace jetfree {

/// A Lie pseudogroup given by its determining system F(z, Z^(n*)) = 0
/// and/or its infinitesimal determining system L(z, zeta^(n*)) = 0.
struct PseudogroupSpec {
  std::string name;
  int base_order = 1;
  std::vector<Expr> determining;
  std::vector<Expr> infinitesimal;
  JetSpacePtr space;

  const SpaceSpec& coordinates() const { return space->spec(); }

  friend bool operator==(const PseudogroupSpec& a, const PseudogroupSpec& b) {
    return a.name == b.name && a.base_order == b.base_order && a.space->spec() == b.space->spec() &&
           a.determining == b.determining && a.infinitesimal == b.infinitesimal;
  }
};

/// Same pseudogroup over a registry with a larger order cap. Variable ids
/// are prefix stable, so the equations carry over unchanged.
inline PseudogroupSpec with_cap(const PseudogroupSpec& ps, int cap) {
  if (cap <= ps.space->cap()) return ps;
  PseudogroupSpec r = ps;
  r.space = JetSpace::make(ps.space->spec(), cap);
  return r;
}

/// Homogeneous linear equations in the zeta variables with coefficients in z.
struct LinearDeterminingSystem {
  JetSpacePtr space;
  int order = 0;
  std::vector<Expr> equations;
};

/// Basis of a space of vector-field jets at a base point; vectors are
/// aligned with zeta_vars(order).
struct FiberBasis {
  JetSpacePtr space;
  int order = 0;
  Vector base;
  std::vector<Vector> vectors;

  std::size_t dimension() const { return vectors.size(); }
  VectorFieldJet element(std::size_t i) const { return {space, order, base, vectors.at(i)}; }
};

namespace detail {

inline Expr normalize_equation(const Expr& e) {
  if (e.is_zero()) return e;
  Scalar lc = e.num().leading_coef();
  return lc == 1 ? e : e * Expr(1 / lc);
}

inline void push_unique(std::vector<Expr>& out, const Expr& e) {
  if (e.is_zero()) return;
  Expr n = normalize_equation(e);
  for (const auto& f : out)
    if (f == n) return;
  out.push_back(std::move(n));
}

inline int equation_order(const JetSpace& js, const Expr& e, JetKind kind) { return js.max_order(e, kind); }

/// Closure under the total derivatives D_{z^c} up to order n: every
/// equation of order r < n is differentiated until it reaches order n.
inline std::vector<Expr> total_closure(const JetSpace& js, const std::vector<Expr>& eqs, JetKind kind, int n) {
  js.check_cap(n);
  std::vector<Expr> out;
  for (const auto& e : eqs) push_unique(out, e);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int r = equation_order(js, out[i], kind);
    if (r >= n) continue;
    for (int c = 0; c < js.m(); ++c) {
      Expr d = total_derivative(js, out[i], c);
      push_unique(out, d);
    }
  }
  return out;
}

/// Substitution sending every target jet to its value on the identity jet.
inline std::map<VarId, Expr> identity_substitution(const JetSpace& js, int n) {
  std::map<VarId, Expr> sub;
  for (VarId v : js.target_vars(n)) {
    const auto& jv = js.var(v);
    if (jv.order() == 0)
      sub[v] = Expr::variable(js.source(jv.base));
    else if (jv.order() == 1)
      sub[v] = Expr(jv.index[0] == jv.base ? 1 : 0);
    else
      sub[v] = Expr(0);
  }
  return sub;
}

inline void check_homogeneous(const JetSpace& js, const Expr& e) {
  if (!e.den().variables().empty())
    for (VarId v : e.den().variables())
      if (js.var(v).kind == JetKind::VectorField) throw Error(ErrorKind::InvalidSpec, "infinitesimal equation has zeta in a denominator");
  for (const auto& t : e.num().terms()) {
    int deg = 0;
    for (const auto& f : t.mono.factors()) {
      auto kind = js.var(f.first).kind;
      if (kind == JetKind::VectorField)
        deg += static_cast<int>(f.second);
      else if (kind != JetKind::Source)
        throw Error(ErrorKind::MixedKinds, "infinitesimal equation involves a non-source coordinate '" + js.name(f.first) + "'");
    }
    if (deg != 1) throw Error(ErrorKind::InvalidSpec, "infinitesimal equation is not homogeneous linear in zeta");
  }
}

}  // namespace detail

/// Linearization of the determining equations at the identity jet:
/// d/dt F(id + t zeta) at t = 0. No equations means all diffeomorphisms.
inline LinearDeterminingSystem linearize(const PseudogroupSpec& ps) {
  if (ps.determining.empty()) return {ps.space, ps.base_order, {}};
  const JetSpace& js = *ps.space;
  int n = ps.base_order;
  for (const auto& f : ps.determining) n = std::max(n, js.max_order(f, JetKind::Target));
  auto id = detail::identity_substitution(js, n);
  LinearDeterminingSystem out{ps.space, ps.base_order, {}};
  for (const auto& f : ps.determining) {
    try {
      if (!substitute(f, id).is_zero())
        throw Error(ErrorKind::InvalidSpec, "the identity jet does not satisfy a determining equation");
      Expr lin;
      for (VarId v : f.variables()) {
        if (js.var(v).kind != JetKind::Target) continue;
        Expr c = substitute(f.diff(v), id);
        if (!c.is_zero()) lin += c * Expr::variable(js.zeta(js.var(v).base, js.var(v).index));
      }
      detail::push_unique(out.equations, lin);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::DivisionByZero)
        throw Error(ErrorKind::NonRationalDependence, "a denominator of a determining equation vanishes at the identity jet");
      throw;
    }
  }
  return out;
}

/// The declared infinitesimal system, or the linearization when absent.
inline LinearDeterminingSystem infinitesimal_system(const PseudogroupSpec& ps) {
  if (ps.infinitesimal.empty()) return linearize(ps);
  LinearDeterminingSystem out{ps.space, ps.base_order, {}};
  for (const auto& e : ps.infinitesimal) {
    detail::check_homogeneous(*ps.space, e);
    detail::push_unique(out.equations, e);
  }
  return out;
}

/// Closure of L under total derivatives up to order L.order + k.
inline LinearDeterminingSystem prolong_linear_system(const LinearDeterminingSystem& l, int k) {
  if (k < 0) throw Error(ErrorKind::InvalidArgument, "negative prolongation order");
  return {l.space, l.order + k, detail::total_closure(*l.space, l.equations, JetKind::VectorField, l.order + k)};
}

/// Closure of the determining system up to order n* + k.
inline std::vector<Expr> prolong_determining_system(const PseudogroupSpec& ps, int k) {
  if (k < 0) throw Error(ErrorKind::InvalidArgument, "negative prolongation order");
  return detail::total_closure(*ps.space, ps.determining, JetKind::Target, ps.base_order + k);
}

/// Coefficient matrix of a linear system at the base point z0; columns are
/// zeta_vars(n).
inline Matrix evaluate_linear_system(const LinearDeterminingSystem& l, const Vector& z0, int n) {
  const JetSpace& js = *l.space;
  Binder<Scalar> binder(js.size());
  for (int a = 0; a < js.m(); ++a) binder.bind(js.source(a), z0.at(static_cast<std::size_t>(a)));
  auto cols = js.zeta_vars(n);
  Matrix a;
  for (const auto& e : l.equations) {
    if (js.max_order(e, JetKind::VectorField) > n) continue;
    Vector row(cols.size());
    for (VarId v : e.variables()) {
      if (js.var(v).kind != JetKind::VectorField) continue;
      try {
        row[js.position(v)] = e.diff(v).eval_with(binder);
      } catch (const Error& err) {
        if (err.kind() == ErrorKind::DivisionByZero)
          throw Error(ErrorKind::CoefficientSingularity, "a coefficient of the linear determining system is singular at the base point");
        throw;
      }
    }
    a.push_back(std::move(row));
  }
  return a;
}

/// Basis of g^(n)|_z0. Below the order of L the fiber is the projection of
/// the fiber at that order.
inline FiberBasis fiber_basis(const LinearDeterminingSystem& l, int n, const Vector& z0) {
  const JetSpace& js = *l.space;
  if (static_cast<int>(z0.size()) != js.m()) throw Error(ErrorKind::InvalidArgument, "base point has the wrong dimension");
  if (n < l.order) {
    auto full = fiber_basis(l, l.order, z0);
    std::size_t keep = js.zeta_vars(n).size();
    std::vector<Vector> proj;
    for (const auto& v : full.vectors) proj.emplace_back(v.begin(), v.begin() + static_cast<long>(keep));
    return {l.space, n, z0, span_basis(proj)};
  }
  auto sys = prolong_linear_system(l, n - l.order);
  Matrix a = evaluate_linear_system(sys, z0, n);
  return {l.space, n, z0, null_space(std::move(a), js.zeta_vars(n).size())};
}

/// Coordinates (in terms of `fb`) spanning the elements with zero 0-jet.
inline std::vector<Vector> vanishing_coordinates(const FiberBasis& fb) {
  const std::size_t m = static_cast<std::size_t>(fb.space->m());
  Matrix e = zero_matrix(m, fb.dimension());
  for (std::size_t j = 0; j < fb.dimension(); ++j)
    for (std::size_t a = 0; a < m; ++a) e[a][j] = fb.vectors[j][a];
  return null_space(std::move(e), fb.dimension());
}

inline std::vector<Vector> combine(const FiberBasis& fb, const std::vector<Vector>& coords) {
  std::vector<Vector> out;
  for (const auto& c : coords) {
    Vector v(fb.space->zeta_vars(fb.order).size());
    for (std::size_t j = 0; j < c.size(); ++j)
      if (c[j] != 0)
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += c[j] * fb.vectors[j][i];
    out.push_back(std::move(v));
  }
  return out;
}

/// Basis of g^(n)_0|_z0: the elements of the fiber with vanishing 0-jet.
inline FiberBasis vanishing_fiber_basis(const LinearDeterminingSystem& l, int n, const Vector& z0) {
  auto fb = fiber_basis(l, n, z0);
  return {l.space, n, z0, span_basis(combine(fb, vanishing_coordinates(fb)))};
}

/// Projection of a jet of order n onto order k <= n.
inline Vector project(const JetSpace& js, const Vector& v, int k) {
  std::size_t keep = js.zeta_vars(k).size();
  return Vector(v.begin(), v.begin() + static_cast<long>(keep));
}

/// Rank of the evaluated system at z0 and at a nearby point; a jump hints
/// that the solution bundle is not regular there.
inline std::optional<std::string> regularity_warning(const LinearDeterminingSystem& l, int n, const Vector& z0, RationalSampler& rng) {
  auto sys = prolong_linear_system(l, std::max(0, n - l.order));
  Vector z1 = z0;
  for (auto& c : z1) c += rng.rational(10) / 1000;
  try {
    std::size_t r0 = rank(evaluate_linear_system(sys, z0, std::max(n, l.order)));
    std::size_t r1 = rank(evaluate_linear_system(sys, z1, std::max(n, l.order)));
    if (r0 != r1)
      return "rank of the linear determining system changes near the base point (" + std::to_string(r0) + " vs " +
             std::to_string(r1) + "): the solution set may not be a regular subbundle there";
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::CoefficientSingularity) throw;
    return std::string("coefficients are singular near the base point");
  }
  return std::nullopt;
}

struct ConsistencyReport {
  bool consistent = true;
  int points_checked = 0;
  std::vector<std::string> issues;
};

/// Compares the linearized determining system with the declared
/// infinitesimal system: equal fibers at random points, orders n*..n*+extra.
inline ConsistencyReport validate_consistency(const PseudogroupSpec& ps, int points, std::uint64_t seed, int extra = 2) {
  ConsistencyReport rep;
  if (ps.determining.empty() || ps.infinitesimal.empty()) return rep;
  auto lin = linearize(ps);
  auto inf = infinitesimal_system(ps);
  RationalSampler rng(seed);
  const int m = ps.space->m();
  int attempts = 0;
  while (rep.points_checked < points && attempts < points * 10) {
    ++attempts;
    Vector z0;
    for (int a = 0; a < m; ++a) z0.push_back(rng.rational());
    try {
      for (int n = ps.base_order; n <= ps.base_order + extra; ++n) {
        auto a = fiber_basis(lin, n, z0), b = fiber_basis(inf, n, z0);
        bool same = a.dimension() == b.dimension();
        for (const auto& v : a.vectors) same = same && in_span(b.vectors, v);
        if (!same) {
          rep.consistent = false;
          std::string at;
          for (const auto& c : z0) at += (at.empty() ? "" : ",") + to_string(c);
          rep.issues.push_back("order " + std::to_string(n) + " at (" + at + "): dimensions " +
                               std::to_string(a.dimension()) + " vs " + std::to_string(b.dimension()));
        }
      }
      ++rep.points_checked;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::CoefficientSingularity) throw;
    }
  }
  return rep;
}

}  // namespace jetfree
