#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "jetfree/cascade.hpp"
#include "jetfree/detsys.hpp"
#include "jetfree/print.hpp"

namespace jetfree {

/// pr at a point restricted to the fiber g^(n)|_z: rows are the jet
/// coordinates of J^n, columns the fiber basis elements.
struct ProlongationMatrix {
  int order = 0;
  SubmanifoldJetPoint point;
  std::vector<VarId> rows;
  FiberBasis fiber;
  Matrix entries;

  std::size_t rank() const { return jetfree::rank(entries); }
};

enum class Freeness { LocallyFree, NotLocallyFree };

inline std::string_view to_string(Freeness f) { return f == Freeness::LocallyFree ? "LOCALLY_FREE" : "NOT_LOCALLY_FREE"; }

struct FreenessVerdict {
  int order = 0;
  SubmanifoldJetPoint point;
  std::size_t fiber_dimension = 0;
  std::size_t kernel_dimension = 0;
  std::vector<VectorFieldJet> kernel;
  std::size_t orbit_dimension = 0;
  Freeness verdict = Freeness::LocallyFree;

  bool locally_free() const { return verdict == Freeness::LocallyFree; }
};

namespace detail {

inline void check_point(const PseudogroupSpec& ps, int n, const SubmanifoldJetPoint& z) {
  check_same_space(ps.space, z.space);
  if (n < 0) throw Error(ErrorKind::InvalidArgument, "negative order");
  if (z.order != n)
    throw Error(ErrorKind::OrderMismatch, "point has order " + std::to_string(z.order) + " but order " + std::to_string(n) + " was requested");
  ps.space->check_cap(n);
}

inline Vector top_block(const Vector& v, std::size_t from) { return Vector(v.begin() + static_cast<long>(from), v.end()); }

}  // namespace detail

inline ProlongationMatrix prolongation_matrix(const LinearDeterminingSystem& l, const SubmanifoldJetPoint& z) {
  const int n = z.order;
  auto fb = fiber_basis(l, n, z.base());
  ProlongationMatrix pm{n, z, z.space->jet_coordinates(n), fb, {}};
  pm.entries = mat_cols(prolong_at_point(z), fb.vectors);
  if (fb.vectors.empty()) pm.entries = zero_matrix(pm.rows.size(), 0);
  return pm;
}

inline ProlongationMatrix prolongation_matrix(const PseudogroupSpec& ps, int n, const SubmanifoldJetPoint& z) {
  detail::check_point(ps, n, z);
  return prolongation_matrix(infinitesimal_system(ps), z);
}

inline FreenessVerdict local_freeness(const LinearDeterminingSystem& l, const SubmanifoldJetPoint& z) {
  auto pm = prolongation_matrix(l, z);
  FreenessVerdict v;
  v.order = z.order;
  v.point = z;
  v.fiber_dimension = pm.fiber.dimension();
  for (auto& c : combine(pm.fiber, null_space(pm.entries, pm.fiber.dimension())))
    v.kernel.push_back({z.space, z.order, z.base(), std::move(c)});
  v.kernel_dimension = v.kernel.size();
  v.orbit_dimension = v.fiber_dimension - v.kernel_dimension;
  v.verdict = v.kernel.empty() ? Freeness::LocallyFree : Freeness::NotLocallyFree;
  return v;
}

inline FreenessVerdict local_freeness(const PseudogroupSpec& ps, int n, const SubmanifoldJetPoint& z) {
  detail::check_point(ps, n, z);
  return local_freeness(infinitesimal_system(ps), z);
}

/// Kernel of pr restricted to the vector-field jets vanishing at the base.
inline FiberBasis isotropy_algebra(const PseudogroupSpec& ps, int n, const SubmanifoldJetPoint& z) {
  detail::check_point(ps, n, z);
  auto vb = vanishing_fiber_basis(infinitesimal_system(ps), n, z.base());
  Matrix a = mat_cols(prolong_at_point(z), vb.vectors);
  auto coords = vb.vectors.empty() ? std::vector<Vector>{} : null_space(std::move(a), vb.dimension());
  return {ps.space, n, z.base(), span_basis(combine(vb, coords))};
}

/// Lift of z to order k whose new coordinates are drawn from rng.
inline SubmanifoldJetPoint random_lift(const SubmanifoldJetPoint& z, int k, RationalSampler& rng, std::int64_t bound = 10) {
  if (k < z.order) throw Error(ErrorKind::OrderMismatch, "cannot lift to a lower order");
  SubmanifoldJetPoint r = z;
  r.order = k;
  std::size_t total = z.space->jet_coordinates(k).size();
  while (r.values.size() < total) r.values.push_back(rng.rational(bound));
  return r;
}

struct PersistenceFailure {
  int order = 0;
  SubmanifoldJetPoint lift;
  VectorFieldJet kernel_element;
};

struct PersistenceOrder {
  int order = 0;
  std::size_t fiber_dimension = 0;
  int checked = 0;
};

struct PersistenceReport {
  int order = 0;
  int through = 0;
  int samples = 0;
  std::uint64_t seed = 0;
  SubmanifoldJetPoint base;
  FreenessVerdict base_verdict;
  std::vector<PersistenceOrder> orders;
  std::vector<PersistenceFailure> failures;

  bool passed() const { return failures.empty(); }
};

struct SweepOptions {
  std::int64_t bound = 10;
  unsigned threads = 0;  // 0: hardware concurrency
};

namespace detail {

template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
        next = count;
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Checks local freeness at `samples` random lifts of z to every order
/// n+1..through. Stops at the first order that produces a counterexample.
inline PersistenceReport persistence_sweep(const PseudogroupSpec& ps, int n, const SubmanifoldJetPoint& z, int through,
                                           int samples, std::uint64_t seed, SweepOptions opt = {}) {
  detail::check_point(ps, n, z);
  if (through < n) throw Error(ErrorKind::InvalidArgument, "sweep must end at or above the base order");
  ps.space->check_cap(through);
  auto l = infinitesimal_system(ps);
  PersistenceReport rep;
  rep.order = n;
  rep.through = through;
  rep.samples = samples;
  rep.seed = seed;
  rep.base = z;
  rep.base_verdict = local_freeness(l, z);
  if (!rep.base_verdict.locally_free())
    throw Error(ErrorKind::NotFreeAtBase, "the pseudogroup does not act locally freely at the base point (kernel dimension " +
                                              std::to_string(rep.base_verdict.kernel_dimension) + ")");
  RationalSampler rng(seed);
  const Vector z0 = z.base();
  for (int k = n + 1; k <= through; ++k) {
    auto fb = fiber_basis(l, k, z0);
    std::vector<SubmanifoldJetPoint> lifts;
    for (int s = 0; s < samples; ++s) lifts.push_back(random_lift(z, k, rng, opt.bound));
    std::vector<std::optional<Vector>> kernels(lifts.size());
    prolong_at_point(lifts.empty() ? z : lifts.front());
    detail::parallel_for(lifts.size(), opt.threads, [&](std::size_t i) {
      Matrix a = mat_cols(prolong_at_point(lifts[i]), fb.vectors);
      if (fb.vectors.empty()) return;
      auto ker = null_space(std::move(a), fb.dimension());
      if (!ker.empty()) kernels[i] = combine(fb, {ker.front()}).front();
    });
    rep.orders.push_back({k, fb.dimension(), samples});
    for (std::size_t i = 0; i < lifts.size(); ++i)
      if (kernels[i]) rep.failures.push_back({k, lifts[i], {ps.space, k, z0, *kernels[i]}});
    if (!rep.failures.empty()) break;
  }
  return rep;
}

/// The frozen operator d_i = D_{x^i} + u^a_{o,i} D_{u^a}, with the first
/// order coordinates read from the point z.
inline Expr frozen_total_derivative(const Expr& e, int i, const SubmanifoldJetPoint& z) {
  const JetSpace& js = *z.space;
  if (i < 0 || i >= js.p()) throw Error(ErrorKind::InvalidArgument, "independent slot out of range");
  if (z.order < 1) throw Error(ErrorKind::OrderMismatch, "frozen derivatives need a point of order at least 1");
  Expr r = total_derivative(js, e, i);
  for (int al = 0; al < js.q(); ++al) {
    const Scalar& c = z.value(js.submanifold(al, {i}));
    if (c != 0) r += Expr(c) * total_derivative(js, e, js.p() + al);
  }
  return r;
}

namespace detail {

/// d_J (W^{p+a} - u^a_{o,k} W^k) for every a and every J of length
/// z.order, where W^b is the order-0 variable produced by `base`.
template <class BaseVar>
std::vector<Expr> frozen_forms(const SubmanifoldJetPoint& z, BaseVar&& base) {
  const JetSpace& js = *z.space;
  std::vector<Expr> out;
  for (int al = 0; al < js.q(); ++al) {
    Expr e = Expr::variable(base(js.p() + al));
    for (int k = 0; k < js.p(); ++k) e -= Expr(z.value(js.submanifold(al, {k}))) * Expr::variable(base(k));
    for (const auto& jj : mi_enumerate(js.p(), z.order)) {
      Expr f = e;
      for (int i : jj) f = frozen_total_derivative(f, i, z);
      out.push_back(std::move(f));
    }
  }
  return out;
}

/// Row of coefficients of a linear form over `cols`.
inline Vector linear_row(const Expr& e, const std::vector<VarId>& cols) {
  Vector row(cols.size());
  for (const auto& t : e.num().terms()) {
    if (t.mono.degree() != 1) throw Error(ErrorKind::PreconditionViolation, "expected a homogeneous linear form");
    VarId v = t.mono.factors()[0].first;
    std::size_t pos = 0;
    for (; pos < cols.size() && cols[pos] != v; ++pos) {}
    if (pos == cols.size()) throw Error(ErrorKind::PreconditionViolation, "linear form involves an unexpected variable");
    row[pos] = t.coef / e.den().constant_value();
  }
  return row;
}

}  // namespace detail

/// Vanishing conditions for the order-(n+1) components of pr v, for v with
/// zero n-jet, written in the top-order zeta coordinates.
inline std::vector<Expr> ker_pr_equations(const SubmanifoldJetPoint& z) {
  const JetSpace& js = *z.space;
  return detail::frozen_forms(z, [&](int b) { return js.zeta(b, {}); });
}

/// Linear system for the top coordinates of order-(n+1) vector-field jets
/// with zero n-jet that satisfy the prolonged determining equations and lie
/// in ker pr at z^(n+1).
struct TopOrderSystem {
  int order = 0;
  std::vector<VarId> unknowns;
  Matrix determining;
  Matrix stabilizing;
  std::vector<Vector> null_basis;

  std::size_t nullity() const { return null_basis.size(); }
  Matrix stacked() const {
    Matrix a = determining;
    a.insert(a.end(), stabilizing.begin(), stabilizing.end());
    return a;
  }
};

namespace detail {

inline void check_theorem_order(const PseudogroupSpec& ps, int n) {
  if (n < ps.base_order)
    throw Error(ErrorKind::PreconditionViolation, "order " + std::to_string(n) + " is below the pseudogroup order " +
                                                      std::to_string(ps.base_order));
}

inline std::vector<Vector> solve_top(const TopOrderSystem& s) { return null_space(s.stacked(), s.unknowns.size()); }

}  // namespace detail

inline TopOrderSystem combined_kernel_system(const PseudogroupSpec& ps, int n, const SubmanifoldJetPoint& z) {
  detail::check_point(ps, n + 1, z);
  detail::check_theorem_order(ps, n);
  const JetSpace& js = *ps.space;
  auto l = infinitesimal_system(ps);
  TopOrderSystem s;
  s.order = n + 1;
  s.unknowns = js.zeta_vars_of_order(n + 1);
  const std::size_t low = js.zeta_vars(n).size();
  for (const auto& row : evaluate_linear_system(prolong_linear_system(l, n + 1 - l.order), z.base(), n + 1)) {
    Vector top = detail::top_block(row, low);
    if (!is_zero(top)) s.determining.push_back(std::move(top));
  }
  for (const auto& e : ker_pr_equations(z)) s.stabilizing.push_back(detail::linear_row(e, s.unknowns));
  s.null_basis = detail::solve_top(s);
  return s;
}

/// Order-(n+1) jets with zero n-jet in g^(n+1)|_z0 and in ker pr at z.
inline std::vector<VectorFieldJet> admissible_kernel_elements(const PseudogroupSpec& ps, int n, const SubmanifoldJetPoint& z) {
  auto s = combined_kernel_system(ps, n, z);
  const std::size_t low = ps.space->zeta_vars(n).size();
  std::vector<VectorFieldJet> out;
  for (const auto& t : s.null_basis) {
    Vector c(low);
    c.insert(c.end(), t.begin(), t.end());
    out.push_back({ps.space, n + 1, z.base(), std::move(c)});
  }
  return out;
}

struct Witness {
  std::string label;
  VectorFieldJet jet;
  bool in_fiber = false;
  bool in_kernel = false;
};

struct WitnessReport {
  int order = 0;
  bool v_zero = true;
  bool free_at_projection = false;
  std::vector<Witness> witnesses;

  bool memberships_hold() const {
    return std::all_of(witnesses.begin(), witnesses.end(), [](const Witness& w) { return w.in_fiber && w.in_kernel; });
  }
  bool witnesses_zero() const {
    return std::all_of(witnesses.begin(), witnesses.end(), [](const Witness& w) { return w.jet.is_zero(); });
  }
  /// At a locally free projection every witness, and v itself, must vanish.
  bool conclusion_holds() const { return memberships_hold() && (!free_at_projection || (witnesses_zero() && v_zero)); }
};

/// Builds the witness jets w_i and w^_e of an admissible v and checks that
/// each lies in g^(n)|_z0 and in ker pr at the projection of z to order n.
inline WitnessReport witness_check(const PseudogroupSpec& ps, int n, const SubmanifoldJetPoint& z, const VectorFieldJet& v) {
  detail::check_point(ps, n + 1, z);
  detail::check_theorem_order(ps, n);
  const JetSpace& js = *ps.space;
  if (v.order != n + 1) throw Error(ErrorKind::OrderMismatch, "vector-field jet must have order n+1");
  if (v.base != z.base()) throw Error(ErrorKind::BasePointMismatch, "vector-field jet is not based at the point");
  const std::size_t low = js.zeta_vars(n).size();
  for (std::size_t i = 0; i < low; ++i)
    if (v.coeffs[i] != 0)
      throw Error(ErrorKind::PreconditionViolation, "the n-jet of v does not vanish: " + js.name(js.zeta_vars(n)[i]) + " = " + to_string(v.coeffs[i]));

  auto l = infinitesimal_system(ps);
  auto sys = prolong_linear_system(l, n + 1 - l.order);
  Binder<Scalar> binder(js.size());
  Vector z0 = z.base();
  for (int a = 0; a < js.m(); ++a) binder.bind(js.source(a), z0[static_cast<std::size_t>(a)]);
  auto zv = js.zeta_vars(n + 1);
  for (std::size_t i = 0; i < zv.size(); ++i) binder.bind(zv[i], v.coeffs[i]);
  for (const auto& e : sys.equations)
    if (e.eval_with(binder) != 0)
      throw Error(ErrorKind::PreconditionViolation, "v violates the determining equation " + format_expr(js, e) + " = 0");
  auto pr = prolong_at_point(z, v);
  auto rows = js.jet_coordinates(n + 1);
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (pr[r] != 0) throw Error(ErrorKind::PreconditionViolation, "v is not in ker pr: component " + js.name(rows[r]) + " = " + to_string(pr[r]));

  WitnessReport rep;
  rep.order = n;
  rep.v_zero = v.is_zero();
  auto zn = z.truncated(n);
  rep.free_at_projection = local_freeness(l, zn).locally_free();
  auto fb = fiber_basis(l, n, z0);
  Matrix prn = prolong_at_point(zn);
  auto top = js.zeta_vars_of_order(n);
  auto make = [&](const std::string& label, auto&& coeff) {
    VectorFieldJet w{ps.space, n, z0, Vector(low)};
    for (VarId t : top) {
      const auto& tv = js.var(t);
      w.coeffs[js.position(t)] = coeff(tv.base, tv.index);
    }
    Witness out{label, w, in_span(fb.vectors, w.coeffs), is_zero(mat_vec(prn, w.coeffs))};
    rep.witnesses.push_back(std::move(out));
  };
  for (int i = 0; i < js.p(); ++i)
    make("w_" + js.slot_name(i), [&](int b, const MultiIndex& c) {
      Scalar s = v.coef(b, concat(c, i));
      for (int al = 0; al < js.q(); ++al) s += z.value(js.submanifold(al, {i})) * v.coef(b, concat(c, js.p() + al));
      return s;
    });
  for (int e = 0; e < js.m(); ++e)
    make("w^_" + js.slot_name(e), [&](int b, const MultiIndex& c) { return v.coef(b, concat(c, e)); });
  return rep;
}

/// Linear system for the top coordinates Z^a_B, |B| = n+1, of an isotropy
/// jet at z^(n+1) that agrees with the identity to order n: the top-order
/// linearization of the prolonged determining equations at the identity
/// together with the stabilization conditions.
inline TopOrderSystem top_order_stabilizer(const PseudogroupSpec& ps, int n, const SubmanifoldJetPoint& z) {
  detail::check_point(ps, n + 1, z);
  detail::check_theorem_order(ps, n);
  const JetSpace& js = *ps.space;
  TopOrderSystem s;
  s.order = n + 1;
  s.unknowns = js.target_vars_of_order(n + 1);
  Vector z0 = z.base();
  auto id = DiffeoJet::identity(ps.space, z0, n + 1);
  Binder<Scalar> binder(js.size());
  for (int a = 0; a < js.m(); ++a) binder.bind(js.source(a), z0[static_cast<std::size_t>(a)]);
  id.bind(binder);
  for (const auto& f : prolong_determining_system(ps, n + 1 - ps.base_order)) {
    if (js.max_order(f, JetKind::Target) != n + 1) continue;
    Vector row(s.unknowns.size());
    for (std::size_t k = 0; k < s.unknowns.size(); ++k)
      if (f.contains(s.unknowns[k])) row[k] = f.diff(s.unknowns[k]).eval_with(binder);
    if (!is_zero(row)) s.determining.push_back(std::move(row));
  }
  for (const auto& e : detail::frozen_forms(z, [&](int b) { return js.target(b, {}); }))
    s.stabilizing.push_back(detail::linear_row(e, s.unknowns));
  s.null_basis = detail::solve_top(s);
  return s;
}

enum class IsotropyStatus { Trivial, Nontrivial, Undecided };

inline std::string_view to_string(IsotropyStatus s) {
  switch (s) {
    case IsotropyStatus::Trivial: return "TRIVIAL";
    case IsotropyStatus::Nontrivial: return "NONTRIVIAL";
    case IsotropyStatus::Undecided: return "UNDECIDED";
  }
  return "UNDECIDED";
}

struct IsotropyStage {
  int order = 0;
  std::vector<std::pair<VarId, std::optional<Scalar>>> coordinates;
};

struct IsotropyReport {
  int order = 0;
  SubmanifoldJetPoint point;
  IsotropyStatus status = IsotropyStatus::Undecided;
  std::vector<IsotropyStage> stages;
  std::optional<DiffeoJet> witness;
  std::string note;
};

namespace detail {

inline Binder<Scalar> source_binder(const JetSpace& js, const Vector& z0) {
  Binder<Scalar> b(js.size());
  for (int a = 0; a < js.m(); ++a) b.bind(js.source(a), z0.at(static_cast<std::size_t>(a)));
  return b;
}

/// Determining equations closed to order N, with z bound to z0, as
/// polynomials in the target jets.
inline std::vector<Poly> determining_polys(const PseudogroupSpec& ps, int n, const Vector& z0) {
  const JetSpace& js = *ps.space;
  auto b = source_binder(js, z0);
  std::vector<Poly> out;
  for (const auto& f : prolong_determining_system(ps, std::max(0, n - ps.base_order))) {
    Poly p = f.partial_eval_with(b).num();
    if (!p.is_zero()) out.push_back(std::move(p));
  }
  return out;
}

/// Polynomial form of "coordinate v of g . z equals c": the order-0
/// coordinates read Z^a = c, the others N_J - c det^e_J = 0.
inline Poly normalization_poly(const SubmanifoldJetPoint& z, VarId v, const Scalar& c) {
  const JetSpace& js = *z.space;
  const auto& jv = js.var(v);
  if (jv.kind == JetKind::Source) return Poly::variable(js.target(jv.base, {})) - Poly(c);
  if (jv.kind != JetKind::Submanifold) throw Error(ErrorKind::InvalidArgument, "'" + jv.name + "' is not a jet coordinate");
  auto& f = action_formulas(js, jv.order());
  Binder<Scalar> b(js.size());
  z.bind(b);
  auto e = f.entry(v);
  Poly det = f.det().partial_eval(b);
  return e.numerator.partial_eval(b) - det.pow(static_cast<unsigned>(e.exponent)).scaled(c);
}

inline std::map<VarId, Scalar> identity_values(const JetSpace& js, const Vector& z0, int n) {
  std::map<VarId, Scalar> out;
  for (VarId v : js.target_vars(n)) {
    const auto& tv = js.var(v);
    if (tv.order() == 0)
      out[v] = z0.at(static_cast<std::size_t>(tv.base));
    else
      out[v] = tv.order() == 1 && tv.index[0] == tv.base ? 1 : 0;
  }
  return out;
}

inline DiffeoJet jet_from_values(const JetSpacePtr& space, const Vector& z0, int n, const std::map<VarId, Scalar>& values) {
  DiffeoJet g{space, n, z0, Vector(space->target_vars(n).size())};
  for (VarId v : space->target_vars(n)) g.coeffs[space->position(v)] = values.at(v);
  return g;
}

/// Whether g satisfies the closed determining equations exactly.
inline bool satisfies_determining(const PseudogroupSpec& ps, const DiffeoJet& g) {
  const JetSpace& js = *ps.space;
  auto b = source_binder(js, g.source);
  g.bind(b);
  for (const auto& f : prolong_determining_system(ps, std::max(0, g.order - ps.base_order))) {
    if (js.max_order(f, JetKind::Target) > g.order) continue;
    try {
      if (f.eval_with(b) != 0) return false;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DivisionByZero) throw;
      return false;
    }
  }
  return true;
}

/// Completes a partially determined cascade by assigning the free unknowns
/// one at a time (first one gets `offset` away from the identity, the rest
/// `rest(v)` away) and re-running the elimination.
template <class Rest>
std::optional<std::map<VarId, Scalar>> complete_cascade(const std::vector<Poly>& eqs, const std::vector<VarId>& unknowns,
                                                        CascadeResult r, const std::map<VarId, Scalar>& id,
                                                        const Scalar& offset, Rest&& rest) {
  bool first = true;
  while (r.consistent && !r.free.empty()) {
    VarId v = r.free.front();
    auto known = r.values;
    known[v] = id.at(v) + (first ? offset : rest(v));
    first = false;
    r = affine_cascade(eqs, unknowns, std::move(known));
  }
  if (!r.consistent || !r.residual.empty()) return std::nullopt;
  return r.values;
}

}  // namespace detail

/// Solves g . z = z together with the determining equations, order by order
/// in the unknown group-jet coordinates.
inline IsotropyReport isotropy_jets_triangular(const PseudogroupSpec& ps, int n, const SubmanifoldJetPoint& z) {
  detail::check_point(ps, n, z);
  const JetSpace& js = *ps.space;
  const int top = std::max(n, ps.base_order);
  js.check_cap(top);
  const Vector z0 = z.base();
  IsotropyReport rep;
  rep.order = n;
  rep.point = z;

  std::vector<Poly> eqs = detail::determining_polys(ps, top, z0);
  for (VarId v : js.jet_coordinates(n))
    if (js.var(v).kind == JetKind::Submanifold) eqs.push_back(detail::normalization_poly(z, v, z.value(v)));
  std::map<VarId, Scalar> known;
  std::vector<VarId> unknowns;
  for (VarId v : js.target_vars(top)) {
    if (js.order(v) == 0)
      known[v] = z0[static_cast<std::size_t>(js.var(v).base)];
    else
      unknowns.push_back(v);
  }
  auto r = affine_cascade(eqs, unknowns, known);
  for (int k = 1; k <= n; ++k) {
    IsotropyStage st{k, {}};
    for (VarId v : js.target_vars_of_order(k)) {
      auto it = r.values.find(v);
      st.coordinates.emplace_back(v, it == r.values.end() ? std::nullopt : std::optional<Scalar>(it->second));
    }
    rep.stages.push_back(std::move(st));
  }
  auto id = detail::identity_values(js, z0, top);
  if (!r.consistent) {
    rep.note = "the stabilization equations are inconsistent after clearing denominators";
    return rep;
  }
  bool low_determined = true;
  for (VarId v : js.target_vars(n)) low_determined = low_determined && r.determined(v);
  if (low_determined) {
    bool identity = true;
    for (VarId v : js.target_vars(n)) identity = identity && r.values.at(v) == id.at(v);
    if (identity) {
      rep.status = IsotropyStatus::Trivial;
      return rep;
    }
  }
  static const char* offsets[] = {"1", "-1", "2", "1/2", "-2", "3", "-1/2", "5"};
  for (const char* o : offsets) {
    auto vals = detail::complete_cascade(eqs, unknowns, r, id, parse_scalar(o), [](VarId) { return Scalar(0); });
    if (!vals) continue;
    auto g = detail::jet_from_values(ps.space, z0, top, *vals);
    if (!inverse(g.first_order()) || !detail::satisfies_determining(ps, g)) continue;
    auto gn = g.truncated(n);
    if (gn.is_identity()) continue;
    try {
      if (act_on_jet(gn, z) != z) continue;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularTotalJacobian) throw;
      continue;
    }
    rep.status = IsotropyStatus::Nontrivial;
    rep.witness = gn;
    return rep;
  }
  rep.note = "a stage is not uniquely solvable and no non-identity solution was found";
  return rep;
}

}  // namespace jetfree
