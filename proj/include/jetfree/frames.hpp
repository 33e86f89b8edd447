#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "jetfree/freeness.hpp"

namespace jetfree {

/// Coordinate cross-section: selected jet coordinates of J^n fixed to
/// constants.
struct CrossSection {
  int order = 0;
  std::vector<std::pair<VarId, Scalar>> fix;

  std::optional<Scalar> value(VarId v) const {
    for (const auto& [w, c] : fix)
      if (w == v) return c;
    return std::nullopt;
  }
  bool contains(const SubmanifoldJetPoint& z) const {
    for (const auto& [v, c] : fix)
      if (z.value(v) != c) return false;
    return true;
  }
};

inline CrossSection make_cross_section(const JetSpace& js, int n, const std::vector<std::pair<std::string, Scalar>>& fix) {
  js.check_cap(n);
  CrossSection cs{n, {}};
  std::set<VarId> seen;
  for (const auto& [name, c] : fix) {
    auto v = js.find(name);
    if (!v) throw Error(ErrorKind::UnknownCoordinate, "no jet coordinate named '" + name + "'");
    auto kind = js.var(*v).kind;
    if (kind != JetKind::Source && kind != JetKind::Submanifold)
      throw Error(ErrorKind::InvalidArgument, "'" + name + "' is not a coordinate of the submanifold jet space");
    if (js.order(*v) > n) throw Error(ErrorKind::OrderMismatch, "'" + name + "' has order above " + std::to_string(n));
    if (!seen.insert(*v).second) throw Error(ErrorKind::InvalidArgument, "'" + name + "' is fixed twice");
    cs.fix.emplace_back(*v, c);
  }
  std::sort(cs.fix.begin(), cs.fix.end(), [&](const auto& a, const auto& b) { return js.position(a.first) < js.position(b.first); });
  return cs;
}

struct TransversalityCertificate {
  bool transversal = false;
  std::size_t jet_dimension = 0;
  std::size_t orbit_dimension = 0;
  std::size_t fixed = 0;
  std::size_t fixed_rank = 0;
  std::size_t stacked_rank = 0;

  std::size_t deficit() const { return jet_dimension - stacked_rank; }
  std::string describe() const {
    return "dim J^n = " + std::to_string(jet_dimension) + ", orbit dimension " + std::to_string(orbit_dimension) + ", " +
           std::to_string(fixed) + " fixed coordinates of rank " + std::to_string(fixed_rank) + " on the orbit, stacked rank " +
           std::to_string(stacked_rank) + " (deficit " + std::to_string(deficit()) + ")";
  }
};

/// Exact rank test: the free coordinate directions and the image of pr at
/// z must span T_z J^n and meet only in 0.
inline TransversalityCertificate check_transversality(const CrossSection& cs, const PseudogroupSpec& ps, const SubmanifoldJetPoint& z) {
  if (z.order != cs.order) throw Error(ErrorKind::OrderMismatch, "point and cross-section have different orders");
  auto pm = prolongation_matrix(ps, cs.order, z);
  TransversalityCertificate c;
  c.jet_dimension = pm.rows.size();
  c.orbit_dimension = pm.rank();
  c.fixed = cs.fix.size();
  Matrix fixed_rows, stacked = pm.entries;
  for (std::size_t r = 0; r < pm.rows.size(); ++r) {
    bool fixed = cs.value(pm.rows[r]).has_value();
    if (fixed) fixed_rows.push_back(pm.entries[r]);
    for (std::size_t f = 0; f < pm.rows.size(); ++f) {
      bool free_f = !cs.value(pm.rows[f]).has_value();
      if (free_f) stacked[r].push_back(Scalar(f == r ? 1 : 0));
    }
  }
  c.fixed_rank = fixed_rows.empty() || fixed_rows[0].empty() ? 0 : rank(fixed_rows);
  c.stacked_rank = stacked.empty() || stacked[0].empty() ? 0 : rank(stacked);
  std::size_t free = c.jet_dimension - c.fixed;
  c.transversal = c.stacked_rank == c.jet_dimension && c.orbit_dimension + free == c.jet_dimension;
  return c;
}

struct SolverConfig {
  bool allow_float = true;
  double tolerance = 1e-12;
  int max_iterations = 50;
};

/// A frame value g(z) with g(z) . z on the cross-section. Float-mode
/// results carry the exact rational of each double and exact = false.
struct FrameJet {
  DiffeoJet jet;
  bool exact = true;
  double residual = 0;
};

namespace detail {

struct FrameSystem {
  int top = 0;
  std::vector<VarId> unknowns;
  std::vector<Poly> equations;
};

inline FrameSystem frame_system(const PseudogroupSpec& ps, const CrossSection& cs, const SubmanifoldJetPoint& z) {
  const JetSpace& js = *ps.space;
  FrameSystem s;
  s.top = std::max(cs.order, ps.base_order);
  js.check_cap(s.top);
  s.unknowns = js.target_vars(s.top);
  s.equations = determining_polys(ps, s.top, z.base());
  for (const auto& [v, c] : cs.fix) s.equations.push_back(normalization_poly(z, v, c));
  return s;
}

struct FloatSolution {
  std::map<VarId, Scalar> values;
  double residual = 0;
};

/// Gauss-Newton on the residual equations in the free unknowns, started at
/// the identity jet; requires a full-rank Jacobian at the solution.
inline std::optional<FloatSolution> gauss_newton(const CascadeResult& r, const std::map<VarId, Scalar>& id, const JetSpace& js,
                                                 const SolverConfig& cfg) {
  const std::size_t nv = r.free.size(), ne = r.residual.size();
  if (nv == 0 || ne < nv) return std::nullopt;
  std::vector<std::vector<Poly>> jac(ne, std::vector<Poly>(nv));
  for (std::size_t i = 0; i < ne; ++i)
    for (std::size_t j = 0; j < nv; ++j) jac[i][j] = r.residual[i].diff(r.free[j]);
  std::vector<double> x(nv);
  for (std::size_t j = 0; j < nv; ++j) x[j] = id.at(r.free[j]).get_d();
  Binder<double> b(js.size());
  for (std::size_t j = 0; j < nv; ++j) b.bind(r.free[j], x[j]);
  Eigen::VectorXd res(static_cast<Eigen::Index>(ne));
  Eigen::MatrixXd jm(static_cast<Eigen::Index>(ne), static_cast<Eigen::Index>(nv));
  auto evaluate = [&] {
    for (std::size_t i = 0; i < ne; ++i) {
      res(static_cast<Eigen::Index>(i)) = r.residual[i].eval_as<double>(b);
      for (std::size_t j = 0; j < nv; ++j) jm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = jac[i][j].eval_as<double>(b);
    }
  };
  for (int it = 0; it <= cfg.max_iterations; ++it) {
    evaluate();
    if (!res.allFinite()) return std::nullopt;
    if (res.norm() < cfg.tolerance) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jm);
      if (static_cast<std::size_t>(qr.rank()) < nv) return std::nullopt;
      FloatSolution s{r.values, res.norm()};
      for (std::size_t j = 0; j < nv; ++j) s.values[r.free[j]] = Scalar(x[j]);
      return s;
    }
    if (it == cfg.max_iterations) break;
    Eigen::VectorXd dx = jm.completeOrthogonalDecomposition().solve(-res);
    for (std::size_t j = 0; j < nv; ++j) x[j] += dx(static_cast<Eigen::Index>(j));
  }
  return std::nullopt;
}

}  // namespace detail

/// Group jet g(z) in G^(n) with g(z) . z on the cross-section, solved by
/// linear elimination stage by stage; Gauss-Newton is the fallback.
inline FrameJet construct_frame(const PseudogroupSpec& ps, const CrossSection& cs, const SubmanifoldJetPoint& z,
                                const SolverConfig& cfg = {}) {
  detail::check_point(ps, cs.order, z);
  const JetSpace& js = *ps.space;
  const int n = cs.order;
  auto sys = detail::frame_system(ps, cs, z);
  auto r = affine_cascade(sys.equations, sys.unknowns);
  if (!r.consistent) throw Error(ErrorKind::NoSolution, "the normalization equations have no solution at this point");
  FrameJet out;
  bool low = true;
  for (VarId v : js.target_vars(n)) low = low && r.determined(v);
  if (low) {
    out.jet = detail::jet_from_values(ps.space, z.base(), n, r.values);
  } else {
    if (!cfg.allow_float) throw Error(ErrorKind::NonTriangular, "the normalization equations are not solvable stage by stage");
    auto id = detail::identity_values(js, z.base(), sys.top);
    auto s = detail::gauss_newton(r, id, js, cfg);
    if (!s) throw Error(ErrorKind::NonTriangular, "the normalization equations do not determine a unique frame near the identity");
    out.jet = detail::jet_from_values(ps.space, z.base(), n, s->values);
    out.exact = false;
    out.residual = s->residual;
  }
  if (n >= 1 && !inverse(out.jet.first_order())) throw Error(ErrorKind::NoSolution, "the solution is not an invertible jet");
  auto moved = act_on_jet(out.jet, z);
  if (out.exact && !cs.contains(moved)) throw Error(ErrorKind::NoSolution, "the solution does not normalize the point");
  return out;
}

/// Certificate at the normalized anchor when the frame can be solved there,
/// otherwise at the anchor itself.
inline TransversalityCertificate anchor_transversality(const PseudogroupSpec& ps, const CrossSection& cs,
                                                       const SubmanifoldJetPoint& anchor, const SolverConfig& cfg = {}) {
  try {
    auto f = construct_frame(ps, cs, anchor, cfg);
    return check_transversality(cs, ps, act_on_jet(f.jet, anchor));
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::NoSolution:
      case ErrorKind::NonTriangular:
      case ErrorKind::SingularTotalJacobian:
        return check_transversality(cs, ps, anchor);
      default:
        throw;
    }
  }
}

/// A moving frame on the chart around an anchor point. Points where the
/// frame cannot be solved are recorded as outside the chart.
class MovingFrameChart {
 public:
  MovingFrameChart(PseudogroupSpec ps, CrossSection cs, SubmanifoldJetPoint anchor, SolverConfig cfg = {})
      : ps_(std::move(ps)), cs_(std::move(cs)), anchor_(std::move(anchor)), cfg_(cfg) {
    detail::check_point(ps_, cs_.order, anchor_);
    certificate_ = anchor_transversality(ps_, cs_, anchor_, cfg_);
    if (!certificate_.transversal)
      throw Error(ErrorKind::PreconditionViolation, "the cross-section is not transversal at the anchor: " + certificate_.describe());
  }

  const PseudogroupSpec& pseudogroup() const { return ps_; }
  const CrossSection& cross_section() const { return cs_; }
  const SubmanifoldJetPoint& anchor() const { return anchor_; }
  const SolverConfig& config() const { return cfg_; }
  const TransversalityCertificate& certificate() const { return certificate_; }
  int order() const { return cs_.order; }

  std::optional<FrameJet> frame(const SubmanifoldJetPoint& z) const {
    if (z.order != cs_.order) throw Error(ErrorKind::OrderMismatch, "point has a different order than the frame");
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = cache_.find(z.values);
      if (it != cache_.end()) return it->second;
    }
    std::optional<FrameJet> f;
    try {
      f = construct_frame(ps_, cs_, z, cfg_);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::NoSolution:
        case ErrorKind::NonTriangular:
        case ErrorKind::SingularTotalJacobian:
        case ErrorKind::CoefficientSingularity:
        case ErrorKind::DivisionByZero:
          break;
        default:
          throw;
      }
    }
    std::lock_guard<std::mutex> lock(mutex_);
    if (!f) ++outside_;
    cache_.emplace(z.values, f);
    return f;
  }

  FrameJet require(const SubmanifoldJetPoint& z) const {
    auto f = frame(z);
    if (!f) throw Error(ErrorKind::NoSolution, "the point lies outside the frame chart");
    return *f;
  }

  std::size_t outside_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return outside_;
  }

 private:
  PseudogroupSpec ps_;
  CrossSection cs_;
  SubmanifoldJetPoint anchor_;
  SolverConfig cfg_;
  TransversalityCertificate certificate_;
  mutable std::mutex mutex_;
  mutable std::map<Vector, std::optional<FrameJet>> cache_;
  mutable std::size_t outside_ = 0;
};

inline FrameJet construct_frame(const MovingFrameChart& chart, const SubmanifoldJetPoint& z) { return chart.require(z); }

/// Random point of J^n with bounded rational coordinates.
inline SubmanifoldJetPoint sample_point(const JetSpacePtr& space, int n, RationalSampler& rng, std::int64_t bound = 10) {
  SubmanifoldJetPoint z{space, n, {}};
  for (std::size_t i = 0; i < space->jet_coordinates(n).size(); ++i) z.values.push_back(rng.rational(bound));
  return z;
}

/// Random jet of a pseudogroup element at z0, close to the identity: free
/// coordinates are perturbed by at most 1, the rest solved from the
/// determining equations.
inline DiffeoJet sample_group_jet(const PseudogroupSpec& ps, const Vector& z0, int n, RationalSampler& rng,
                                  std::int64_t bound = 10, int attempts = 20) {
  const JetSpace& js = *ps.space;
  const int top = std::max(n, ps.base_order);
  js.check_cap(top);
  auto unknowns = js.target_vars(top);
  auto eqs = detail::determining_polys(ps, top, z0);
  auto id = detail::identity_values(js, z0, top);
  auto base = affine_cascade(eqs, unknowns);
  auto draw = [&](VarId) -> Scalar { return rng.rational(bound) / bound; };
  for (int a = 0; a < attempts; ++a) {
    auto vals = detail::complete_cascade(eqs, unknowns, base, id, rng.rational(bound) / bound, draw);
    if (!vals) continue;
    auto g = detail::jet_from_values(ps.space, z0, top, *vals);
    if (top >= 1 && !inverse(g.first_order())) continue;
    if (!detail::satisfies_determining(ps, g)) continue;
    return g.truncated(n);
  }
  throw Error(ErrorKind::NonTriangular, "could not sample a pseudogroup jet by staged elimination");
}

struct EquivarianceSample {
  SubmanifoldJetPoint z;
  DiffeoJet g;
};

struct EquivarianceReport {
  int requested = 0;
  int checked = 0;
  int excluded = 0;
  std::vector<EquivarianceSample> pairs;  // the in-chart samples that were checked
  std::vector<EquivarianceSample> violations;

  bool passed() const { return violations.empty(); }
};

namespace detail {

inline bool approx_equal(const DiffeoJet& a, const DiffeoJet& b, double tol) {
  if (a.order != b.order || a.source != b.source) return false;
  for (std::size_t i = 0; i < a.coeffs.size(); ++i)
    if (std::abs(Scalar(a.coeffs[i] - b.coeffs[i]).get_d()) > tol * std::max(1.0, std::abs(a.coeffs[i].get_d()))) return false;
  return true;
}

inline bool same_frame(const FrameJet& a, const DiffeoJet& b_jet, bool b_exact) {
  if (a.exact && b_exact) return a.jet == b_jet;
  return approx_equal(a.jet, b_jet, 1e-8);
}

}  // namespace detail

/// Verifies g(g . z) . g = g(z) for sampled points and group jets; samples
/// that leave the chart are excluded and counted.
inline EquivarianceReport check_equivariance(const MovingFrameChart& chart, int samples, std::uint64_t seed,
                                             std::int64_t bound = 10) {
  const auto& ps = chart.pseudogroup();
  const int n = chart.order();
  RationalSampler rng(seed);
  EquivarianceReport rep;
  rep.requested = samples;
  for (int attempt = 0; rep.checked < samples && attempt < 20 * samples; ++attempt) {
    auto z = sample_point(ps.space, n, rng, bound);
    auto g = sample_group_jet(ps, z.base(), n, rng, bound);
    auto fz = chart.frame(z);
    if (!fz) {
      ++rep.excluded;
      continue;
    }
    std::optional<SubmanifoldJetPoint> gz;
    try {
      gz = act_on_jet(g, z);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularTotalJacobian) throw;
    }
    auto fgz = gz ? chart.frame(*gz) : std::nullopt;
    if (!fgz) {
      ++rep.excluded;
      continue;
    }
    ++rep.checked;
    rep.pairs.push_back({z, g});
    auto lhs = jet_compose(fgz->jet, g);
    if (!detail::same_frame(*fz, lhs, fgz->exact)) rep.violations.push_back({z, g});
  }
  return rep;
}

struct InvariantEntry {
  VarId coordinate = 0;
  Scalar value;
  bool normalized = false;
};

/// Coordinates of g(z) . z; the entries not fixed by the cross-section are
/// differential invariants.
inline std::vector<InvariantEntry> invariants(const MovingFrameChart& chart, const SubmanifoldJetPoint& z) {
  auto f = chart.require(z);
  auto moved = act_on_jet(f.jet, z);
  const JetSpace& js = *z.space;
  std::vector<InvariantEntry> out;
  auto coords = js.jet_coordinates(z.order);
  for (std::size_t i = 0; i < coords.size(); ++i)
    out.push_back({coords[i], moved.values[i], chart.cross_section().value(coords[i]).has_value()});
  return out;
}

struct CompatibilityReport {
  bool compatible = true;
  int checked = 0;
  int excluded = 0;
  std::vector<SubmanifoldJetPoint> mismatches;
};

/// Checks that the order-n truncation of the order-k frame equals the
/// order-n frame at the projected point.
inline CompatibilityReport check_compatibility(const MovingFrameChart& lower, const MovingFrameChart& higher, int samples,
                                               std::uint64_t seed, std::int64_t bound = 10) {
  if (!(lower.pseudogroup() == higher.pseudogroup()))
    throw Error(ErrorKind::DomainMismatch, "frames belong to different pseudogroups");
  const int n = lower.order(), k = higher.order();
  if (k < n) throw Error(ErrorKind::DomainMismatch, "the second frame must have the higher order");
  for (const auto& [v, c] : lower.cross_section().fix)
    if (!higher.cross_section().value(v))
      throw Error(ErrorKind::DomainMismatch, "the higher cross-section does not fix '" + lower.pseudogroup().space->name(v) + "'");
  RationalSampler rng(seed);
  CompatibilityReport rep;
  for (int attempt = 0; rep.checked < samples && attempt < 20 * samples; ++attempt) {
    auto z = sample_point(higher.pseudogroup().space, k, rng, bound);
    auto fk = higher.frame(z);
    auto fn = lower.frame(z.truncated(n));
    if (!fk || !fn) {
      ++rep.excluded;
      continue;
    }
    ++rep.checked;
    if (!detail::same_frame(*fn, fk->jet.truncated(n), fk->exact)) {
      rep.compatible = false;
      rep.mismatches.push_back(z);
    }
  }
  return rep;
}

}  // namespace jetfree
