#pragma once

#include <map>
#include <vector>

#include "jetfree/linalg.hpp"
#include "jetfree/poly.hpp"

namespace jetfree {

/// Outcome of solving a polynomial system by repeated linear elimination.
struct CascadeResult {
  bool consistent = true;
  std::map<VarId, Scalar> values;  // known or uniquely determined unknowns
  std::vector<VarId> free;         // unknowns left undetermined, in input order
  std::vector<Poly> residual;      // equations that still involve unknowns

  bool determined(VarId v) const { return values.count(v) > 0; }
  bool solved() const { return consistent && free.empty(); }
};

/// Substitutes the known values, solves the equations that have become
/// affine in the remaining unknowns, fixes every unknown they determine
/// uniquely and repeats until nothing changes. Sound for uniqueness: any
/// solution of the full system agrees with the fixed values.
inline CascadeResult affine_cascade(std::vector<Poly> eqs, const std::vector<VarId>& unknowns,
                                    std::map<VarId, Scalar> known = {}) {
  CascadeResult r;
  r.values = std::move(known);
  auto lookup = [&](VarId v) -> const Scalar* {
    auto it = r.values.find(v);
    return it == r.values.end() ? nullptr : &it->second;
  };
  for (;;) {
    std::vector<Poly> live;
    for (const auto& e : eqs) {
      Poly s = e.partial_eval(lookup);
      if (s.is_zero()) continue;
      if (s.is_constant()) {
        r.consistent = false;
        r.residual = {s};
        return r;
      }
      live.push_back(std::move(s));
    }
    eqs = std::move(live);

    std::vector<VarId> open;
    std::map<VarId, std::size_t> col;
    for (VarId v : unknowns)
      if (!r.values.count(v)) {
        col[v] = open.size();
        open.push_back(v);
      }
    Matrix a;
    Vector b;
    for (const auto& e : eqs) {
      if (e.total_degree() > 1) continue;
      Vector row(open.size());
      Scalar rhs(0);
      bool usable = true;
      for (const auto& t : e.terms()) {
        if (t.mono.is_one()) {
          rhs = -t.coef;
          continue;
        }
        auto it = col.find(t.mono.factors()[0].first);
        if (it == col.end()) {
          usable = false;
          break;
        }
        row[it->second] = t.coef;
      }
      if (!usable) continue;
      a.push_back(std::move(row));
      b.push_back(std::move(rhs));
    }
    if (a.empty()) {
      r.free = open;
      break;
    }
    auto sol = solve_linear(a, b, open.size());
    if (!sol.consistent) {
      r.consistent = false;
      r.residual = eqs;
      return r;
    }
    bool progress = false;
    for (std::size_t k = 0; k < open.size(); ++k)
      if (sol.determined[k]) {
        r.values[open[k]] = sol.particular[k];
        progress = true;
      }
    if (!progress) {
      r.free = open;
      break;
    }
  }
  r.residual = eqs;
  return r;
}

}  // namespace jetfree
