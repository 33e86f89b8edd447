#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <json.hpp>

#include "jetfree/frames.hpp"
#include "oracles.hpp"
#include "process.hpp"
#include "testing.hpp"

using namespace jetfree;
using namespace jetfree::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome verdict(bool pass, std::string detail) { return {pass, std::move(detail)}; }

SubmanifoldJetPoint random_point(const PseudogroupSpec& ps, int n, RationalSampler& rng, std::int64_t bound = 10) {
  return sample_point(ps.space, n, rng, bound);
}

SubmanifoldJetPoint free_point(const PseudogroupSpec& ps, int n, RationalSampler& rng) {
  for (;;) {
    auto z = random_point(ps, n, rng);
    if (local_freeness(ps, n, z).locally_free()) return z;
  }
}

Expr random_poly_x(const Expr& x, int degree, RationalSampler& rng) {
  Expr f, power(1);
  for (int k = 0; k <= degree; ++k) {
    f += Expr(rng.rational(3)) * power;
    power = power * x;
  }
  return f;
}

/// Infinitesimal generator of the bundled example with coefficient xi(x).
VectorField generator(const std::string& name, const JetSpace& js, const Expr& xi) {
  Expr u = Expr::variable(js.u(0));
  if (name == "e3") return {{xi, u * xi.diff(js.x(0))}};
  return {{xi, Expr(0)}};
}

// 1. Persistence of local freeness.
Outcome persistence() {
  RationalSampler rng(2024);
  std::string detail;
  int failures = 0, sweeps = 0;
  for (const char* name : {"e1", "e2", "e3"}) {
    auto ps = load(name);
    int n = 1;
    if (std::string(name) == "e3") {
      auto z = random_point(ps, 6, rng);
      for (n = 0; n <= 6 && !local_freeness(ps, n, z.truncated(n)).locally_free(); ++n) {}
      if (n > 6) return verdict(false, "no free order found for e3");
    }
    detail += std::string(name) + " n=" + std::to_string(n) + " ";
    for (int s = 0; s < 5; ++s) {
      auto z = free_point(ps, n, rng);
      auto rep = persistence_sweep(ps, n, z, n + 3, 100, 7 + static_cast<std::uint64_t>(s));
      failures += static_cast<int>(rep.failures.size());
      ++sweeps;
    }
  }
  return verdict(failures == 0, detail + "sweeps=" + std::to_string(sweeps) + " failures=" + std::to_string(failures));
}

// 2. Negative control.
Outcome negative_control() {
  auto e1 = load("e1");
  auto v = local_freeness(e1, 1, point(e1, 1, {"0", "0", "0"}));
  return verdict(v.verdict == Freeness::NotLocallyFree && v.kernel_dimension == 1,
                 std::string(to_string(v.verdict)) + " kernel_dimension=" + std::to_string(v.kernel_dimension));
}

// 3. Prolongation formula against finite differences of the lifted flow.
Outcome two_path_oracle() {
  RationalSampler rng(31);
  const double h = 1e-4;
  double worst = 0, worst_half = 0;
  int pairs = 0, bad = 0, outside = 0;
  for (const char* name : {"e1", "e2", "e3"}) {
    auto ps = load(name);
    const JetSpace& js = *ps.space;
    Expr x = Expr::variable(js.x(0));
    auto l = infinitesimal_system(ps);
    for (int s = 0; s < 20; ++s) {
      const int n = 1 + s % 3;
      auto z = random_point(ps, n, rng, 3);
      Expr xi = random_poly_x(x, std::string(name) == "e2" ? 1 : 3, rng);
      auto v = generator(name, js, xi);
      auto jet = jet_of_vector_field(ps.space, v, z.base(), n);
      if (!in_span(fiber_basis(l, n, z.base()).vectors, jet.coeffs)) ++outside;
      auto exact = prolong_at_point(z, jet);
      auto id = DiffeoJet::identity(ps.space, z.base(), n);
      auto central = [&](double step) {
        auto plus = act_on_jet(flow_jet(v, step, id), z), minus = act_on_jet(flow_jet(v, -step, id), z);
        std::vector<double> rel(exact.size());
        for (std::size_t i = 0; i < exact.size(); ++i) {
          double fd = (plus[i] - minus[i]) / (2 * step), ex = exact[i].get_d();
          rel[i] = std::fabs(fd - ex) / std::max(1.0, std::fabs(ex));
        }
        return rel;
      };
      auto rel = central(h), half = central(h / 2);
      for (std::size_t i = 0; i < rel.size(); ++i) {
        if (rel[i] > worst) worst = rel[i], worst_half = half[i];
        if (rel[i] > 1e-6) ++bad;
      }
      ++pairs;
    }
  }
  std::ostringstream os;
  os << pairs << " pairs, " << bad << " entries above 1e-06, worst relative error " << worst << " (ratio at h/2: "
     << (worst_half > 0 ? worst / worst_half : 0) << "), generators outside the algebra " << outside;
  return verdict(bad == 0 && outside == 0 && pairs == 60, os.str());
}

// 4. Bracket compatibility of prolongation and lift.
Outcome brackets() {
  int checks = 0, bad = 0;
  for (const char* name : {"e1", "e3"}) {
    auto ps = load(name);
    const JetSpace& js = *ps.space;
    Expr x = Expr::variable(js.x(0));
    std::vector<VectorField> gens;
    for (const Expr& xi : {Expr(1), x, x * x, x * x * x - Expr(2) * x}) gens.push_back(generator(name, js, xi));
    for (std::size_t a = 0; a < gens.size(); ++a) {
      for (std::size_t b = a + 1; b < gens.size(); ++b) {
        auto br = lie_bracket(js, gens[a], gens[b]);
        for (int n = 0; n <= 3; ++n) {
          auto lhs = prolong_vector_field(ps.space, br, n).components;
          auto rhs = lie_bracket(js.jet_coordinates(n), prolong_vector_field(ps.space, gens[a], n).components,
                                 prolong_vector_field(ps.space, gens[b], n).components);
          bad += lhs != rhs;
          ++checks;
        }
        for (int n = 0; n <= 2; ++n) {
          auto lhs = lift_vector_field(js, br, n);
          auto rhs = lie_bracket(js.target_vars(n), lift_vector_field(js, gens[a], n), lift_vector_field(js, gens[b], n));
          bad += lhs != rhs;
          ++checks;
        }
      }
    }
  }
  return verdict(bad == 0, std::to_string(checks) + " bracket identities, " + std::to_string(bad) + " mismatches");
}

// 5. Prolonged action against series reversion of the transformed graph.
Outcome chain_rule() {
  auto js = JetSpace::make({{"x"}, {"u"}}, 6);
  Expr x = Expr::variable(js->x(0)), u = Expr::variable(js->u(0));
  RationalSampler rng(55);
  int cases = 0, bad = 0;
  while (cases < 10) {
    auto c = [&] { return Expr(rng.rational(3)); };
    std::vector<Expr> phi{c() + c() * x + c() * u + c() * x * u + c() * u * u, c() + c() * x + c() * u + c() * x * x * u};
    std::vector<Expr> s{c() + c() * x + c() * x * x + c() * x * x * x};
    Scalar x0 = rng.rational(3);
    auto z = jet_of_graph(js, s, {x0}, 3);
    auto g = jet_of_map(js, phi, z.base(), 3);
    SubmanifoldJetPoint got;
    try {
      got = act_on_jet(g, z);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::SingularTotalJacobian) continue;
      throw;
    }
    if (!inverse(g.first_order())) continue;
    bad += !(got == series_oracle(js, phi, s, x0, 3));
    ++cases;
  }
  return verdict(bad == 0, std::to_string(cases) + " cases, " + std::to_string(bad) + " mismatches");
}

// 6. Groupoid laws.
Outcome groupoid_laws() {
  auto js = JetSpace::make({{"x"}, {"u"}}, 6);
  RationalSampler rng(66);
  int bad = 0;
  for (int t = 0; t < 50; ++t) {
    const int n = t % 4;
    auto g = sample_diffeo_jet(js, {rng.rational(), rng.rational()}, n, rng);
    auto h = sample_diffeo_jet(js, g.target(), n, rng);
    auto k = sample_diffeo_jet(js, h.target(), n, rng);
    bad += !(jet_compose(k, jet_compose(h, g)) == jet_compose(jet_compose(k, h), g));
    bad += !(jet_compose(DiffeoJet::identity(js, g.target(), n), g) == g);
    bad += !(jet_compose(g, DiffeoJet::identity(js, g.source, n)) == g);
    auto gi = jet_invert(g);
    bad += !jet_compose(gi, g).is_identity();
    bad += !jet_compose(g, gi).is_identity();
  }
  return verdict(bad == 0, "50 triples at orders 0..3, " + std::to_string(bad) + " violations");
}

// 7. Moving frame.
Outcome moving_frame() {
  auto e1 = load("e1");
  auto cs2 = make_cross_section(*e1.space, 2, {{"x", 0}, {"u.x", 1}, {"u.xx", 0}});
  auto cs1 = make_cross_section(*e1.space, 1, {{"x", 0}, {"u.x", 1}});
  MovingFrameChart f2(e1, cs2, point(e1, 2, {"0", "0", "1", "0"}));
  MovingFrameChart f1(e1, cs1, point(e1, 1, {"0", "0", "1"}));
  RationalSampler rng(77);
  int normalized = 0, attempts = 0;
  bool all_exact = true;
  while (normalized < 20 && attempts++ < 200) {
    auto z = random_point(e1, 2, rng);
    auto f = f2.frame(z);
    if (!f) continue;
    all_exact = all_exact && f->exact;
    if (cs2.contains(act_on_jet(f->jet, z))) ++normalized;
  }
  auto eq = check_equivariance(f2, 50, 78);
  int orbit_bad = 0;
  for (const auto& [z, g] : eq.pairs) {
    auto a = invariants(f2, z), b = invariants(f2, act_on_jet(g, z));
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!a[i].normalized && a[i].value != b[i].value) ++orbit_bad;
  }
  auto comp = check_compatibility(f1, f2, 20, 79);
  bool pass = normalized == 20 && all_exact && eq.checked == 50 && eq.passed() && orbit_bad == 0 && comp.compatible && comp.checked == 20;
  return verdict(pass, "normalized " + std::to_string(normalized) + "/20 exact, equivariance " + std::to_string(eq.checked) + " checked " +
                           std::to_string(eq.violations.size()) + " violations, invariant changes " + std::to_string(orbit_bad) +
                           ", compatibility " + (comp.compatible ? "yes" : "no") + " on " + std::to_string(comp.checked));
}

// 8. Top-order stabilizer.
Outcome stabilizer() {
  RationalSampler rng(88);
  int zero = 0, nonzero_expected = 0, positive = 0, runs = 0;
  for (const char* name : {"e1", "e2"}) {
    auto ps = load(name);
    auto base = free_point(ps, 1, rng);
    for (int n = 2; n <= 3; ++n)
      for (int s = 0; s < 10; ++s) {
        zero += top_order_stabilizer(ps, n, random_lift(base, n + 1, rng)).nullity() == 0;
        ++runs;
      }
  }
  auto e1 = load("e1");
  for (int n = 2; n <= 3; ++n)
    for (int s = 0; s < 10; ++s) {
      positive += top_order_stabilizer(e1, n, random_lift(point(e1, 1, {"0", "0", "0"}), n + 1, rng)).nullity() > 0;
      ++nonzero_expected;
    }
  return verdict(zero == runs && positive == nonzero_expected,
                 std::to_string(zero) + "/" + std::to_string(runs) + " free lifts with nullity 0, " + std::to_string(positive) + "/" +
                     std::to_string(nonzero_expected) + " degenerate lifts with positive nullity");
}

// 9. Witness mechanism.
Outcome witnesses() {
  auto e1 = load("e1");
  RationalSampler rng(99);
  int free_ok = 0, free_runs = 0, witnessed = 0, degenerate = 0;
  for (int n = 1; n <= 2; ++n) {
    for (int s = 0; s < 5; ++s) {
      auto z = random_lift(free_point(e1, 1, rng), n + 1, rng);
      free_ok += admissible_kernel_elements(e1, n, z).empty() && combined_kernel_system(e1, n, z).nullity() == 0;
      ++free_runs;
    }
    auto zero = random_lift(point(e1, 1, {"0", "0", "0"}), n + 1, rng);
    auto vs = admissible_kernel_elements(e1, n, zero);
    ++degenerate;
    bool ok = !vs.empty();
    for (const auto& v : vs) {
      auto rep = witness_check(e1, n, zero, v);
      bool nonzero = false;
      for (const auto& w : rep.witnesses) nonzero = nonzero || !w.jet.is_zero();
      ok = ok && !v.is_zero() && rep.memberships_hold() && nonzero;
    }
    witnessed += ok;
  }
  return verdict(free_ok == free_runs && witnessed == degenerate,
                 std::to_string(free_ok) + "/" + std::to_string(free_runs) + " free points admit only v = 0, " + std::to_string(witnessed) +
                     "/" + std::to_string(degenerate) + " degenerate points with verified witnesses");
}

// 10. Dimension bookkeeping.
Outcome dimensions() {
  auto e1 = load("e1");
  auto l = infinitesimal_system(e1);
  RationalSampler rng(1010);
  int bad = 0;
  for (int s = 0; s < 5; ++s) {
    Vector z0{rng.rational(), rng.rational()};
    for (int n = 0; n <= 5; ++n) bad += fiber_basis(l, n, z0).dimension() != static_cast<std::size_t>(n + 1);
  }
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q) {
      SpaceSpec spec;
      for (int i = 0; i < p; ++i) spec.independent.push_back("x" + std::to_string(i));
      for (int a = 0; a < q; ++a) spec.dependent.push_back("u" + std::to_string(a));
      JetSpace js(spec, 5);
      for (int n = 0; n <= 5; ++n) {
        std::size_t fiber = 0;
        for (int k = 0; k <= n; ++k) fiber += static_cast<std::size_t>(q) * mi_enumerate(p, k).size();
        auto d = jet_dims(spec, n);
        bad += d.jet_fiber != fiber || js.jet_coordinates(n).size() != d.jet_total;
      }
    }
  return verdict(bad == 0, std::to_string(bad) + " mismatches over 30 fiber dimensions and 24 jet-space counts");
}

// 11. DSL round trip and negative fixtures through the CLI.
Outcome dsl() {
  int round_trips = 0, fixtures = 0, bad = 0;
  for (const char* name : {"e1", "e2", "e3"}) {
    auto ps = load(name);
    auto back = parse_spec(SpecSource(serialize_spec(ps)));
    bad += !(back.ok() && *back.spec == ps);
    ++round_trips;
  }
  for (const auto& entry : std::filesystem::directory_iterator(source_path("tests/fixtures"))) {
    auto r = run({JETFREE_CLI, "parse", entry.path().string(), "--json"});
    bool ok = r.status == 2;
    try {
      auto doc = nlohmann::json::parse(r.out);
      ok = ok && doc.is_array() && !doc.empty();
      for (const auto& d : doc) ok = ok && d["span"]["line"].get<int>() >= 1 && d["span"]["column"].get<int>() >= 1;
    } catch (const std::exception&) {
      ok = false;
    }
    bad += !ok;
    ++fixtures;
  }
  return verdict(bad == 0 && fixtures >= 8, std::to_string(round_trips) + " round trips, " + std::to_string(fixtures) +
                                                " negative fixtures, " + std::to_string(bad) + " failures");
}

// 12. Determinism of the persistence command.
Outcome determinism() {
  auto dir = scratch_dir("acceptance");
  auto pt = write_file(dir / "point.json", R"({"order":1,"independent":{"x":"0"},"dependent":{"u":"0"},"jets":{"u.x":"1"}})");
  std::vector<std::string> cmd{JETFREE_CLI, "persistence", source_path("pseudogroups/e1.psg"), "--order", "1", "--through", "4",
                               "--point", pt, "--samples", "100", "--seed", "7", "--json"};
  auto a = run(cmd), b = run(cmd);
  std::filesystem::remove_all(dir);
  return verdict(a.status == 0 && b.status == 0 && !a.out.empty() && a.out == b.out,
                 "exit codes " + std::to_string(a.status) + "/" + std::to_string(b.status) + ", " + std::to_string(a.out.size()) +
                     " bytes, identical: " + (a.out == b.out ? "yes" : "no"));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"persistence of local freeness", persistence},
      {"negative control", negative_control},
      {"two-path prolongation oracle", two_path_oracle},
      {"bracket compatibility", brackets},
      {"chain-rule identity", chain_rule},
      {"groupoid laws", groupoid_laws},
      {"moving frame", moving_frame},
      {"top-order stabilizer", stabilizer},
      {"witness mechanism", witnesses},
      {"dimension bookkeeping", dimensions},
      {"dsl round trip and diagnostics", dsl},
      {"determinism", determinism},
  };
  int failed = 0, index = 0;
  for (const auto& [title, fn] : criteria) {
    ++index;
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (index == 1 && s >= 60) {
      o.pass = false;
      o.detail += ", over the 60 s budget";
    }
    failed += !o.pass;
    std::ostringstream line;
    line.precision(3);
    line << "criterion " << index << " " << (o.pass ? "PASS" : "FAIL") << " " << title << ": " << o.detail << " (" << std::fixed << s << " s)";
    std::cout << line.str() << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
