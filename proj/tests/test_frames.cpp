#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "jetfree/frames.hpp"
#include "testing.hpp"

using namespace jetfree;
using namespace jetfree::testing;

namespace {

CrossSection section(const PseudogroupSpec& ps, int n, std::initializer_list<std::pair<const char*, const char*>> fix) {
  std::vector<std::pair<std::string, Scalar>> f;
  for (const auto& [name, c] : fix) f.emplace_back(name, q(c));
  return make_cross_section(*ps.space, n, f);
}

Scalar target(const DiffeoJet& g, const char* name) { return g.coeffs[g.space->position(g.space->lookup(name))]; }

}  // namespace

TEST(CrossSection, Construction) {
  auto e1 = load("e1");
  auto cs = section(e1, 2, {{"u.xx", "0"}, {"x", "0"}, {"u.x", "1"}});
  ASSERT_EQ(cs.fix.size(), 3u);
  EXPECT_EQ(e1.space->name(cs.fix[0].first), "x");
  EXPECT_EQ(e1.space->name(cs.fix[2].first), "u.xx");
  EXPECT_TRUE(cs.contains(point(e1, 2, {"0", "7", "1", "0"})));
  EXPECT_FALSE(cs.contains(point(e1, 2, {"0", "7", "2", "0"})));
  EXPECT_THROW(section(e1, 1, {{"u.xx", "0"}}), Error);
  EXPECT_THROW(section(e1, 1, {{"X.x", "0"}}), Error);
  EXPECT_THROW(section(e1, 1, {{"x", "0"}, {"x", "1"}}), Error);
  EXPECT_THROW(section(e1, 1, {{"v", "0"}}), Error);
}

TEST(Transversality, Examples) {
  auto e1 = load("e1");
  auto z = point(e1, 1, {"0", "0", "1"});
  auto good = check_transversality(section(e1, 1, {{"x", "0"}, {"u.x", "1"}}), e1, z);
  EXPECT_TRUE(good.transversal);
  EXPECT_EQ(good.jet_dimension, 3u);
  EXPECT_EQ(good.orbit_dimension, 2u);
  EXPECT_EQ(good.fixed_rank, 2u);
  EXPECT_EQ(good.deficit(), 0u);

  auto bad = check_transversality(section(e1, 1, {{"u", "0"}, {"u.x", "1"}}), e1, z);
  EXPECT_FALSE(bad.transversal);
  EXPECT_EQ(bad.fixed_rank, 1u);
  EXPECT_GT(bad.deficit(), 0u);

  auto few = check_transversality(section(e1, 1, {{"x", "0"}}), e1, z);
  EXPECT_FALSE(few.transversal);
  EXPECT_EQ(few.stacked_rank, 3u);
  EXPECT_NE(few.describe().find("orbit dimension 2"), std::string::npos);

  auto many = check_transversality(section(e1, 1, {{"x", "0"}, {"u", "0"}, {"u.x", "1"}}), e1, z);
  EXPECT_FALSE(many.transversal);
  EXPECT_EQ(many.deficit(), 1u);
}

TEST(ConstructFrame, OrderOneExample) {
  auto e1 = load("e1");
  auto cs = section(e1, 1, {{"x", "0"}, {"u.x", "1"}});
  auto f = construct_frame(e1, cs, point(e1, 1, {"0", "0", "2"}));
  EXPECT_TRUE(f.exact);
  EXPECT_EQ(target(f.jet, "X"), 0);
  EXPECT_EQ(target(f.jet, "X.x"), 2);
  EXPECT_EQ(target(f.jet, "U"), 0);
  EXPECT_EQ(target(f.jet, "X.u"), 0);
  EXPECT_TRUE(cs.contains(act_on_jet(f.jet, point(e1, 1, {"0", "0", "2"}))));

  auto on = point(e1, 1, {"0", "4", "1"});
  EXPECT_TRUE(construct_frame(e1, cs, on).jet.is_identity());
}

TEST(ConstructFrame, OrderTwoExample) {
  auto e1 = load("e1");
  auto cs = section(e1, 2, {{"x", "0"}, {"u.x", "1"}, {"u.xx", "0"}});
  auto z = point(e1, 2, {"0", "0", "1", "3"});
  auto f = construct_frame(e1, cs, z);
  EXPECT_EQ(target(f.jet, "X.x"), 1);
  EXPECT_EQ(target(f.jet, "X.xx"), 3);
  auto moved = act_on_jet(f.jet, z);
  EXPECT_TRUE(cs.contains(moved));

  auto w = point(e1, 2, {"5/3", "-2", "-4", "7/2"});
  auto fw = construct_frame(e1, cs, w);
  EXPECT_EQ(target(fw.jet, "X"), 0);
  EXPECT_EQ(target(fw.jet, "X.x"), -4);
  EXPECT_EQ(target(fw.jet, "X.xx"), q("7/2"));
  EXPECT_TRUE(cs.contains(act_on_jet(fw.jet, w)));
}

TEST(ConstructFrame, Errors) {
  auto e1 = load("e1");
  auto cs = section(e1, 1, {{"x", "0"}, {"u.x", "1"}});
  try {
    construct_frame(e1, cs, point(e1, 1, {"0", "0", "0"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoSolution);
  }
  auto wrong_u = section(e1, 1, {{"u", "3"}, {"u.x", "1"}});
  try {
    construct_frame(e1, wrong_u, point(e1, 1, {"0", "0", "2"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoSolution);
  }
  EXPECT_THROW(construct_frame(e1, cs, point(e1, 2, {"0", "0", "1", "0"})), Error);
}

TEST(ConstructFrame, FloatFallback) {
  auto ps = parse_text(
      "pseudogroup \"scale\" { space { independent: x; dependent: u; } base_order: 1;"
      " determining { X - x = 0; X.u = 0; U.x = 0; U - u*U.u = 0; } }");
  auto cs = section(ps, 0, {{"u", "2"}});
  auto z = point(ps, 0, {"1", "3"});
  auto f = construct_frame(ps, cs, z);
  EXPECT_TRUE(f.exact);
  EXPECT_EQ(target(f.jet, "U"), 2);

  auto e2 = load("e2");
  auto quad = section(e2, 2, {{"x", "0"}, {"u.xx", "1"}});
  auto w = point(e2, 2, {"0", "1", "1", "2"});
  EXPECT_TRUE(check_transversality(quad, e2, w).transversal);
  auto fl = construct_frame(e2, quad, w);
  EXPECT_FALSE(fl.exact);
  EXPECT_NEAR(target(fl.jet, "X.x").get_d(), std::sqrt(2.0), 1e-9);
  EXPECT_LT(fl.residual, 1e-12);
  auto moved = act_on_jet(fl.jet, w);
  EXPECT_NEAR(moved.value(e2.space->lookup("u.xx")).get_d(), 1.0, 1e-9);
  try {
    construct_frame(e2, quad, w, SolverConfig{false});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonTriangular);
  }
}

TEST(MovingFrameChart, TransversalityAtAnchor) {
  auto e1 = load("e1");
  MovingFrameChart chart(e1, section(e1, 1, {{"x", "0"}, {"u.x", "1"}}), point(e1, 1, {"3", "1", "2"}));
  EXPECT_TRUE(chart.certificate().transversal);
  EXPECT_EQ(chart.order(), 1);
  try {
    MovingFrameChart bad(e1, section(e1, 1, {{"u", "0"}, {"u.x", "1"}}), point(e1, 1, {"0", "0", "1"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PreconditionViolation);
    EXPECT_NE(std::string(e.what()).find("stacked rank"), std::string::npos);
  }
  EXPECT_FALSE(chart.frame(point(e1, 1, {"0", "0", "0"})).has_value());
  EXPECT_FALSE(chart.frame(point(e1, 1, {"0", "0", "0"})).has_value());
  EXPECT_EQ(chart.outside_count(), 1u);
  EXPECT_THROW(chart.require(point(e1, 1, {"0", "0", "0"})), Error);
}

TEST(MovingFrameChart, ConcurrentQueries) {
  auto e1 = load("e1");
  MovingFrameChart chart(e1, section(e1, 2, {{"x", "0"}, {"u.x", "1"}, {"u.xx", "0"}}), point(e1, 2, {"0", "0", "1", "0"}));
  std::vector<std::thread> threads;
  std::vector<int> ok(4, 0);
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      RationalSampler rng(100);
      for (int i = 0; i < 20; ++i) {
        auto z = sample_point(e1.space, 2, rng);
        auto f = chart.frame(z);
        if (f && chart.cross_section().contains(act_on_jet(f->jet, z))) ++ok[static_cast<std::size_t>(t)];
      }
    });
  for (auto& th : threads) th.join();
  for (int t = 1; t < 4; ++t) EXPECT_EQ(ok[static_cast<std::size_t>(t)], ok[0]);
  EXPECT_GT(ok[0], 10);
}

TEST(GroupSampler, SatisfiesDeterminingEquations) {
  RationalSampler rng(5);
  for (const char* name : {"e1", "e2", "e3"}) {
    auto ps = load(name);
    for (int n = 0; n <= 3; ++n) {
      Vector z0{rng.rational(), rng.rational(), };
      auto g = sample_group_jet(ps, z0, n, rng);
      EXPECT_EQ(g.order, n);
      EXPECT_EQ(g.source, z0);
      if (n >= ps.base_order) {
        EXPECT_TRUE(detail::satisfies_determining(ps, g)) << name << " order " << n;
      }
      if (n >= 1) {
        EXPECT_TRUE(inverse(g.first_order()).has_value());
      }
    }
  }
}

TEST(Equivariance, Examples) {
  auto e1 = load("e1");
  MovingFrameChart chart(e1, section(e1, 1, {{"x", "0"}, {"u.x", "1"}}), point(e1, 1, {"0", "0", "2"}));
  auto z = point(e1, 1, {"0", "0", "2"});
  auto g = DiffeoJet::identity(e1.space, z.base(), 1);
  g.coef(0, {0}) = 3;
  auto lhs = jet_compose(chart.require(act_on_jet(g, z)).jet, g);
  EXPECT_EQ(lhs, chart.require(z).jet);
  EXPECT_EQ(target(lhs, "X"), 0);
  EXPECT_EQ(target(lhs, "X.x"), 2);

  auto id = DiffeoJet::identity(e1.space, z.base(), 1);
  EXPECT_EQ(jet_compose(chart.require(act_on_jet(id, z)).jet, id), chart.require(z).jet);

  auto rep = check_equivariance(chart, 30, 11);
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.checked, 30);
}

TEST(Equivariance, DetectsBrokenFrame) {
  auto e1 = load("e1");
  MovingFrameChart chart(e1, section(e1, 1, {{"x", "0"}, {"u.x", "1"}}), point(e1, 1, {"0", "0", "2"}));
  RationalSampler rng(2);
  int broken = 0;
  for (int i = 0; i < 10; ++i) {
    auto z = sample_point(e1.space, 1, rng);
    auto g = sample_group_jet(e1, z.base(), 1, rng);
    auto fz = chart.frame(z);
    auto fgz = chart.frame(act_on_jet(g, z));
    if (!fz || !fgz || g.is_identity()) continue;
    if (!(fgz->jet == fz->jet)) ++broken;
  }
  EXPECT_GT(broken, 0);
}

TEST(Invariants, Examples) {
  auto e1 = load("e1");
  MovingFrameChart chart(e1, section(e1, 1, {{"x", "0"}, {"u.x", "1"}}), point(e1, 1, {"0", "0", "2"}));
  auto inv = invariants(chart, point(e1, 1, {"0", "0", "2"}));
  ASSERT_EQ(inv.size(), 3u);
  EXPECT_EQ(inv[0].value, 0);
  EXPECT_TRUE(inv[0].normalized);
  EXPECT_EQ(inv[1].value, 0);
  EXPECT_FALSE(inv[1].normalized);
  EXPECT_EQ(inv[2].value, 1);
  EXPECT_TRUE(inv[2].normalized);
  EXPECT_EQ(invariants(chart, point(e1, 1, {"0", "5", "2"}))[1].value, 5);

  RationalSampler rng(9);
  for (int i = 0; i < 10; ++i) {
    auto z = sample_point(e1.space, 1, rng);
    if (!chart.frame(z)) continue;
    auto g = sample_group_jet(e1, z.base(), 1, rng);
    auto a = invariants(chart, z), b = invariants(chart, act_on_jet(g, z));
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].value, b[k].value);
  }
}

TEST(Invariants, OrderTwoOrbitConstant) {
  auto e1 = load("e1");
  MovingFrameChart chart(e1, section(e1, 2, {{"x", "0"}, {"u.x", "1"}, {"u.xx", "0"}}), point(e1, 2, {"0", "0", "1", "0"}));
  RationalSampler rng(4);
  int checked = 0;
  for (int i = 0; i < 20; ++i) {
    auto z = sample_point(e1.space, 2, rng);
    if (!chart.frame(z)) continue;
    auto g = sample_group_jet(e1, z.base(), 2, rng);
    auto a = invariants(chart, z), b = invariants(chart, act_on_jet(g, z));
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].value, b[k].value);
    EXPECT_EQ(a[1].value, z.values[1]);
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(Compatibility, Examples) {
  auto e1 = load("e1");
  MovingFrameChart f1(e1, section(e1, 1, {{"x", "0"}, {"u.x", "1"}}), point(e1, 1, {"0", "0", "1"}));
  MovingFrameChart f2(e1, section(e1, 2, {{"x", "0"}, {"u.x", "1"}, {"u.xx", "0"}}), point(e1, 2, {"0", "0", "1", "0"}));
  MovingFrameChart f2bad(e1, section(e1, 2, {{"x", "0"}, {"u.x", "2"}, {"u.xx", "0"}}), point(e1, 2, {"0", "0", "2", "0"}));

  auto self = check_compatibility(f1, f1, 10, 1);
  EXPECT_TRUE(self.compatible);
  EXPECT_EQ(self.checked, 10);

  auto nested = check_compatibility(f1, f2, 20, 3);
  EXPECT_TRUE(nested.compatible);
  EXPECT_EQ(nested.checked, 20);

  auto conflict = check_compatibility(f1, f2bad, 10, 3);
  EXPECT_FALSE(conflict.compatible);
  EXPECT_FALSE(conflict.mismatches.empty());

  EXPECT_THROW(check_compatibility(f2, f1, 5, 1), Error);
  auto e2 = load("e2");
  MovingFrameChart other(e2, section(e2, 1, {{"x", "0"}, {"u.x", "1"}}), point(e2, 1, {"0", "0", "1"}));
  try {
    check_compatibility(other, f2, 5, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DomainMismatch);
  }
}
