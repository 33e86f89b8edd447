#include <gtest/gtest.h>

#include "jetfree/expr.hpp"

using namespace jetfree;

namespace {

constexpr VarId kX = 0, kU = 1, kY = 2;

Expr x() { return Expr::variable(kX); }
Expr u() { return Expr::variable(kU); }
Expr y() { return Expr::variable(kY); }

// Random polynomial in x, u, y with small integer coefficients.
Expr random_poly(RationalSampler& rng, int terms, int max_deg) {
  Expr e;
  for (int t = 0; t < terms; ++t) {
    Expr m(rng.rational(4));
    for (VarId v : {kX, kU, kY}) m *= Expr::variable(v).pow(rng.integer(0, max_deg));
    e += m;
  }
  return e;
}

Expr random_expr(RationalSampler& rng) {
  Expr den = random_poly(rng, 2, 2);
  if (den.is_zero()) den = Expr(1);
  return random_poly(rng, 3, 2) / den;
}

}  // namespace

TEST(Scalar, ParsesExactRationals) {
  EXPECT_EQ(parse_scalar("3/2"), Scalar(3, 2));
  EXPECT_EQ(parse_scalar("-6/4"), Scalar(-3, 2));
  EXPECT_EQ(parse_scalar("+7"), Scalar(7));
  EXPECT_FALSE(try_parse_scalar("1.5"));
  EXPECT_FALSE(try_parse_scalar("1/0"));
  EXPECT_FALSE(try_parse_scalar("1e3"));
  EXPECT_FALSE(try_parse_scalar(""));
}

TEST(Scalar, SamplerIsDeterministic) {
  RationalSampler a(7), b(7);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.rational(), b.rational());
}

TEST(ExprArith, AdditiveInverseIsZero) {
  Expr e = x() + (-x());
  EXPECT_TRUE(e.is_zero());
  EXPECT_EQ(e, Expr(0));
}

TEST(ExprArith, CancelsPolynomialGcd) {
  // (x^2 - 1)/(x - 1) = x + 1
  Expr e = (x() * x() - 1) / (x() - 1);
  EXPECT_EQ(e, x() + 1);
  EXPECT_TRUE(e.is_polynomial());
}

TEST(ExprArith, CancelsMonomialFactor) {
  EXPECT_EQ((u() * x()) * (Expr(1) / x()), u());
}

TEST(ExprArith, MultivariateGcd) {
  Expr a = (x() + u()) * (x() * y() - 2);
  Expr b = (x() + u()) * (u() * u() + y());
  Expr q = a / b;
  EXPECT_EQ(q.num(), ((x() * y() - 2)).num());
  EXPECT_EQ(q.den(), (u() * u() + y()).num());
  Poly g = gcd((x() * x() * u() - u()).num(), (x() * u() + u()).num());
  EXPECT_EQ(g, (x() * u() + u()).num());
}

TEST(ExprArith, DenominatorIsMonic) {
  Expr e = Expr(1) / (Expr(3) * x() + 6);
  EXPECT_EQ(e.den().leading_coef(), 1);
  EXPECT_EQ(e.num().constant_value(), Scalar(1, 3));
}

TEST(ExprArith, DivisionByZeroThrows) {
  try {
    (void)(x() / (x() - x()));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::DivisionByZero);
  }
}

TEST(ExprDiff, PowerRule) { EXPECT_EQ((x() * x() * u()).diff(kX), Expr(2) * x() * u()); }

TEST(ExprDiff, QuotientRule) { EXPECT_EQ((Expr(1) / x()).diff(kX), Expr(-1) / (x() * x())); }

TEST(ExprDiff, IndependentVariables) { EXPECT_TRUE(u().diff(kX).is_zero()); }

TEST(ExprSubst, BindsToZero) { EXPECT_EQ(substitute(x() + u(), {{kX, Expr(0)}}), u()); }

TEST(ExprSubst, LinearizationAtZero) {
  // Z -> z + t*zeta in Z^2, d/dt at t = 0 gives 2 z zeta.
  constexpr VarId kZ = 3, kz = 4, kT = 5, kZeta = 6;
  Expr sq = Expr::variable(kZ) * Expr::variable(kZ);
  Expr lin = substitute(sq, {{kZ, Expr::variable(kz) + Expr::variable(kT) * Expr::variable(kZeta)}});
  Expr d = substitute(lin.diff(kT), {{kT, Expr(0)}});
  EXPECT_EQ(d, Expr(2) * Expr::variable(kz) * Expr::variable(kZeta));
}

TEST(ExprSubst, ReciprocalSubstitution) {
  Expr e = Expr(1) / (Expr(1) + x());
  EXPECT_EQ(substitute(e, {{kX, Expr(1) / x()}}), x() / (x() + 1));
}

TEST(ExprEval, Exact) {
  EXPECT_EQ((x() * x() + 1).eval({{kX, Scalar(3, 2)}}), Scalar(13, 4));
  EXPECT_EQ(Expr(5).eval({}), Scalar(5));
}

TEST(ExprEval, Errors) {
  try {
    (void)(Expr(1) / x()).eval({{kX, Scalar(0)}});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::DivisionByZero);
  }
  try {
    (void)(x() + u()).eval({{kX, Scalar(0)}});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::UnboundVariable);
  }
}

TEST(ExprProperties, FieldAxiomsOnRandomSamples) {
  RationalSampler rng(11);
  for (int i = 0; i < 40; ++i) {
    Expr a = random_expr(rng), b = random_expr(rng), c = random_expr(rng);
    EXPECT_EQ((a + b) + c, a + (b + c));
    EXPECT_EQ((a * b) * c, a * (b * c));
    EXPECT_EQ(a * (b + c), a * b + a * c);
    EXPECT_EQ(a - a, Expr(0));
    if (!b.is_zero()) {
      EXPECT_EQ((a / b) * b, a);
    }
  }
}

TEST(ExprProperties, MixedPartialsCommute) {
  RationalSampler rng(12);
  for (int i = 0; i < 30; ++i) {
    Expr e = random_expr(rng);
    EXPECT_EQ(e.diff(kX).diff(kU), e.diff(kU).diff(kX));
    EXPECT_EQ(e.diff(kY).diff(kX), e.diff(kX).diff(kY));
  }
}

TEST(ExprProperties, EvalCommutesWithSubstitution) {
  RationalSampler rng(13);
  int checked = 0;
  for (int i = 0; i < 40; ++i) {
    Expr e = random_expr(rng);
    Expr bx = random_poly(rng, 2, 1), bu = random_poly(rng, 2, 1);
    Bindings p{{kX, rng.rational()}, {kU, rng.rational()}, {kY, rng.rational()}};
    try {
      Expr s = substitute(e, {{kX, bx}, {kU, bu}});
      Bindings composed{{kX, bx.eval(p)}, {kU, bu.eval(p)}, {kY, p[kY]}};
      Scalar lhs = s.eval(p);
      EXPECT_EQ(lhs, e.eval(composed));
      ++checked;
    } catch (const Error&) {
      // undefined at the sample
    }
  }
  EXPECT_GT(checked, 20);
}

TEST(ExprProperties, GcdDividesBoth) {
  RationalSampler rng(14);
  for (int i = 0; i < 30; ++i) {
    Poly common = random_poly(rng, 2, 2).num();
    Poly a = (random_poly(rng, 3, 2).num()) * common;
    Poly b = (random_poly(rng, 3, 2).num()) * common;
    if (a.is_zero() || b.is_zero()) continue;
    Poly g = gcd(a, b);
    ASSERT_TRUE(exact_divide(a, g));
    ASSERT_TRUE(exact_divide(b, g));
    if (!common.is_zero()) {
      EXPECT_TRUE(exact_divide(g, common.monic()));
    }
  }
}
