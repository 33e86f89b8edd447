#include <gtest/gtest.h>

#include <filesystem>

#include "testing.hpp"

using namespace jetfree;
using namespace jetfree::testing;

namespace {

ParseResult parse(const std::string& text) { return parse_spec(SpecSource(text, "test.psg")); }

const char* kHeader = "pseudogroup \"t\" {\n  space { independent: x; dependent: u; }\n  base_order: 1;\n";

}  // namespace

TEST(Parse, E1) {
  auto ps = load("e1");
  EXPECT_EQ(ps.name, "e1");
  EXPECT_EQ(ps.base_order, 1);
  ASSERT_EQ(ps.determining.size(), 2u);
  const JetSpace& js = *ps.space;
  EXPECT_EQ(ps.determining[0], var(js, "U") - var(js, "u"));
  EXPECT_EQ(ps.determining[1], var(js, "X.u"));
}

TEST(Parse, InfinitesimalE3) {
  auto res = parse(std::string(kHeader) + "  infinitesimal { zeta{u} - u * zeta{x}.x = 0; }\n}\n");
  ASSERT_TRUE(res.ok());
  const JetSpace& js = *res.spec->space;
  ASSERT_EQ(res.spec->infinitesimal.size(), 1u);
  EXPECT_EQ(res.spec->infinitesimal[0], var(js, "zeta{u}") - var(js, "u") * var(js, "zeta{x}.x"));
}

TEST(Parse, UnknownSlotHasSpan) {
  std::string text = std::string(kHeader) + "  determining { U.q = 0; }\n}\n";
  auto res = parse(text);
  EXPECT_FALSE(res.ok());
  ASSERT_FALSE(res.diagnostics.empty());
  const auto& d = res.diagnostics[0];
  EXPECT_EQ(d.code, "UnknownCoordinate");
  EXPECT_EQ(text.substr(d.span.offset, d.span.length), "U.q");
  EXPECT_EQ(d.span.line, 4u);
}

TEST(Parse, SuffixIsCanonicalized) {
  auto res = parse("pseudogroup \"t\" { space { independent: x; dependent: u; } base_order: 2; determining { U.ux - U.xu = 0; X.ux = 0; } }");
  ASSERT_TRUE(res.ok());
  ASSERT_EQ(res.spec->determining.size(), 1u);
  EXPECT_EQ(res.spec->determining[0], var(*res.spec->space, "X.xu"));
  ASSERT_EQ(res.diagnostics.size(), 1u);
  EXPECT_EQ(res.diagnostics[0].code, "TrivialEquation");
}

TEST(Parse, MultiCharacterNamesUseBraces) {
  auto res = parse("pseudogroup \"t\" { space { independent: x1, x2; dependent: w; } base_order: 2; "
                   "determining { W.{x1}{x1} = 0; X1.{w} = 0; W - w = 0; } }");
  ASSERT_TRUE(res.ok()) << (res.diagnostics.empty() ? "" : res.diagnostics[0].message);
  EXPECT_EQ(res.spec->determining[0], var(*res.spec->space, "W.{x1}{x1}"));
}

TEST(Parse, PrecedenceAndPowers) {
  auto res = parse(std::string(kHeader) + "  determining { U - -u^2*3/2 + (x - 1)^-1 - 2^2^3*x = 0; }\n}\n");
  ASSERT_TRUE(res.ok());
  const JetSpace& js = *res.spec->space;
  Expr u = var(js, "u"), x = var(js, "x");
  EXPECT_EQ(res.spec->determining[0], var(js, "U") + u * u * Expr(q("3/2")) + (x - Expr(1)).inverse() - Expr(256) * x);
}

TEST(Parse, RecoversAndReportsSeveralErrors) {
  auto res = parse(std::string(kHeader) + "  determining { U.q = 0; U - 1.5 = 0; X.u = 0; }\n}\n");
  EXPECT_FALSE(res.ok());
  ASSERT_EQ(res.diagnostics.size(), 2u);
  EXPECT_EQ(res.diagnostics[0].code, "UnknownCoordinate");
  EXPECT_EQ(res.diagnostics[1].code, "NonRationalLiteral");
}

TEST(Parse, WarnsWhenOrderExceedsBase) {
  auto res = parse(std::string(kHeader) + "  determining { X.xx = 0; U - u = 0; }\n}\n");
  ASSERT_TRUE(res.ok());
  ASSERT_EQ(res.diagnostics.size(), 1u);
  EXPECT_EQ(res.diagnostics[0].severity, Severity::Warning);
  EXPECT_EQ(res.diagnostics[0].code, "OrderAboveBase");
}

TEST(Parse, CrLfIsNormalized) {
  auto res = parse("pseudogroup \"t\" {\r\n space { independent: x; dependent: u; }\r\n base_order: 1;\r\n determining { U.q = 0; }\r\n}\r\n");
  ASSERT_FALSE(res.diagnostics.empty());
  EXPECT_EQ(res.diagnostics[0].span.line, 4u);
}

TEST(Parse, NegativeFixturesAllFailWithSpans) {
  namespace fs = std::filesystem;
  int count = 0;
  for (const auto& entry : fs::directory_iterator(source_path("tests/fixtures"))) {
    std::string text = read_file(entry.path().string());
    SpecSource src(text, entry.path().filename().string());
    auto res = parse_spec(src);
    EXPECT_FALSE(res.ok()) << entry.path();
    ASSERT_TRUE(res.has_errors()) << entry.path();
    for (const auto& d : res.diagnostics) {
      EXPECT_LE(d.span.offset + d.span.length, src.text().size() + 1) << entry.path();
      EXPECT_EQ(src.line_col(std::min(d.span.offset, src.text().size())), std::make_pair(d.span.line, d.span.column));
    }
    ++count;
  }
  EXPECT_GE(count, 8);
}

TEST(Parse, IsTotalOnGarbage) {
  RationalSampler rng(3);
  const std::string alphabet = "{}();:=+-*/^,.xuXU0123456789 \n\"zeta#e";
  for (int i = 0; i < 300; ++i) {
    std::string s = kHeader;
    int len = static_cast<int>(rng.integer(0, 40));
    for (int k = 0; k < len; ++k) s.push_back(alphabet[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(alphabet.size()) - 1))]);
    auto a = parse(s), b = parse(s);
    EXPECT_EQ(a.ok(), b.ok());
    EXPECT_EQ(a.diagnostics.size(), b.diagnostics.size());
  }
}

TEST(Serialize, RoundTripsBundledSpecs) {
  for (const char* name : {"e1", "e2", "e3"}) {
    auto ps = load(name);
    auto text = serialize_spec(ps);
    auto back = parse(text);
    ASSERT_TRUE(back.ok()) << text;
    EXPECT_EQ(*back.spec, ps) << name;
  }
}

TEST(Serialize, RationalCoefficientSurvives) {
  auto res = parse(std::string(kHeader) + "  determining { U - 3/2*u*X.x = 0; }\n}\n");
  ASSERT_TRUE(res.ok());
  auto text = serialize_spec(*res.spec);
  EXPECT_NE(text.find("3/2"), std::string::npos);
  EXPECT_EQ(*parse(text).spec, *res.spec);
}

TEST(Serialize, RationalFunctionsRoundTrip) {
  auto res = parse(std::string(kHeader) + "  determining { U - u/(1 + x^2) = 0; X.u*x = 0; }\n}\n");
  ASSERT_TRUE(res.ok());
  auto text = serialize_spec(*res.spec);
  EXPECT_EQ(*parse(text).spec, *res.spec);
}
