#pragma once

#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "jetfree/detsys.hpp"
#include "jetfree/print.hpp"

namespace jetfree {

/// Pseudogroup specification text. CRLF and lone CR are normalized to LF on
/// construction, and spans refer to the normalized text.
class SpecSource {
 public:
  SpecSource(std::string text, std::string origin = "<input>") : origin_(std::move(origin)) {
    text_.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '\r') {
        text_.push_back('\n');
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      } else {
        text_.push_back(text[i]);
      }
    }
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < text_.size(); ++i)
      if (text_[i] == '\n') line_starts_.push_back(i + 1);
  }

  const std::string& text() const { return text_; }
  const std::string& origin() const { return origin_; }

  /// 1-based line and column of a byte offset.
  std::pair<std::size_t, std::size_t> line_col(std::size_t offset) const {
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), offset);
    std::size_t line = static_cast<std::size_t>(it - line_starts_.begin());
    return {line, offset - line_starts_[line - 1] + 1};
  }

 private:
  std::string text_;
  std::string origin_;
  std::vector<std::size_t> line_starts_;
};

struct Span {
  std::size_t offset = 0;
  std::size_t line = 1;
  std::size_t column = 1;
  std::size_t length = 0;
};

enum class Severity { Error, Warning };

struct ParseDiagnostic {
  Severity severity = Severity::Error;
  std::string code;
  std::string message;
  Span span;
};

struct ParseResult {
  std::optional<PseudogroupSpec> spec;
  std::vector<ParseDiagnostic> diagnostics;

  bool ok() const { return spec.has_value(); }
  bool has_errors() const {
    for (const auto& d : diagnostics)
      if (d.severity == Severity::Error) return true;
    return false;
  }
};

struct ParseOptions {
  int cap = 8;  // registry order cap; raised to base_order + 4 when smaller
};

inline std::string format_diagnostic(const SpecSource& src, const ParseDiagnostic& d) {
  std::ostringstream os;
  os << src.origin() << ":" << d.span.line << ":" << d.span.column << ": "
     << (d.severity == Severity::Error ? "error" : "warning") << " [" << d.code << "] " << d.message;
  return os.str();
}

namespace dsl_detail {

enum class Tok { Ident, Jet, Int, Decimal, String, Punct, End, Bad };

struct Token {
  Tok kind;
  std::string text;
  std::size_t offset;
  std::size_t length;
};

struct Failure {
  std::string code;
  std::string message;
  std::size_t offset;
  std::size_t length;
};

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

/// Returns the offset of the first invalid UTF-8 byte, if any.
inline std::optional<std::size_t> invalid_utf8(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 0;
    if (len == 0 || i + len > s.size()) return i;
    for (std::size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return i;
    i += len;
  }
  return std::nullopt;
}

class Lexer {
 public:
  explicit Lexer(const std::string& s) : s_(s) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip();
      if (i_ >= s_.size()) {
        out.push_back({Tok::End, "", s_.size(), 0});
        return out;
      }
      out.push_back(next());
    }
  }

 private:
  void skip() {
    while (i_ < s_.size()) {
      char c = s_[i_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i_;
      } else if (c == '#' || (c == '/' && i_ + 1 < s_.size() && s_[i_ + 1] == '/')) {
        while (i_ < s_.size() && s_[i_] != '\n') ++i_;
      } else {
        break;
      }
    }
  }

  bool suffix_follows(std::size_t at) const {
    return at + 1 < s_.size() && s_[at] == '.' && (ident_char(s_[at + 1]) || s_[at + 1] == '{');
  }

  // Suffix slots: single identifier characters or {name} groups.
  bool read_suffix() {
    ++i_;  // '.'
    std::size_t start = i_;
    while (i_ < s_.size()) {
      if (ident_char(s_[i_])) {
        ++i_;
      } else if (s_[i_] == '{') {
        std::size_t j = i_ + 1;
        while (j < s_.size() && ident_char(s_[j])) ++j;
        if (j == i_ + 1 || j >= s_.size() || s_[j] != '}') return false;
        i_ = j + 1;
      } else {
        break;
      }
    }
    return i_ > start;
  }

  Token next() {
    std::size_t start = i_;
    char c = s_[i_];
    if (ident_start(c)) {
      while (i_ < s_.size() && ident_char(s_[i_])) ++i_;
      std::string word = s_.substr(start, i_ - start);
      bool jet = false;
      if (word == "zeta" && i_ < s_.size() && s_[i_] == '{') {
        std::size_t j = i_ + 1;
        while (j < s_.size() && ident_char(s_[j])) ++j;
        if (j == i_ + 1 || j >= s_.size() || s_[j] != '}') {
          i_ = std::min(j, s_.size());
          return {Tok::Bad, s_.substr(start, i_ - start), start, i_ - start};
        }
        i_ = j + 1;
        jet = true;
      }
      if (suffix_follows(i_)) {
        if (!read_suffix()) return {Tok::Bad, s_.substr(start, i_ - start), start, i_ - start};
        jet = true;
      }
      return {jet ? Tok::Jet : Tok::Ident, s_.substr(start, i_ - start), start, i_ - start};
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
      bool decimal = false;
      if (i_ < s_.size() && s_[i_] == '.') {
        decimal = true;
        ++i_;
        while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
      }
      if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
        std::size_t j = i_ + 1;
        if (j < s_.size() && (s_[j] == '+' || s_[j] == '-')) ++j;
        if (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) {
          decimal = true;
          i_ = j;
          while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
        }
      }
      return {decimal ? Tok::Decimal : Tok::Int, s_.substr(start, i_ - start), start, i_ - start};
    }
    if (c == '"') {
      std::string val;
      ++i_;
      while (i_ < s_.size() && s_[i_] != '"' && s_[i_] != '\n') {
        if (s_[i_] == '\\' && i_ + 1 < s_.size()) ++i_;
        val.push_back(s_[i_++]);
      }
      if (i_ >= s_.size() || s_[i_] != '"') return {Tok::Bad, s_.substr(start, i_ - start), start, i_ - start};
      ++i_;
      return {Tok::String, val, start, i_ - start};
    }
    if (std::string_view("{}();:=+-*/^,").find(c) != std::string_view::npos) {
      ++i_;
      return {Tok::Punct, std::string(1, c), start, 1};
    }
    // Consume a whole UTF-8 sequence so the span covers one character.
    ++i_;
    while (i_ < s_.size() && (static_cast<unsigned char>(s_[i_]) >> 6) == 0x2) ++i_;
    return {Tok::Bad, s_.substr(start, i_ - start), start, i_ - start};
  }

  const std::string& s_;
  std::size_t i_ = 0;
};

enum class Block { Determining, Infinitesimal };

class Parser {
 public:
  Parser(const SpecSource& src, ParseOptions opt) : src_(src), opt_(opt) {}

  ParseResult run() {
    ParseResult res;
    if (auto bad = invalid_utf8(src_.text())) {
      diag(res, Severity::Error, "InvalidEncoding", "input is not valid UTF-8", *bad, 1);
      return res;
    }
    toks_ = Lexer(src_.text()).run();
    try {
      parse_spec(res);
    } catch (const Failure& f) {
      diag(res, Severity::Error, f.code, f.message, f.offset, f.length);
    }
    if (res.has_errors()) res.spec.reset();
    return res;
  }

 private:
  void diag(ParseResult& r, Severity sev, std::string code, std::string msg, std::size_t off, std::size_t len) {
    auto [line, col] = src_.line_col(std::min(off, src_.text().size()));
    r.diagnostics.push_back({sev, std::move(code), std::move(msg), {off, line, col, len}});
  }

  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void fail(const Token& t, const std::string& code, const std::string& msg) const {
    throw Failure{code, msg, t.offset, std::max<std::size_t>(t.length, 1)};
  }

  static std::string describe(const Token& t) {
    if (t.kind == Tok::End) return "end of input";
    return "'" + t.text + "'";
  }

  bool is_punct(const Token& t, char c) const { return t.kind == Tok::Punct && t.text[0] == c; }

  void expect_punct(char c) {
    const Token& t = peek();
    if (t.kind == Tok::Bad) fail(t, "SyntaxError", "unexpected character " + describe(t));
    if (!is_punct(t, c)) fail(t, "SyntaxError", std::string("expected '") + c + "' but found " + describe(t));
    take();
  }

  void expect_word(const std::string& w) {
    const Token& t = peek();
    if (t.kind != Tok::Ident || t.text != w) fail(t, "SyntaxError", "expected '" + w + "' but found " + describe(t));
    take();
  }

  std::vector<std::string> names() {
    std::vector<std::string> out;
    for (;;) {
      const Token& t = peek();
      if (t.kind != Tok::Ident) fail(t, "SyntaxError", "expected a coordinate name but found " + describe(t));
      out.push_back(take().text);
      if (!is_punct(peek(), ',')) break;
      take();
    }
    return out;
  }

  void parse_spec(ParseResult& res) {
    expect_word("pseudogroup");
    const Token& name = peek();
    if (name.kind != Tok::String) fail(name, "SyntaxError", "expected the pseudogroup name as a string");
    std::string title = take().text;
    expect_punct('{');
    const Token& space_tok = peek();
    expect_word("space");
    expect_punct('{');
    expect_word("independent");
    expect_punct(':');
    SpaceSpec space;
    space.independent = names();
    expect_punct(';');
    expect_word("dependent");
    expect_punct(':');
    space.dependent = names();
    expect_punct(';');
    expect_punct('}');
    try {
      validate(space, true);
    } catch (const Error& e) {
      fail(space_tok, "InvalidSpec", e.what());
    }
    expect_word("base_order");
    expect_punct(':');
    const Token& ord = peek();
    if (ord.kind != Tok::Int) fail(ord, "SyntaxError", "expected an integer base order");
    int base_order = 0;
    try {
      base_order = std::stoi(take().text);
    } catch (const std::exception&) {
      fail(ord, "SyntaxError", "base order out of range");
    }
    if (base_order < 1 || base_order > 64) fail(ord, "InvalidSpec", "base order must be between 1 and 64");
    expect_punct(';');

    PseudogroupSpec ps;
    ps.name = title;
    ps.base_order = base_order;
    ps.space = JetSpace::make(space, std::max(opt_.cap, base_order + 4));
    space_ = ps.space;

    bool seen_det = false, seen_inf = false;
    while (peek().kind == Tok::Ident && (peek().text == "determining" || peek().text == "infinitesimal")) {
      const Token& kw = take();
      bool det = kw.text == "determining";
      if ((det && seen_det) || (!det && seen_inf)) fail(kw, "SyntaxError", "duplicate '" + kw.text + "' block");
      if (det && seen_inf) fail(kw, "SyntaxError", "'determining' must precede 'infinitesimal'");
      (det ? seen_det : seen_inf) = true;
      block(res, det ? Block::Determining : Block::Infinitesimal, det ? ps.determining : ps.infinitesimal, base_order);
    }
    expect_punct('}');
    if (peek().kind != Tok::End) fail(peek(), "SyntaxError", "unexpected " + describe(peek()) + " after the specification");
    if (!res.has_errors()) res.spec = std::move(ps);
  }

  void block(ParseResult& res, Block kind, std::vector<Expr>& out, int base_order) {
    const Token& open = peek();
    expect_punct('{');
    int count = 0;
    while (!is_punct(peek(), '}')) {
      if (peek().kind == Tok::End) fail(peek(), "SyntaxError", "unterminated equation block");
      std::size_t eq_start = peek().offset;
      try {
        kind_ = kind;
        max_order_ = -1;
        Expr lhs = sum();
        expect_punct('=');
        Expr rhs = sum();
        const Token& semi = peek();
        expect_punct(';');
        Expr e = lhs - rhs;
        std::size_t len = semi.offset - eq_start;
        if (e.is_zero()) {
          diag(res, Severity::Warning, "TrivialEquation", "equation is identically satisfied", eq_start, len);
        } else {
          if (kind == Block::Infinitesimal) {
            try {
              detail::check_homogeneous(*space_, e);
            } catch (const Error& err) {
              throw Failure{"NotLinear", err.what(), eq_start, len};
            }
          }
          if (max_order_ > base_order)
            diag(res, Severity::Warning, "OrderAboveBase",
                 "equation has order " + std::to_string(max_order_) + ", above the declared base order " + std::to_string(base_order),
                 eq_start, len);
          out.push_back(std::move(e));
        }
        ++count;
      } catch (const Failure& f) {
        diag(res, Severity::Error, f.code, f.message, f.offset, f.length);
        recover();
      }
    }
    take();
    if (count == 0) fail(open, "SyntaxError", "equation block is empty");
  }

  void recover() {
    while (peek().kind != Tok::End && !is_punct(peek(), ';') && !is_punct(peek(), '}')) take();
    if (is_punct(peek(), ';')) take();
  }

  Expr sum() {
    Expr acc = term();
    while (is_punct(peek(), '+') || is_punct(peek(), '-')) {
      bool minus = take().text[0] == '-';
      Expr rhs = term();
      acc = minus ? acc - rhs : acc + rhs;
    }
    return acc;
  }

  Expr term() {
    Expr acc = unary();
    while (is_punct(peek(), '*') || is_punct(peek(), '/')) {
      const Token& op = take();
      const Token& at = peek();
      Expr rhs = unary();
      if (op.text[0] == '*') {
        acc = acc * rhs;
      } else {
        if (rhs.is_zero()) fail(at, "DivisionByZero", "division by zero");
        acc = acc / rhs;
      }
    }
    return acc;
  }

  Expr unary() {
    if (is_punct(peek(), '-')) {
      take();
      return -unary();
    }
    return power();
  }

  long exponent() {
    bool neg = false;
    if (is_punct(peek(), '-')) {
      take();
      neg = true;
    }
    const Token& t = peek();
    if (t.kind == Tok::Decimal) fail(t, "NonRationalLiteral", "exponents must be integers");
    if (t.kind != Tok::Int) fail(t, "SyntaxError", "expected an integer exponent but found " + describe(t));
    take();
    long e = 0;
    try {
      e = std::stol(t.text);
    } catch (const std::exception&) {
      fail(t, "SyntaxError", "exponent out of range");
    }
    if (e > 64) fail(t, "SyntaxError", "exponent too large");
    if (is_punct(peek(), '^')) {
      take();
      long rest = exponent();
      if (rest < 0) fail(t, "SyntaxError", "nested exponent must be nonnegative");
      long r = 1;
      for (long i = 0; i < rest; ++i) {
        r *= e;
        if (r > 64 || r < -64) fail(t, "SyntaxError", "exponent too large");
      }
      e = r;
    }
    return neg ? -e : e;
  }

  Expr power() {
    const Token& start = peek();
    Expr base = primary();
    if (is_punct(peek(), '^')) {
      take();
      long e = exponent();
      if (e < 0 && base.is_zero()) fail(start, "DivisionByZero", "negative power of zero");
      return base.pow(e);
    }
    return base;
  }

  Expr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Int: {
        take();
        return Expr(Scalar(mpz_class(t.text)));
      }
      case Tok::Decimal:
        fail(t, "NonRationalLiteral", "decimal literal " + describe(t) + " is not allowed; write a rational such as 3/2");
      case Tok::Ident:
      case Tok::Jet: {
        take();
        if (t.kind == Tok::Ident && is_punct(peek(), '('))
          fail(t, "NonRationalLiteral", "function " + describe(t) + " is not supported; only rational expressions are allowed");
        return Expr::variable(resolve(t));
      }
      case Tok::Punct:
        if (t.text[0] == '(') {
          take();
          Expr e = sum();
          expect_punct(')');
          return e;
        }
        fail(t, "SyntaxError", "unexpected " + describe(t) + " in expression");
      case Tok::Bad:
        fail(t, "SyntaxError", "malformed token " + describe(t));
      default:
        fail(t, "SyntaxError", "unexpected " + describe(t) + " in expression");
    }
  }

  int slot_of(const std::string& name) const {
    const auto all = space_->spec().names();
    for (std::size_t i = 0; i < all.size(); ++i)
      if (all[i] == name) return static_cast<int>(i);
    return -1;
  }

  VarId resolve(const Token& t) {
    const JetSpace& js = *space_;
    std::string head = t.text, suffix;
    std::size_t dot = std::string::npos;
    if (head.rfind("zeta{", 0) == 0) {
      std::size_t close = head.find('}');
      if (close + 1 < head.size()) dot = close + 1;
    } else {
      dot = head.find('.');
    }
    if (dot != std::string::npos) {
      suffix = head.substr(dot + 1);
      head = head.substr(0, dot);
    }
    MultiIndex idx;
    for (std::size_t i = 0; i < suffix.size();) {
      std::string slot;
      if (suffix[i] == '{') {
        std::size_t close = suffix.find('}', i);
        slot = suffix.substr(i + 1, close - i - 1);
        i = close + 1;
      } else {
        slot = suffix.substr(i, 1);
        ++i;
      }
      int s = slot_of(slot);
      if (s < 0) fail(t, "UnknownCoordinate", "unknown coordinate '" + slot + "' in jet suffix of " + describe(t));
      idx.push_back(s);
    }
    std::sort(idx.begin(), idx.end());
    int order = static_cast<int>(idx.size());
    if (order > js.cap()) fail(t, "OrderCapExceeded", "jet order " + std::to_string(order) + " exceeds the supported cap");
    const int p = js.p();
    auto note_order = [&](int k) { max_order_ = std::max(max_order_, k); };
    if (head.rfind("zeta{", 0) == 0) {
      std::string inner = head.substr(5, head.size() - 6);
      int a = slot_of(inner);
      if (a < 0) fail(t, "UnknownCoordinate", "unknown coordinate '" + inner + "' in " + describe(t));
      if (kind_ == Block::Determining) fail(t, "MixedKinds", "vector-field jet " + describe(t) + " inside a determining block");
      note_order(order);
      return js.zeta(a, idx);
    }
    int src = slot_of(head);
    if (src >= 0) {
      if (idx.empty()) return js.source(src);
      if (src < p) fail(t, "UnknownCoordinate", "independent variable " + describe(t) + " has no jets");
      for (int s : idx)
        if (s >= p) fail(t, "UnknownCoordinate", "submanifold jets are indexed by independent variables only: " + describe(t));
      fail(t, "MixedKinds", "submanifold jet " + describe(t) + " cannot appear in a pseudogroup specification");
    }
    for (int a = 0; a < js.m(); ++a) {
      if (upper_name(js.spec().names()[static_cast<std::size_t>(a)]) == head) {
        if (kind_ == Block::Infinitesimal) fail(t, "MixedKinds", "target jet " + describe(t) + " inside an infinitesimal block");
        note_order(order);
        return js.target(a, idx);
      }
    }
    fail(t, "UnknownCoordinate", "unknown coordinate " + describe(t));
  }

  const SpecSource& src_;
  ParseOptions opt_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  JetSpacePtr space_;
  Block kind_ = Block::Determining;
  int max_order_ = -1;
};

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
  return out;
}

}  // namespace dsl_detail

/// Parses a .psg specification. Never throws on bad input; errors are
/// reported as diagnostics with spans.
inline ParseResult parse_spec(const SpecSource& src, ParseOptions opt = {}) {
  return dsl_detail::Parser(src, opt).run();
}

/// Normalized text form; parse_spec of the result reproduces `ps`.
inline std::string serialize_spec(const PseudogroupSpec& ps) {
  const JetSpace& js = *ps.space;
  std::ostringstream os;
  os << "pseudogroup " << dsl_detail::quote(ps.name) << " {\n";
  os << "  space { independent: " << dsl_detail::join(js.spec().independent)
     << "; dependent: " << dsl_detail::join(js.spec().dependent) << "; }\n";
  os << "  base_order: " << ps.base_order << ";\n";
  auto block = [&](const char* kw, const std::vector<Expr>& eqs) {
    if (eqs.empty()) return;
    os << "  " << kw << " {\n";
    for (const auto& e : eqs) os << "    " << format_expr(js, e) << " = 0;\n";
    os << "  }\n";
  };
  block("determining", ps.determining);
  block("infinitesimal", ps.infinitesimal);
  os << "}\n";
  return os.str();
}

}  // namespace jetfree
