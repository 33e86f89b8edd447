#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "jetfree/error.hpp"

namespace jetfree {

/// Exact rational number. GMP keeps it canonical (positive denominator,
/// reduced) as long as every constructor path calls canonicalize().
using Scalar = mpq_class;

inline bool is_integer(const Scalar& s) { return s.get_den() == 1; }

inline std::string to_string(const Scalar& s) { return s.get_str(); }

/// Parses "n" or "n/d" with optional sign. Decimal points and exponents are
/// rejected: every value that enters the engine must be exact.
inline std::optional<Scalar> try_parse_scalar(std::string_view text) {
  std::string t;
  for (char c : text)
    if (c != ' ' && c != '\t') t.push_back(c);
  if (t.empty()) return std::nullopt;
  std::size_t slash = t.find('/');
  auto valid_int = [](std::string_view s, bool allow_sign) {
    std::size_t i = 0;
    if (allow_sign && !s.empty() && (s[0] == '-' || s[0] == '+')) i = 1;
    if (i >= s.size()) return false;
    for (; i < s.size(); ++i)
      if (s[i] < '0' || s[i] > '9') return false;
    return true;
  };
  std::string num = slash == std::string::npos ? t : t.substr(0, slash);
  std::string den = slash == std::string::npos ? "1" : t.substr(slash + 1);
  if (!valid_int(num, true) || !valid_int(den, false)) return std::nullopt;
  if (num[0] == '+') num.erase(0, 1);
  mpz_class d(den);
  if (d == 0) return std::nullopt;
  Scalar s(mpz_class(num), d);
  s.canonicalize();
  return s;
}

inline Scalar parse_scalar(std::string_view text) {
  auto s = try_parse_scalar(text);
  if (!s) throw Error(ErrorKind::InvalidArgument, "not an exact rational: '" + std::string(text) + "'");
  return *s;
}

inline Scalar pow(const Scalar& base, unsigned e) {
  Scalar r = 1;
  Scalar b = base;
  while (e) {
    if (e & 1U) r *= b;
    e >>= 1U;
    if (e) b *= b;
  }
  return r;
}

/// Seeded source of bounded random rationals. The mapping from engine output
/// to values is written out by hand so that streams are identical across
/// standard libraries.
class RationalSampler {
 public:
  explicit RationalSampler(std::uint64_t seed) : engine_(seed) {}

  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  /// Uniform numerator in [-bound, bound], denominator in [1, bound].
  Scalar rational(std::int64_t bound = 10) {
    Scalar s(mpz_class(static_cast<long>(integer(-bound, bound))),
             mpz_class(static_cast<long>(integer(1, bound))));
    s.canonicalize();
    return s;
  }

  Scalar nonzero_rational(std::int64_t bound = 10) {
    for (;;) {
      Scalar s = rational(bound);
      if (s != 0) return s;
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace jetfree
