#pragma once

#include <optional>
#include <vector>

#include "jetfree/scalar.hpp"

namespace jetfree {

using Vector = std::vector<Scalar>;
using Matrix = std::vector<Vector>;  // row major

inline Matrix zero_matrix(std::size_t rows, std::size_t cols) { return Matrix(rows, Vector(cols)); }

inline std::size_t columns(const Matrix& a, std::size_t fallback = 0) { return a.empty() ? fallback : a[0].size(); }

/// Reduced row echelon form over Q, in place. Returns the pivot columns.
inline std::vector<std::size_t> rref(Matrix& a) {
  std::vector<std::size_t> pivots;
  if (a.empty()) return pivots;
  const std::size_t rows = a.size(), cols = a[0].size();
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t sel = r;
    while (sel < rows && a[sel][c] == 0) ++sel;
    if (sel == rows) continue;
    std::swap(a[r], a[sel]);
    if (a[r][c] != 1) {
      Scalar inv = 1 / a[r][c];
      for (std::size_t k = c; k < cols; ++k)
        if (a[r][k] != 0) a[r][k] *= inv;
    }
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == r || a[i][c] == 0) continue;
      Scalar f = a[i][c];
      for (std::size_t k = c; k < cols; ++k)
        if (a[r][k] != 0) a[i][k] -= f * a[r][k];
    }
    pivots.push_back(c);
    ++r;
  }
  a.resize(r);
  return pivots;
}

inline std::size_t rank(Matrix a) { return rref(a).size(); }

/// Basis of {v : a v = 0}; `cols` is needed when a has no rows.
inline std::vector<Vector> null_space(Matrix a, std::size_t cols) {
  if (!a.empty()) cols = a[0].size();
  auto piv = rref(a);
  std::vector<bool> is_pivot(cols, false);
  for (auto c : piv) is_pivot[c] = true;
  std::vector<Vector> basis;
  for (std::size_t f = 0; f < cols; ++f) {
    if (is_pivot[f]) continue;
    Vector v(cols);
    v[f] = 1;
    for (std::size_t r = 0; r < piv.size(); ++r) v[piv[r]] = -a[r][f];
    basis.push_back(std::move(v));
  }
  return basis;
}

inline Vector mat_vec(const Matrix& a, const Vector& v) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < v.size(); ++k)
      if (a[i][k] != 0 && v[k] != 0) out[i] += a[i][k] * v[k];
  return out;
}

/// Product a * b where b is given as a list of column vectors.
inline Matrix mat_cols(const Matrix& a, const std::vector<Vector>& cols) {
  Matrix out = zero_matrix(a.size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    Vector c = mat_vec(a, cols[j]);
    for (std::size_t i = 0; i < a.size(); ++i) out[i][j] = std::move(c[i]);
  }
  return out;
}

inline bool is_zero(const Vector& v) {
  for (const auto& x : v)
    if (x != 0) return false;
  return true;
}

/// Reduces a spanning set to a basis (column echelon form of the span).
inline std::vector<Vector> span_basis(const std::vector<Vector>& vs) {
  if (vs.empty()) return {};
  Matrix a = vs;
  rref(a);
  return a;
}

/// Whether v lies in the span of `basis`.
inline bool in_span(const std::vector<Vector>& basis, const Vector& v) {
  if (is_zero(v)) return true;
  Matrix a = basis;
  std::size_t r0 = rank(a);
  a.push_back(v);
  return rank(a) == r0;
}

/// Result of solving a x = b.
struct LinearSolution {
  bool consistent = false;
  Vector particular;                    // free variables set to zero
  std::vector<Vector> homogeneous;      // null space basis
  std::vector<bool> determined;         // x_k fixed by the system
};

inline LinearSolution solve_linear(const Matrix& a, const Vector& b, std::size_t cols) {
  if (!a.empty()) cols = a[0].size();
  Matrix aug = a;
  for (std::size_t i = 0; i < aug.size(); ++i) aug[i].push_back(b[i]);
  auto piv = rref(aug);
  LinearSolution s;
  s.particular.assign(cols, Scalar(0));
  s.determined.assign(cols, false);
  for (auto c : piv)
    if (c == cols) return s;
  s.consistent = true;
  std::vector<bool> is_pivot(cols, false);
  for (std::size_t r = 0; r < piv.size(); ++r) {
    is_pivot[piv[r]] = true;
    s.particular[piv[r]] = aug[r][cols];
    bool alone = true;
    for (std::size_t k = piv[r] + 1; k < cols; ++k)
      if (aug[r][k] != 0) alone = false;
    s.determined[piv[r]] = alone;
  }
  for (std::size_t f = 0; f < cols; ++f) {
    if (is_pivot[f]) continue;
    Vector v(cols);
    v[f] = 1;
    for (std::size_t r = 0; r < piv.size(); ++r) v[piv[r]] = -aug[r][f];
    s.homogeneous.push_back(std::move(v));
  }
  return s;
}

/// Exact inverse of a square matrix, or nullopt when singular.
inline std::optional<Matrix> inverse(const Matrix& a) {
  const std::size_t n = a.size();
  if (n == 0) return Matrix{};
  Matrix aug = a;
  for (std::size_t i = 0; i < n; ++i) {
    aug[i].resize(2 * n);
    aug[i][n + i] = 1;
  }
  auto piv = rref(aug);
  if (piv.size() < n || piv[n - 1] != n - 1) return std::nullopt;
  Matrix inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[i] = Vector(aug[i].begin() + static_cast<long>(n), aug[i].end());
  return inv;
}

}  // namespace jetfree
