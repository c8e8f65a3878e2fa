#pragma once

#include <vector>

#include "../scalar.hpp"

namespace riskhedge::detail {

template <class S>
inline S dot(const std::vector<S>& a, const std::vector<S>& b) {
  S acc(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

/// Solves a square system in place with partial pivoting. Returns false when
/// the matrix is singular (pivot below ptol in magnitude).
template <class S>
inline bool solve_square(std::vector<std::vector<S>> a, std::vector<S> rhs,
                         std::vector<S>& out, const S& ptol) {
  const std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    S best = abs_of(a[col][col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      S cand = abs_of(a[r][col]);
      if (best < cand) {
        best = cand;
        piv = r;
      }
    }
    if (!(best > ptol)) return false;
    if (piv != col) {
      std::swap(a[piv], a[col]);
      std::swap(rhs[piv], rhs[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      if (a[r][col] == S(0)) continue;
      S f = a[r][col] / a[col][col];
      for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      rhs[r] -= f * rhs[col];
    }
  }
  out.assign(n, S(0));
  for (std::size_t i = n; i-- > 0;) {
    S acc = rhs[i];
    for (std::size_t k = i + 1; k < n; ++k) acc -= a[i][k] * out[k];
    out[i] = acc / a[i][i];
  }
  return true;
}

/// Solves a possibly rectangular system A x = rhs (rows >= cols) by Gaussian
/// elimination. Returns true only when a unique solution exists and satisfies
/// every row within rtol.
template <class S>
inline bool solve_exactly_determined(std::vector<std::vector<S>> a, std::vector<S> rhs,
                                     std::vector<S>& out, const S& ptol, const S& rtol) {
  const std::size_t rows = a.size();
  const std::size_t cols = rows == 0 ? 0 : a[0].size();
  std::size_t rank = 0;
  std::vector<std::size_t> pivot_col;
  for (std::size_t col = 0; col < cols && rank < rows; ++col) {
    std::size_t piv = rank;
    S best = abs_of(a[rank][col]);
    for (std::size_t r = rank + 1; r < rows; ++r) {
      S cand = abs_of(a[r][col]);
      if (best < cand) {
        best = cand;
        piv = r;
      }
    }
    if (!(best > ptol)) return false;  // column without pivot -> not unique
    if (piv != rank) {
      std::swap(a[piv], a[rank]);
      std::swap(rhs[piv], rhs[rank]);
    }
    for (std::size_t r = 0; r < rows; ++r) {
      if (r == rank || a[r][col] == S(0)) continue;
      S f = a[r][col] / a[rank][col];
      for (std::size_t k = col; k < cols; ++k) a[r][k] -= f * a[rank][k];
      rhs[r] -= f * rhs[rank];
    }
    pivot_col.push_back(col);
    ++rank;
  }
  if (rank < cols) return false;
  out.assign(cols, S(0));
  for (std::size_t r = 0; r < rank; ++r) out[pivot_col[r]] = rhs[r] / a[r][pivot_col[r]];
  for (std::size_t r = rank; r < rows; ++r) {
    if (abs_of(rhs[r]) > rtol) return false;  // inconsistent extra row
  }
  return true;
}

}  // namespace riskhedge::detail
