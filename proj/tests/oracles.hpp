#pragma once

// Test-only reference computations. Deliberately naive: plain loops,
// Gauss-Jordan elimination on std::vector, closed-form polynomials. Nothing
// here calls into the library's linear algebra.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cvmc::oracle {

using Matrix = std::vector<std::vector<double>>;

// Solves A x = b by Gauss-Jordan with partial pivoting.
inline std::vector<double> solve(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) < 1e-300) throw std::runtime_error("oracle: singular system");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
      b[r] -= factor * b[col];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return b;
}

inline Matrix inverse(const Matrix& a) {
  const std::size_t n = a.size();
  Matrix inv(n, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    const auto col = solve(a, e);
    for (std::size_t i = 0; i < n; ++i) inv[i][j] = col[i];
  }
  return inv;
}

// Intercept and slopes of the least-squares fit y ~ 1 + X via the
// (m+1) x (m+1) normal equations.
inline std::vector<double> normal_equations_fit(const Matrix& x, const std::vector<double>& y) {
  const std::size_t n = y.size();
  const std::size_t p = x.empty() ? 1 : x[0].size() + 1;
  Matrix xtx(p, std::vector<double>(p, 0.0));
  std::vector<double> xty(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row{1.0};
    row.insert(row.end(), x[i].begin(), x[i].end());
    for (std::size_t a = 0; a < p; ++a) {
      xty[a] += row[a] * y[i];
      for (std::size_t b = 0; b < p; ++b) xtx[a][b] += row[a] * row[b];
    }
  }
  return solve(xtx, xty);
}

// Full n x n hat matrix H (H'H)^{-1} H' assembled entry by entry.
inline Matrix hat_matrix(const Matrix& h) {
  const std::size_t n = h.size();
  const std::size_t m = h[0].size();
  Matrix hth(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) hth[a][b] += h[i][a] * h[i][b];
    }
  }
  const Matrix inv = inverse(hth);
  Matrix pi(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      double s = 0.0;
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) s += h[i][a] * inv[a][b] * h[k][b];
      }
      pi[i][k] = s;
    }
  }
  return pi;
}

// Explicit Legendre polynomials of degree 0..6.
inline double legendre_explicit(int degree, double x) {
  const double x2 = x * x;
  switch (degree) {
    case 0: return 1.0;
    case 1: return x;
    case 2: return (3.0 * x2 - 1.0) / 2.0;
    case 3: return (5.0 * x2 * x - 3.0 * x) / 2.0;
    case 4: return (35.0 * x2 * x2 - 30.0 * x2 + 3.0) / 8.0;
    case 5: return (63.0 * x2 * x2 * x - 70.0 * x2 * x + 15.0 * x) / 8.0;
    case 6: return (231.0 * x2 * x2 * x2 - 315.0 * x2 * x2 + 105.0 * x2 - 5.0) / 16.0;
    default: throw std::runtime_error("oracle: degree out of range");
  }
}

// Mean of the per-stratum sample means for m+1 equal cells on [0, 1].
inline double mean_of_stratum_means(const std::vector<double>& x, const std::vector<double>& y, std::size_t cells) {
  std::vector<double> sum(cells, 0.0);
  std::vector<std::size_t> count(cells, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t c = static_cast<std::size_t>(x[i] * static_cast<double>(cells));
    if (c >= cells) c = cells - 1;
    sum[c] += y[i];
    ++count[c];
  }
  double total = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    if (count[c] == 0) throw std::runtime_error("oracle: empty stratum");
    total += sum[c] / static_cast<double>(count[c]);
  }
  return total / static_cast<double>(cells);
}

}  // namespace cvmc::oracle
