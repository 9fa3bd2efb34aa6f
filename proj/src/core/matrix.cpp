#include "core/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "core/errors.hpp"

namespace mlpd {

bool Matrix::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

void mat_vec_mul_into(const Matrix& a, std::span<const double> x,
                      std::span<double> y) {
  if (x.size() != a.cols)
    throw invalid_argument("mat_vec_mul: x has " + std::to_string(x.size()) +
                           " entries, matrix has " + std::to_string(a.cols) +
                           " columns");
  if (y.size() != a.rows)
    throw invalid_argument("mat_vec_mul: y has wrong size");
  const double* p = a.data.data();
  for (std::size_t r = 0; r < a.rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < a.cols; ++c) acc += p[c] * x[c];
    y[r] = acc;
    p += a.cols;
  }
}

std::vector<double> mat_vec_mul(const Matrix& a, std::span<const double> x) {
  std::vector<double> y(a.rows);
  mat_vec_mul_into(a, x, y);
  return y;
}

void mat_tvec_mul_into(const Matrix& a, std::span<const double> x,
                       std::span<double> y) {
  if (x.size() != a.rows)
    throw invalid_argument("mat_tvec_mul: x has " + std::to_string(x.size()) +
                           " entries, matrix has " + std::to_string(a.rows) +
                           " rows");
  if (y.size() != a.cols)
    throw invalid_argument("mat_tvec_mul: y has wrong size");
  std::fill(y.begin(), y.end(), 0.0);
  const double* p = a.data.data();
  // Row-major friendly: accumulate row r scaled by x[r].
  for (std::size_t r = 0; r < a.rows; ++r) {
    double xr = x[r];
    if (xr != 0.0) {
      for (std::size_t c = 0; c < a.cols; ++c) y[c] += p[c] * xr;
    }
    p += a.cols;
  }
}

std::vector<double> mat_tvec_mul(const Matrix& a, std::span<const double> x) {
  std::vector<double> y(a.cols);
  mat_tvec_mul_into(a, x, y);
  return y;
}

std::vector<double> singular_values(const Matrix& a) {
  if (!a.all_finite())
    throw invalid_argument("singular_values: non-finite input");
  if (a.rows == 0 || a.cols == 0) return {};

  // Work on B with rows >= cols so we rotate the smaller column set.
  std::size_t m = a.rows, n = a.cols;
  bool transposed = m < n;
  if (transposed) std::swap(m, n);
  Matrix b(m, n);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c)
      b.at(r, c) = transposed ? a.at(c, r) : a.at(r, c);

  auto col_dot = [&](std::size_t p, std::size_t q) {
    double acc = 0.0;
    for (std::size_t r = 0; r < m; ++r) acc += b.at(r, p) * b.at(r, q);
    return acc;
  };

  // One-sided Jacobi: rotate column pairs until all are mutually orthogonal
  // relative to their norms (off-diagonal of B^T B below 1e-12 in the scaled
  // sense). Then the column norms are the singular values.
  const double tol = 1e-12;
  const int max_sweeps = 100;
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = col_dot(p, p);
        double aqq = col_dot(q, q);
        double apq = col_dot(p, q);
        if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0)
          continue;
        converged = false;
        double zeta = (aqq - app) / (2.0 * apq);
        double t = std::copysign(1.0, zeta) /
                   (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = c * t;
        for (std::size_t r = 0; r < m; ++r) {
          double bp = b.at(r, p), bq = b.at(r, q);
          b.at(r, p) = c * bp - s * bq;
          b.at(r, q) = s * bp + c * bq;
        }
      }
    }
  }
  if (!converged)
    throw numeric_error("singular_values: Jacobi sweep limit reached");

  std::vector<double> sv(n);
  for (std::size_t c = 0; c < n; ++c) sv[c] = std::sqrt(col_dot(c, c));
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

}  // namespace mlpd
