#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mlpd {

// Dense row-major matrix of doubles. Deliberately minimal: the only consumers
// are small fully-connected layers and a few spectral routines, and keeping
// the storage a flat row-major vector makes the checkpoint format trivial.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows * cols, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool all_finite() const;

  static Matrix identity(std::size_t n);

  bool operator==(const Matrix&) const = default;
};

// y = A x. Throws on dimension mismatch.
std::vector<double> mat_vec_mul(const Matrix& a, std::span<const double> x);
void mat_vec_mul_into(const Matrix& a, std::span<const double> x,
                      std::span<double> y);

// y = A^T x (used by backprop; avoids materializing transposes).
std::vector<double> mat_tvec_mul(const Matrix& a, std::span<const double> x);
void mat_tvec_mul_into(const Matrix& a, std::span<const double> x,
                       std::span<double> y);

// Singular values in descending order, computed by one-sided Jacobi rotations
// applied until every column pair is numerically orthogonal. Exact for
// diagonal input, O(min(r,c)) values returned. Throws on non-finite input or
// (never seen in practice) non-convergence.
std::vector<double> singular_values(const Matrix& a);

}  // namespace mlpd
