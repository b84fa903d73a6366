#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace fedvuln {

using FlatVector = std::vector<double>;

/// Row-major dense matrix of doubles. Vectors are stored as n x 1 matrices.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::size_t size() const { return values.size(); }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

struct WeightedVector {
  std::span<const double> values;
  double weight = 0.0;
};

/// Sum of w_i * v_i divided by sum of w_i. Accumulates in input order.
FlatVector weighted_sum(std::span<const WeightedVector> items);

/// Cosine of the angle between a and b, clamped to [-1, 1].
double cosine_similarity(std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// out = m * x          (m: rows x cols, x: cols)
void matvec(const Matrix& m, std::span<const double> x, std::span<double> out);
// out += m^T * x       (m: rows x cols, x: rows)
void matvec_transposed_acc(const Matrix& m, std::span<const double> x, std::span<double> out);
// m += alpha * a * b^T (a: rows, b: cols)
void outer_acc(double alpha, std::span<const double> a, std::span<const double> b, Matrix& m);
// a (r x k) * b (k x c)
Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T
Matrix matmul_bt(const Matrix& a, const Matrix& b);
// a^T * b
Matrix matmul_at(const Matrix& a, const Matrix& b);

bool all_finite(std::span<const double> v);

/// Mixes a base seed with stream identifiers into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

using Rng = std::mt19937_64;

}  // namespace fedvuln
