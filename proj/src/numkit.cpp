#include "fedvuln/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedvuln/errors.hpp"

namespace fedvuln {

FlatVector weighted_sum(std::span<const WeightedVector> items) {
  if (items.empty()) fail(ErrorKind::Dimension, "weighted_sum of an empty sequence");
  const std::size_t n = items.front().values.size();
  double total = 0.0;
  for (const auto& item : items) {
    if (item.values.size() != n)
      fail(ErrorKind::Dimension, "weighted_sum length mismatch: " + std::to_string(item.values.size()) +
                                     " vs " + std::to_string(n));
    if (!(item.weight >= 0.0) || !std::isfinite(item.weight))
      fail(ErrorKind::Degenerate, "weighted_sum weight must be finite and nonnegative");
    total += item.weight;
  }
  if (!(total > 0.0)) fail(ErrorKind::Degenerate, "weighted_sum weights sum to zero");

  FlatVector out(n, 0.0);
  for (const auto& item : items) {
    if (item.weight == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) out[i] += item.weight * item.values[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::Dimension, "dot length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::Dimension, "cosine_similarity length mismatch");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (!(na > 0.0) || !(nb > 0.0)) fail(ErrorKind::Degenerate, "cosine_similarity of a zero-norm vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) fail(ErrorKind::Dimension, "axpy length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void matvec(const Matrix& m, std::span<const double> x, std::span<double> out) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.values.data() + r * m.cols;
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) s += row[c] * x[c];
    out[r] = s;
  }
}

void matvec_transposed_acc(const Matrix& m, std::span<const double> x, std::span<double> out) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* row = m.values.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += row[c] * xr;
  }
}

void outer_acc(double alpha, std::span<const double> a, std::span<const double> b, Matrix& m) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double ar = alpha * a[r];
    if (ar == 0.0) continue;
    double* row = m.values.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) row[c] += ar * b[c];
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) fail(ErrorKind::Dimension, "matmul inner dimension mismatch");
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) fail(ErrorKind::Dimension, "matmul_bt inner dimension mismatch");
  Matrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) fail(ErrorKind::Dimension, "matmul_at inner dimension mismatch");
  Matrix out(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k)
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = a(k, i);
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aki * b(k, j);
    }
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

}  // namespace fedvuln
