// Copyright 2026 The dupsista Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dense vector/matrix primitives and power-iteration spectral utilities.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dupsista {

/// Raised when a precondition of a public operation is not met.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an iterate or loss leaves the finite range.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename... Parts>
[[noreturn]] void fail(const Parts&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  throw ContractViolation(os.str());
}

template <typename... Parts>
void require(bool ok, const Parts&... parts) {
  if (!ok) fail(parts...);
}

}  // namespace detail

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  const std::vector<double>& values() const noexcept { return data_; }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    detail::require(data_.size() == rows_ * cols_, "Matrix: ", rows_, "x",
                    cols_, " needs ", rows_ * cols_, " elements, got ",
                    data_.size());
  }

  static Matrix identity(std::size_t n) {
    Matrix I(n, n);
    for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
  }

  static Matrix diagonal(std::span<const double> d) {
    Matrix D(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) D(i, i) = d[i];
    return D;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<const double> elements() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Kernels

/// Dot product with four independent accumulators; the summation order is
/// fixed, so results are reproducible for a given build.
inline double dot(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size(), "dot: length ", a.size(), " vs ",
                  b.size());
  const std::size_t n = a.size();
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc[0] += a[i] * b[i];
    acc[1] += a[i + 1] * b[i + 1];
    acc[2] += a[i + 2] * b[i + 2];
    acc[3] += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) acc[0] += a[i] * b[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double norm1(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

inline double distance2(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size(), "distance2: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

/// out = M v
inline void matvec_into(const Matrix& M, std::span<const double> v,
                        std::span<double> out) {
  detail::require(M.cols() == v.size(), "matvec: matrix has ", M.cols(),
                  " columns, vector has length ", v.size());
  detail::require(out.size() == M.rows(), "matvec: output length mismatch");
  for (std::size_t r = 0; r < M.rows(); ++r) out[r] = dot(M.row(r), v);
}

inline Vector matvec(const Matrix& M, const Vector& v) {
  Vector out(M.rows());
  matvec_into(M, v.span(), out.span());
  return out;
}

/// out = M^T v, accumulated row by row.
inline void matvec_transposed_into(const Matrix& M, std::span<const double> v,
                                   std::span<double> out) {
  detail::require(M.rows() == v.size(), "matvec_transposed: matrix has ",
                  M.rows(), " rows, vector has length ", v.size());
  detail::require(out.size() == M.cols(),
                  "matvec_transposed: output length mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t n = M.cols();
  for (std::size_t r = 0; r < M.rows(); ++r) {
    const double s = v[r];
    const double* row = M.data() + r * n;
    double* o = out.data();
    for (std::size_t c = 0; c < n; ++c) o[c] += s * row[c];
  }
}

inline Vector matvec_transposed(const Matrix& M, const Vector& v) {
  Vector out(M.cols());
  matvec_transposed_into(M, v.span(), out.span());
  return out;
}

/// Dense product A B with a fixed i-k-j loop order.
inline Matrix matmul(const Matrix& A, const Matrix& B) {
  detail::require(A.cols() == B.rows(), "matmul: inner dimensions ", A.cols(),
                  " vs ", B.rows());
  Matrix C(A.rows(), B.cols());
  const std::size_t n = B.cols();
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double* c = C.data() + i * n;
    for (std::size_t k = 0; k < A.cols(); ++k) {
      const double a = A(i, k);
      if (a == 0.0) continue;
      const double* b = B.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += a * b[j];
    }
  }
  return C;
}

inline Matrix transpose(const Matrix& A) {
  Matrix T(A.cols(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) T(j, i) = A(i, j);
  return T;
}

/// A^T A, used by analysis code and tests; solvers never form it.
inline Matrix gram(const Matrix& A) {
  const std::size_t n = A.cols();
  Matrix G(n, n);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    auto row = A.row(r);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = row[i];
      if (a == 0.0) continue;
      double* g = G.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) g[j] += a * row[j];
    }
  }
  return G;
}

inline bool is_symmetric(const Matrix& M, double tol = 1e-10) {
  if (M.rows() != M.cols()) return false;
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = i + 1; j < M.cols(); ++j)
      if (std::abs(M(i, j) - M(j, i)) > tol) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Power iteration

struct PowerIterationOptions {
  double tol = 1e-10;
  /// 0 selects max(1000, 10 * max(rows, cols)).
  std::size_t max_iter = 0;
};

struct SpectralEstimate {
  double value = 0.0;
  std::size_t iterations = 0;
  /// ||Gv - value v|| / value at the last iterate.
  double residual = 0.0;
  bool converged = false;
  /// Operator annihilated the iterate (zero matrix or start vector in its
  /// null space); value is 0.
  bool degenerate = false;
};

namespace detail {

/// Power iteration for the dominant eigenvalue of a positive semidefinite
/// operator, started from the normalized all-ones vector.
template <typename Apply>
SpectralEstimate psd_power_iteration(std::size_t dim, Apply&& apply,
                                     double tol, std::size_t max_iter) {
  SpectralEstimate est;
  Vector v(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  Vector w(dim);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    apply(v.span(), w.span());
    const double lambda = dot(v.span(), w.span());
    const double wn = norm2(w.span());
    est.iterations = it;
    if (wn == 0.0 || lambda <= 0.0) {
      est = SpectralEstimate{0.0, it, 0.0, true, true};
      return est;
    }
    double r2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = w[i] - lambda * v[i];
      r2 += d * d;
    }
    est.value = lambda;
    est.residual = std::sqrt(r2) / lambda;
    if (est.residual <= tol) {
      est.converged = true;
      return est;
    }
    for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / wn;
  }
  return est;
}

}  // namespace detail

/// lambda_max(A^T A) by power iteration on v -> A^T (A v).
inline SpectralEstimate lambda_max_gram(const Matrix& A,
                                        PowerIterationOptions opt = {}) {
  detail::require(opt.tol > 0.0, "lambda_max_gram: tol must be positive");
  detail::require(A.rows() > 0 && A.cols() > 0, "lambda_max_gram: empty matrix");
  const std::size_t max_iter =
      opt.max_iter ? opt.max_iter
                   : std::max<std::size_t>(1000, 10 * std::max(A.rows(), A.cols()));
  Vector tmp(A.rows());
  return detail::psd_power_iteration(
      A.cols(),
      [&](std::span<const double> v, std::span<double> out) {
        matvec_into(A, v, tmp.span());
        matvec_transposed_into(A, tmp.span(), out);
      },
      opt.tol, max_iter);
}

/// Largest absolute eigenvalue of a symmetric matrix. Iterates on M^2 so
/// that eigenvalues of equal magnitude and opposite sign cannot stall it.
inline SpectralEstimate spectral_norm_sym(const Matrix& M,
                                          PowerIterationOptions opt = {}) {
  detail::require(is_symmetric(M, 1e-10),
                  "spectral_norm_sym: matrix is not symmetric");
  detail::require(opt.tol > 0.0, "spectral_norm_sym: tol must be positive");
  if (M.rows() == 0) return {0.0, 0, 0.0, true, true};
  const std::size_t max_iter =
      opt.max_iter ? opt.max_iter : std::max<std::size_t>(1000, 10 * M.rows());
  Vector tmp(M.rows());
  SpectralEstimate sq = detail::psd_power_iteration(
      M.rows(),
      [&](std::span<const double> v, std::span<double> out) {
        matvec_into(M, v, tmp.span());
        matvec_into(M, tmp.span(), out);
      },
      opt.tol, max_iter);
  sq.value = std::sqrt(sq.value);
  return sq;
}

}  // namespace dupsista
