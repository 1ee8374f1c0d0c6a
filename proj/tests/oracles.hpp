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

// Test-only reference computations. Deliberately naive and independent of
// the library kernels they check.

#include <Eigen/Dense>
#include <vector>

#include "dupsista/core.hpp"
#include "dupsista/rng.hpp"

namespace oracle {

inline std::vector<double> naive_matvec(const dupsista::Matrix& M,
                                        const std::vector<double>& v) {
  std::vector<double> out(M.rows(), 0.0);
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) out[i] += M(i, j) * v[j];
  return out;
}

inline dupsista::Matrix naive_matmul(const dupsista::Matrix& A,
                                     const dupsista::Matrix& B) {
  dupsista::Matrix C(A.rows(), B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < B.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < A.cols(); ++k) s += A(i, k) * B(k, j);
      C(i, j) = s;
    }
  return C;
}

inline Eigen::MatrixXd to_eigen(const dupsista::Matrix& M) {
  Eigen::MatrixXd E(M.rows(), M.cols());
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) E(i, j) = M(i, j);
  return E;
}

/// Eigenvalues of a symmetric matrix, ascending.
inline Eigen::VectorXd sym_eigenvalues(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double lambda_max_gram(const dupsista::Matrix& A) {
  const Eigen::MatrixXd E = to_eigen(A);
  return sym_eigenvalues(E.transpose() * E).maxCoeff();
}

inline double spectral_norm_sym(const dupsista::Matrix& M) {
  return sym_eigenvalues(to_eigen(M)).cwiseAbs().maxCoeff();
}

inline dupsista::Matrix random_matrix(std::uint64_t seed, std::size_t r,
                                      std::size_t c) {
  dupsista::Rng rng(seed);
  return dupsista::gaussian_matrix(rng, r, c);
}

inline dupsista::Vector random_vector(std::uint64_t seed, std::size_t n) {
  dupsista::Rng rng(seed);
  dupsista::Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = rng.standard_normal();
  return v;
}

}  // namespace oracle
