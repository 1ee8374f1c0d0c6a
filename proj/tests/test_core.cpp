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

#include <gtest/gtest.h>

#include <cmath>

#include "dupsista/core.hpp"
#include "dupsista/parallel.hpp"
#include "dupsista/rng.hpp"
#include "oracles.hpp"

using namespace dupsista;

TEST(Matvec, IdentityReturnsInput) {
  const Vector v{1, 2, 3};
  EXPECT_EQ(matvec(Matrix::identity(3), v), v);
}

TEST(Matvec, DiagonalScalesOnes) {
  const std::vector<double> d{1, 2, 3};
  EXPECT_EQ(matvec(Matrix::diagonal(d), Vector(3, 1.0)), (Vector{1, 2, 3}));
}

TEST(Matvec, MatchesTripleLoop) {
  const Matrix M = oracle::random_matrix(11, 5, 7);
  const Vector v = oracle::random_vector(12, 7);
  const auto want = oracle::naive_matvec(M, v.values());
  const Vector got = matvec(M, v);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Matvec, TransposedMatchesExplicitTranspose) {
  const Matrix M = oracle::random_matrix(13, 6, 9);
  const Vector v = oracle::random_vector(14, 6);
  const auto want = oracle::naive_matvec(transpose(M), v.values());
  const Vector got = matvec_transposed(M, v);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Matvec, DimensionMismatchThrows) {
  EXPECT_THROW(matvec(Matrix(2, 3), Vector(2)), ContractViolation);
  EXPECT_THROW(matvec_transposed(Matrix(2, 3), Vector(3)), ContractViolation);
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ContractViolation);
}

TEST(Matvec, IsLinear) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix M = oracle::random_matrix(100 + seed, 8, 11);
    const Vector u = oracle::random_vector(200 + seed, 11);
    const Vector v = oracle::random_vector(300 + seed, 11);
    const double a = 1.5, b = -0.25;
    Vector w(11);
    for (std::size_t i = 0; i < 11; ++i) w[i] = a * u[i] + b * v[i];
    const Vector lhs = matvec(M, w);
    const Vector mu = matvec(M, u), mv = matvec(M, v);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(lhs[i], a * mu[i] + b * mv[i], 1e-10);
  }
}

TEST(Matmul, MatchesNaiveProduct) {
  const Matrix A = oracle::random_matrix(21, 4, 6);
  const Matrix B = oracle::random_matrix(22, 6, 5);
  const Matrix C = matmul(A, B);
  const Matrix W = oracle::naive_matmul(A, B);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(C(i, j), W(i, j), 1e-12);
}

TEST(Matrix, ElementCountChecked) {
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ContractViolation);
}

TEST(Kernels, NormsAndDistance) {
  const Vector v{3, -4};
  EXPECT_DOUBLE_EQ(norm2(v.span()), 5.0);
  EXPECT_DOUBLE_EQ(norm1(v.span()), 7.0);
  EXPECT_DOUBLE_EQ(distance2(v.span(), Vector{0, 0}.span()), 5.0);
  EXPECT_FALSE(all_finite(Vector{1, NAN}.span()));
}

TEST(Gram, MatchesTransposeProduct) {
  const Matrix A = oracle::random_matrix(31, 5, 4);
  const Matrix G = gram(A);
  const Matrix W = oracle::naive_matmul(transpose(A), A);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(G(i, j), W(i, j), 1e-12);
}

TEST(LambdaMaxGram, Identity) {
  const auto e = lambda_max_gram(Matrix::identity(4));
  EXPECT_NEAR(e.value, 1.0, 1e-12);
  EXPECT_TRUE(e.converged);
}

TEST(LambdaMaxGram, DiagonalSquaresLargestEntry) {
  const std::vector<double> d{1, 2, 3};
  EXPECT_NEAR(lambda_max_gram(Matrix::diagonal(d)).value, 9.0, 1e-8);
}

TEST(LambdaMaxGram, MatchesEigensolver) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix A = oracle::random_matrix(40 + seed, 8, 16);
    const double want = oracle::lambda_max_gram(A);
    const auto got = lambda_max_gram(A);
    EXPECT_NEAR(got.value / want, 1.0, 1e-8) << "seed " << seed;
  }
}

TEST(LambdaMaxGram, ZeroMatrixIsDegenerate) {
  const auto e = lambda_max_gram(Matrix(3, 4));
  EXPECT_EQ(e.value, 0.0);
  EXPECT_TRUE(e.degenerate);
}

TEST(LambdaMaxGram, ReportsIterationCapWithoutConvergence) {
  const Matrix A = oracle::random_matrix(5, 30, 30);
  const auto e = lambda_max_gram(A, {1e-15, 2});
  EXPECT_EQ(e.iterations, 2u);
  EXPECT_FALSE(e.converged);
  EXPECT_GT(e.residual, 0.0);
}

TEST(LambdaMaxGram, BadToleranceThrows) {
  EXPECT_THROW(lambda_max_gram(Matrix::identity(2), {0.0, 0}), ContractViolation);
}

TEST(SpectralNormSym, ShiftedDiagonal) {
  Matrix M = Matrix::identity(2);
  M(0, 0) -= 0.25 * 1.0;
  M(1, 1) -= 0.25 * 4.0;
  EXPECT_NEAR(spectral_norm_sym(M).value, 0.75, 1e-10);
}

TEST(SpectralNormSym, ZeroMatrix) { EXPECT_EQ(spectral_norm_sym(Matrix(3, 3)).value, 0.0); }

TEST(SpectralNormSym, OppositeSignEigenvalues) {
  const std::vector<double> d{2.0, -2.0, 1.0};
  EXPECT_NEAR(spectral_norm_sym(Matrix::diagonal(d)).value, 2.0, 1e-10);
}

TEST(SpectralNormSym, MatchesEigensolver) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix B = oracle::random_matrix(60 + seed, 10, 10);
    Matrix M(10, 10);
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j) M(i, j) = B(i, j) + B(j, i);
    const double want = oracle::spectral_norm_sym(M);
    const double got = spectral_norm_sym(M, {1e-12, 100000}).value;
    EXPECT_NEAR(got / want, 1.0, 1e-8) << "seed " << seed;
  }
}

TEST(SpectralNormSym, AsymmetricThrows) {
  Matrix M(2, 2);
  M(0, 1) = 1.0;
  EXPECT_THROW(spectral_norm_sym(M), ContractViolation);
  EXPECT_THROW(spectral_norm_sym(Matrix(2, 3)), ContractViolation);
}

TEST(SpectralNormSym, AgreesWithLambdaMaxGram) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix A = oracle::random_matrix(70 + seed, 12, 20);
    const double a = lambda_max_gram(A, {1e-12, 100000}).value;
    const double b = spectral_norm_sym(gram(A), {1e-12, 100000}).value;
    EXPECT_NEAR(a / b, 1.0, 1e-8);
  }
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(ParallelFor, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(100, 3,
                            [](std::size_t i) {
                              if (i == 57) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
