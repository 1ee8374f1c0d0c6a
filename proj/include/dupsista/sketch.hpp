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

// Sketching matrices and the precomputed sketched system (SA, Sy).

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dupsista/core.hpp"
#include "dupsista/rng.hpp"

namespace dupsista {

enum class SketchKind { Gaussian, CountSketch };

inline std::string_view to_string(SketchKind kind) {
  switch (kind) {
    case SketchKind::Gaussian:
      return "gaussian";
    case SketchKind::CountSketch:
      return "count_sketch";
  }
  return "unknown";
}

inline SketchKind sketch_kind_from_string(std::string_view name) {
  if (name == "gaussian") return SketchKind::Gaussian;
  if (name == "count_sketch") return SketchKind::CountSketch;
  detail::fail("unknown sketch kind '", name, "'");
}

/// Count Sketch in (row index, sign) form: column j of S has the single
/// entry sign[j] at row row[j].
struct CountSketchMap {
  std::vector<std::uint32_t> row;
  std::vector<std::int8_t> sign;
};

class Sketch {
 public:
  /// Dense l x m Gaussian sketch.
  static Sketch dense(Matrix S, std::optional<std::uint64_t> seed = {}) {
    detail::require(S.rows() >= 1 && S.rows() <= S.cols(),
                    "Sketch: need 1 <= l <= m, got l=", S.rows(),
                    " m=", S.cols());
    Sketch sk;
    sk.kind_ = SketchKind::Gaussian;
    sk.l_ = S.rows();
    sk.m_ = S.cols();
    sk.seed_ = seed;
    sk.rep_ = std::move(S);
    return sk;
  }

  static Sketch count(std::size_t l, CountSketchMap map,
                      std::optional<std::uint64_t> seed = {}) {
    const std::size_t m = map.row.size();
    detail::require(map.sign.size() == m, "Sketch: row/sign length mismatch");
    detail::require(l >= 1 && l <= m, "Sketch: need 1 <= l <= m, got l=", l,
                    " m=", m);
    for (std::size_t j = 0; j < m; ++j) {
      detail::require(map.row[j] < l, "Sketch: row index out of range");
      detail::require(map.sign[j] == 1 || map.sign[j] == -1,
                      "Sketch: Count Sketch entries must be +1 or -1");
    }
    Sketch sk;
    sk.kind_ = SketchKind::CountSketch;
    sk.l_ = l;
    sk.m_ = m;
    sk.seed_ = seed;
    sk.rep_ = std::move(map);
    return sk;
  }

  SketchKind kind() const noexcept { return kind_; }
  std::size_t l() const noexcept { return l_; }
  std::size_t m() const noexcept { return m_; }
  /// Seed that regenerates this sketch via make_sketch, when known.
  std::optional<std::uint64_t> seed() const noexcept { return seed_; }

  const Matrix& dense_matrix() const { return std::get<Matrix>(rep_); }
  const CountSketchMap& count_map() const {
    return std::get<CountSketchMap>(rep_);
  }

  /// Explicit l x m matrix (tests and analysis only).
  Matrix densify() const {
    if (kind_ == SketchKind::Gaussian) return dense_matrix();
    Matrix S(l_, m_);
    const auto& cs = count_map();
    for (std::size_t j = 0; j < m_; ++j) S(cs.row[j], j) = cs.sign[j];
    return S;
  }

  /// S A. Count Sketch path touches each entry of A once.
  Matrix apply(const Matrix& A) const {
    detail::require(A.rows() == m_, "apply_sketch: sketch has ", m_,
                    " columns, operand has ", A.rows(), " rows");
    if (kind_ == SketchKind::Gaussian) return matmul(dense_matrix(), A);
    const auto& cs = count_map();
    Matrix out(l_, A.cols());
    const std::size_t n = A.cols();
    for (std::size_t k = 0; k < m_; ++k) {
      double* o = out.data() + cs.row[k] * n;
      const double* a = A.data() + k * n;
      if (cs.sign[k] > 0) {
        for (std::size_t j = 0; j < n; ++j) o[j] += a[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) o[j] -= a[j];
      }
    }
    return out;
  }

  Vector apply(const Vector& y) const {
    detail::require(y.size() == m_, "apply_sketch: sketch has ", m_,
                    " columns, vector has length ", y.size());
    if (kind_ == SketchKind::Gaussian) return matvec(dense_matrix(), y);
    const auto& cs = count_map();
    Vector out(l_);
    for (std::size_t k = 0; k < m_; ++k) {
      if (cs.sign[k] > 0) {
        out[cs.row[k]] += y[k];
      } else {
        out[cs.row[k]] -= y[k];
      }
    }
    return out;
  }

  /// S^T B for an l x n operand B.
  Matrix apply_transposed(const Matrix& B) const {
    detail::require(B.rows() == l_, "apply_transposed: sketch has ", l_,
                    " rows, operand has ", B.rows());
    if (kind_ == SketchKind::Gaussian) return matmul(transpose(dense_matrix()), B);
    const auto& cs = count_map();
    Matrix out(m_, B.cols());
    for (std::size_t k = 0; k < m_; ++k) {
      auto src = B.row(cs.row[k]);
      auto dst = out.row(k);
      for (std::size_t j = 0; j < B.cols(); ++j) dst[j] = cs.sign[k] * src[j];
    }
    return out;
  }

 private:
  Sketch() = default;

  SketchKind kind_ = SketchKind::Gaussian;
  std::size_t l_ = 0;
  std::size_t m_ = 0;
  std::optional<std::uint64_t> seed_;
  std::variant<Matrix, CountSketchMap> rep_;
};

namespace detail {
inline std::optional<std::uint64_t> fresh_seed(const Rng& rng) {
  if (rng.draws() == 0) return rng.seed();
  return std::nullopt;
}
}  // namespace detail

/// l x m sketch with i.i.d. N(0, 1/l) entries.
inline Sketch make_gaussian_sketch(Rng& rng, std::size_t l, std::size_t m) {
  detail::require(l >= 1 && l <= m,
                  "make_gaussian_sketch: need 1 <= l <= m, got l=", l,
                  " m=", m);
  auto seed = detail::fresh_seed(rng);
  return Sketch::dense(gaussian_matrix(rng, l, m, 1.0 / static_cast<double>(l)),
                       seed);
}

/// Count Sketch: each column gets a uniform row in [0, l) and a uniform sign.
/// Collisions are allowed (no balancing).
inline Sketch make_count_sketch(Rng& rng, std::size_t l, std::size_t m) {
  detail::require(l >= 1 && l <= m,
                  "make_count_sketch: need 1 <= l <= m, got l=", l, " m=", m);
  auto seed = detail::fresh_seed(rng);
  CountSketchMap map;
  map.row.resize(m);
  map.sign.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    map.row[j] = static_cast<std::uint32_t>(rng.uniform_index(l));
    map.sign[j] = (rng.next_u64() >> 63) ? std::int8_t{-1} : std::int8_t{1};
  }
  return Sketch::count(l, std::move(map), seed);
}

inline Sketch make_sketch(Rng& rng, SketchKind kind, std::size_t l,
                          std::size_t m) {
  return kind == SketchKind::Gaussian ? make_gaussian_sketch(rng, l, m)
                                      : make_count_sketch(rng, l, m);
}

/// Regenerate-from-seed form.
inline Sketch make_sketch(SketchKind kind, std::uint64_t seed, std::size_t l,
                          std::size_t m) {
  Rng rng(seed);
  return make_sketch(rng, kind, l, m);
}

inline Matrix apply_sketch(const Sketch& S, const Matrix& A) { return S.apply(A); }
inline Vector apply_sketch(const Sketch& S, const Vector& y) { return S.apply(y); }

/// SA and Sy bound to one (A, y). SA is shared between rebinds, so a new
/// observation for the same A reuses it untouched.
class SketchedSystem {
 public:
  SketchedSystem(std::shared_ptr<const Sketch> sketch,
                 std::shared_ptr<const Matrix> sa, Vector sy,
                 std::uint64_t source_id)
      : sketch_(std::move(sketch)),
        sa_(std::move(sa)),
        sy_(std::move(sy)),
        source_id_(source_id) {}

  const Sketch& sketch() const { return *sketch_; }
  const std::shared_ptr<const Sketch>& sketch_ptr() const { return sketch_; }
  const Matrix& SA() const { return *sa_; }
  const std::shared_ptr<const Matrix>& SA_ptr() const { return sa_; }
  const Vector& Sy() const { return sy_; }
  std::uint64_t source_id() const noexcept { return source_id_; }

  /// Same sketch and SA, Sy recomputed for a new observation.
  SketchedSystem rebind(const Vector& y, std::uint64_t source_id) const {
    return SketchedSystem(sketch_, sa_, sketch_->apply(y), source_id);
  }

 private:
  std::shared_ptr<const Sketch> sketch_;
  std::shared_ptr<const Matrix> sa_;
  Vector sy_;
  std::uint64_t source_id_;
};

inline SketchedSystem build_sketched_system(std::shared_ptr<const Sketch> S,
                                            const Matrix& A, const Vector& y,
                                            std::uint64_t source_id = 0) {
  detail::require(S != nullptr, "build_sketched_system: null sketch");
  detail::require(S->m() == A.rows(), "build_sketched_system: sketch has ",
                  S->m(), " columns but A has ", A.rows(), " rows");
  detail::require(y.size() == A.rows(),
                  "build_sketched_system: y length does not match A");
  auto sa = std::make_shared<const Matrix>(S->apply(A));
  Vector sy = S->apply(y);
  return SketchedSystem(std::move(S), std::move(sa), std::move(sy), source_id);
}

}  // namespace dupsista
