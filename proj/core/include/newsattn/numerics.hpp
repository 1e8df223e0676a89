// SPDX-License-Identifier: Apache-2.0
/**
 * @file   numerics.hpp
 * @brief  Dense row-major linear algebra, nonlinearities, a seedable
 *         xoshiro256** generator and a central finite-difference oracle.
 *
 * Shapes travel with the data and are checked at every operation boundary;
 * mismatches throw InputError naming both shapes.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "newsattn/error.hpp"

namespace newsattn::numerics {

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len, double fill = 0.0) : data_(len, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  /// Row-major; throws InputError when data.size() != rows*cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  /// Nested rows; every row must have the same length.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

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

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }

  /// Appends one row; the first row fixes cols when the matrix is empty.
  void append_row(std::span<const double> values);

  std::string shape_string() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// a (r×c) times v (c) -> r.
Vector matvec(const Matrix& a, std::span<const double> v);
/// a^T (c×r) times v (r) -> c.
Vector matvec_transposed(const Matrix& a, std::span<const double> v);
/// a += u ⊗ v.
void add_outer(Matrix& a, std::span<const double> u, std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);

Vector softmax(std::span<const double> v);
Vector sigmoid(std::span<const double> v);
Vector tanh(std::span<const double> v);
Vector hadamard(std::span<const double> a, std::span<const double> b);
Vector concat(std::span<const double> a, std::span<const double> b);

double sigmoid(double x) noexcept;

bool all_finite(std::span<const double> v) noexcept;

/// SplitMix64-seeded xoshiro256**.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  /// Uniform on [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  bool bernoulli(double p) noexcept;
  double normal() noexcept;

  /// Independent stream keyed by (seed, stream id); the parent is untouched.
  Rng derive(std::uint64_t stream) const noexcept;

  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

/// Named streams derived from the master seed.
enum class Stream : std::uint64_t { Init = 1, Dropout = 2, Shuffle = 3, Synth = 4 };

inline Rng derive(const Rng& master, Stream s) {
  return master.derive(static_cast<std::uint64_t>(s));
}

Matrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng);

using ScalarFn = std::function<double(const Vector&)>;

/// Central differences (f(x+εe_i) − f(x−εe_i)) / 2ε per coordinate.
/// Throws NumericalError naming the coordinate when f is non-finite.
Vector finite_diff_grad(const ScalarFn& f, const Vector& x, double eps = 1e-5);

}  // namespace newsattn::numerics
