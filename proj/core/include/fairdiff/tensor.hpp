// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fairdiff {

class Rng;

/// Dense row-major array of 64-bit floats. The single numeric carrier for
/// samples, activations, weights, and gradients.
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<std::size_t> shape);

  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::initializer_list<std::size_t> shape);
  static Tensor vector_of(std::vector<double> values);
  static Tensor matrix_of(std::size_t rows, std::size_t cols,
                          std::vector<double> values);
  /// Entries iid N(0, std^2).
  static Tensor randn(std::vector<std::size_t> shape, double std, Rng& rng);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t rows() const { return shape_[0]; }
  std::size_t cols() const { return shape_[1]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  /// Throws NumericalError mentioning `what` if any entry is not finite.
  void require_finite(const std::string& what) const;

  void fill(double v);
  void add_scaled(const Tensor& other, double scale);  // *this += scale*other

  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Elementwise helpers used across modules. Shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
double dot(const Tensor& a, const Tensor& b);
double squared_norm(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// y = M x for a [m x n] matrix and length-n vector.
Tensor matvec(const Tensor& m, const Tensor& x);

}  // namespace fairdiff
