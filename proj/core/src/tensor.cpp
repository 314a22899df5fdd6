// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "fairdiff/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "fairdiff/error.hpp"
#include "fairdiff/rng.hpp"

namespace fairdiff {

namespace {
std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw DimensionError("tensor data size " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str());
  }
}

Tensor Tensor::zeros(std::initializer_list<std::size_t> shape) {
  return Tensor(std::vector<std::size_t>(shape));
}

Tensor Tensor::vector_of(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix_of(std::size_t rows, std::size_t cols,
                         std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::randn(std::vector<std::size_t> shape, double std, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data_) v = std * rng.gaussian();
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::require_finite(const std::string& what) const {
  if (!all_finite()) {
    throw NumericalError("non-finite values in " + what);
  }
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

void Tensor::add_scaled(const Tensor& other, double s) {
  if (!same_shape(other)) {
    throw DimensionError("add_scaled shape mismatch: " + shape_str() + " vs " +
                         other.shape_str());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << "x";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

namespace {
void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + " shape mismatch: " +
                         a.shape_str() + " vs " + b.shape_str());
  }
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= s;
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(const Tensor& a) { return dot(a, a); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

Tensor matvec(const Tensor& m, const Tensor& x) {
  if (m.rank() != 2 || x.rank() != 1 || m.cols() != x.numel()) {
    throw DimensionError("matvec shape mismatch: " + m.shape_str() + " * " +
                         x.shape_str());
  }
  Tensor y({m.rows()});
  const double* md = m.data();
  const double* xd = x.data();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    const double* row = md + r * m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c) acc += row[c] * xd[c];
    y[r] = acc;
  }
  return y;
}

}  // namespace fairdiff
