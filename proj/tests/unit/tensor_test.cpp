// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <limits>

#include "fairdiff/error.hpp"
#include "fairdiff/rng.hpp"
#include "fairdiff/tensor.hpp"

using namespace fairdiff;

TEST_CASE("tensor shape and data stay consistent") {
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
}

TEST_CASE("matvec matches hand arithmetic") {
  const Tensor m = Tensor::matrix_of(2, 2, {1, 2, 0, 1});
  const Tensor x = Tensor::vector_of({1, 1});
  const Tensor y = matvec(m, x);
  CHECK(y[0] == doctest::Approx(3.0));
  CHECK(y[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(matvec(m, Tensor::vector_of({1, 2, 3})), DimensionError);
}

TEST_CASE("finite checks flag NaN and infinity") {
  Tensor t = Tensor::vector_of({1.0, 2.0});
  CHECK(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(t.require_finite("test tensor"), NumericalError);
}

TEST_CASE("randn is deterministic per seed") {
  Rng a(42), b(42), c(43);
  const Tensor ta = Tensor::randn({8}, 1.0, a);
  const Tensor tb = Tensor::randn({8}, 1.0, b);
  const Tensor tc = Tensor::randn({8}, 1.0, c);
  CHECK(max_abs_diff(ta, tb) == 0.0);
  CHECK(max_abs_diff(ta, tc) > 0.0);
}
