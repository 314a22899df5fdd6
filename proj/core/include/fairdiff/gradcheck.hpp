// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fairdiff/tensor.hpp"

namespace fairdiff {

/// A differentiable scalar objective over named parameter blocks.
/// eval() must be a pure function of the parameter values so that central
/// finite differences are well defined; gradients() is the analytic path
/// under test.
class GradProblem {
 public:
  virtual ~GradProblem() = default;

  struct Block {
    std::string name;
    Tensor* values;
  };

  virtual std::vector<Block> blocks() = 0;
  virtual double eval() = 0;
  /// Analytic gradients, one tensor per block in blocks() order.
  virtual std::vector<Tensor> gradients() = 0;
};

struct GradCheckEntry {
  std::string block;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  double max_rel_error = 0.0;

  bool passed() const { return max_rel_error < tolerance; }
  std::string summary() const;
};

/// Central finite differences (x +- step per coordinate) against the
/// problem's analytic gradients. Relative error uses
/// |a - n| / max(1, |a|, |n|).
GradCheckReport grad_check(GradProblem& problem, double tolerance,
                           double step = 1e-5);

/// Convenience adapter: wraps parameter blocks plus loss/grad closures.
class ClosureGradProblem : public GradProblem {
 public:
  ClosureGradProblem(std::vector<Block> blocks,
                     std::function<double()> eval_fn,
                     std::function<std::vector<Tensor>()> grad_fn)
      : blocks_(std::move(blocks)),
        eval_(std::move(eval_fn)),
        grad_(std::move(grad_fn)) {}

  std::vector<Block> blocks() override { return blocks_; }
  double eval() override { return eval_(); }
  std::vector<Tensor> gradients() override { return grad_(); }

 private:
  std::vector<Block> blocks_;
  std::function<double()> eval_;
  std::function<std::vector<Tensor>()> grad_;
};

}  // namespace fairdiff
