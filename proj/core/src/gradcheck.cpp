// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "fairdiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fairdiff/error.hpp"

namespace fairdiff {

std::string GradCheckReport::summary() const {
  std::string out;
  char line[256];
  for (const auto& e : entries) {
    std::snprintf(line, sizeof(line), "%-24s max_rel=%.3e max_abs=%.3e\n",
                  e.block.c_str(), e.max_rel_error, e.max_abs_error);
    out += line;
  }
  std::snprintf(line, sizeof(line), "overall max_rel=%.3e tolerance=%.3e %s\n",
                max_rel_error, tolerance, passed() ? "PASS" : "FAIL");
  out += line;
  return out;
}

GradCheckReport grad_check(GradProblem& problem, double tolerance,
                           double step) {
  if (step <= 0.0) throw ConfigError("grad_check step must be positive");
  GradCheckReport report;
  report.tolerance = tolerance;

  auto blocks = problem.blocks();
  const std::vector<Tensor> analytic = problem.gradients();
  if (analytic.size() != blocks.size()) {
    throw DimensionError("grad_check: analytic gradient count " +
                         std::to_string(analytic.size()) +
                         " does not match block count " +
                         std::to_string(blocks.size()));
  }

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Tensor& values = *blocks[b].values;
    const Tensor& grad = analytic[b];
    if (!values.same_shape(grad)) {
      throw DimensionError("grad_check: gradient shape mismatch for block '" +
                           blocks[b].name + "'");
    }
    GradCheckEntry entry;
    entry.block = blocks[b].name;
    for (std::size_t i = 0; i < values.numel(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const double up = problem.eval();
      values[i] = original - step;
      const double down = problem.eval();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double a = grad[i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err =
          abs_err / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel_err > entry.max_rel_error) {
        entry.max_rel_error = rel_err;
        entry.worst_index = i;
      }
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace fairdiff
