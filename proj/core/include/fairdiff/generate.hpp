// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairdiff/adapter.hpp"
#include "fairdiff/diffusion.hpp"
#include "fairdiff/indicator.hpp"
#include "fairdiff/world.hpp"

namespace fairdiff {

/// One generated sample with the ground truth of what was asked for:
/// the sampled indicator categories, the group, and the per-record seed.
struct GenerationRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::string group;
  std::vector<std::pair<std::string, std::string>> chosen;  // attr, category
  Tensor z0;
};

struct GenerateOptions {
  std::size_t n = 0;
  double guidance_scale = 1.0;
  double alpha_scale = 0.3;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Batch generation under the prescribed distributions: for every record an
/// indicator is sampled per attribute, the selected adapters are composed
/// into a view, and the sampler runs under the group condition. Each record
/// owns an independent child stream of the batch seed, so records are
/// reproducible individually and ordering is by index.
std::vector<GenerationRecord> generate_batch(
    const DenoiserModel& model, const NoiseSchedule& sched,
    const std::string& group, const ConditionVocab& vocab,
    const std::vector<DistributionSpec>& specs,
    const std::vector<const AdapterBank*>& banks, const GenerateOptions& opts);

}  // namespace fairdiff
