// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "fairdiff/generate.hpp"

#include "fairdiff/error.hpp"
#include "fairdiff/rng.hpp"
#include "fairdiff/threading.hpp"

namespace fairdiff {

std::vector<GenerationRecord> generate_batch(
    const DenoiserModel& model, const NoiseSchedule& sched,
    const std::string& group, const ConditionVocab& vocab,
    const std::vector<DistributionSpec>& specs,
    const std::vector<const AdapterBank*>& banks,
    const GenerateOptions& opts) {
  if (specs.size() != banks.size()) {
    throw ConfigError("generation needs one bank per distribution spec (" +
                      std::to_string(specs.size()) + " specs, " +
                      std::to_string(banks.size()) + " banks)");
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    specs[i].validate();
    if (specs[i].attribute != banks[i]->attribute) {
      throw ConfigError("distribution for attribute '" + specs[i].attribute +
                        "' is paired with bank '" + banks[i]->attribute +
                        "'");
    }
    if (specs[i].pmf.size() != banks[i]->category_count()) {
      throw ConfigError("distribution for attribute '" + specs[i].attribute +
                        "' has " + std::to_string(specs[i].pmf.size()) +
                        " categories, bank has " +
                        std::to_string(banks[i]->category_count()));
    }
  }
  const ConditionId group_id =
      group.empty() ? kEmptyCondition : vocab.id(group);

  std::vector<GenerationRecord> records(opts.n);
  const Rng base(opts.seed);
  parallel_for(opts.n, opts.threads, [&](std::size_t i) {
    Rng stream = base.child(i);
    GenerationRecord& rec = records[i];
    rec.index = i;
    rec.seed = stream.seed();
    rec.group = group;

    std::vector<std::pair<const AdapterBank*, IndicatorVector>> selections;
    for (std::size_t a = 0; a < specs.size(); ++a) {
      IndicatorVector ind = sample_indicator(specs[a], stream);
      rec.chosen.emplace_back(specs[a].attribute,
                              banks[a]->categories[ind.chosen]);
      selections.emplace_back(banks[a], std::move(ind));
    }
    const ActiveAdapters view =
        compose_views(model, selections, opts.alpha_scale);
    rec.z0 = sample(model, group_id, sched, opts.guidance_scale, &view,
                    stream)
                 .final_sample();
  });
  return records;
}

}  // namespace fairdiff
