#pragma once

// Small synthetic SampleSets with controllable targets for model tests.

#include <functional>
#include <vector>

#include "feederlab/prep.hpp"
#include "feederlab/rng.hpp"

namespace testgen {

using feederlab::FeatureRow;
using feederlab::SampleSet;

/// n_feeders x n_steps fully-present sample set. Metadata and step features
/// are uniform random; the target is target_fn(features) + noise.
inline SampleSet make_samples(feederlab::Rng& rng, int n_feeders, int n_steps,
                              const std::function<double(const FeatureRow&)>& target_fn,
                              double noise_sd = 0.0) {
  feederlab::TimeGrid grid{feederlab::Timestamp::parse("2023-01-02T00:00"), n_steps};
  std::vector<std::string> ids;
  std::vector<std::array<double, feederlab::kMetadataDim>> meta;
  for (int f = 0; f < n_feeders; ++f) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "F%03d", f + 1);
    ids.emplace_back(buf);
    std::array<double, feederlab::kMetadataDim> m{};
    for (auto& v : m) v = rng.uniform(0.0, 30.0);
    meta.push_back(m);
  }
  std::vector<std::array<double, SampleSet::kStepDim>> steps(static_cast<std::size_t>(n_steps));
  for (auto& s : steps)
    for (auto& v : s) v = rng.uniform(-1.0, 1.0);

  SampleSet set(grid, ids, meta, steps);
  FeatureRow x;
  for (int f = 0; f < n_feeders; ++f)
    for (int j = 0; j < n_steps; ++j) {
      std::copy(meta[static_cast<std::size_t>(f)].begin(),
                meta[static_cast<std::size_t>(f)].end(), x.begin());
      std::copy(steps[static_cast<std::size_t>(j)].begin(),
                steps[static_cast<std::size_t>(j)].end(), x.begin() + feederlab::kMetadataDim);
      double t = target_fn(x);
      if (noise_sd > 0.0) t += rng.normal(0.0, noise_sd);
      set.add_row(f, j, t);
    }
  return set;
}

inline std::vector<std::size_t> all_rows(const SampleSet& s) {
  std::vector<std::size_t> rows(s.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

}  // namespace testgen
