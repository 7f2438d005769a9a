// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "conadv/dist/training.hpp"
#include "conadv/harness/data.hpp"

namespace conadv::harness {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for fewer than two values
};
MeanSd mean_sd(const std::vector<double>& v);

/// Runs independent configs, up to `parallel_runs` at a time. Results keep
/// the input order. The first failure is rethrown after all runs finish.
std::vector<dist::MetricsTrace> run_many(const std::vector<dist::TrainConfig>& configs, const DataSplit& data,
                                         std::size_t parallel_runs = 1);

/// Same config under another seed triple (data, init, attack all set to `seed`).
dist::TrainConfig with_seed(dist::TrainConfig cfg, std::uint64_t seed);

struct SweepRow {
  int p = 0;
  double epsilon = 0.0;  // p / 255
  std::vector<double> accuracies;  // one per seed
  MeanSd acc;
};

/// One run per (p, seed) with epsilon = p / 255. Metrics files go to
/// out_dir/sweep_p<p>_s<seed>.jsonl when out_dir is not empty.
std::vector<SweepRow> sweep_perturbation(const dist::TrainConfig& base, const std::vector<int>& p_values,
                                         const std::vector<std::uint64_t>& seeds, const DataSplit& data,
                                         std::size_t parallel_runs = 1, const std::string& out_dir = "");

std::string sweep_table(const std::vector<SweepRow>& rows);

}  // namespace conadv::harness
