// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "conadv/dist/train_config.hpp"
#include "conadv/model/dataset.hpp"
#include "json.hpp"

namespace conadv::harness {

/// Per-step phase costs of one worker holding at most `capacity` examples.
/// A global batch B needs K = ceil(B / capacity) workers; overlapping
/// generation with the update needs 2K processors.
struct ThroughputModel {
  double t_fwd = 1.0;
  double t_bwd = 2.0;
  double t_attack = 3.0;
  std::size_t processors = 64;
  std::size_t capacity = 64;

  /// Throws std::invalid_argument unless every cost is > 0 and capacity > 0.
  void validate() const;
  std::size_t workers_for(std::size_t batch) const;
};

struct ThroughputRow {
  std::size_t batch = 0;
  std::size_t workers = 0;
  double step_ms = 0.0;
  double images_per_ms = 0.0;
  bool overlapped = false;  // conadv only: the two phases ran side by side
};

/// Step time per protocol: vanilla fwd + bwd, disadv attack + fwd + bwd,
/// conadv max(attack, fwd + bwd) when processors >= 2K and disadv timing
/// otherwise. Throws std::invalid_argument when processors < K for a batch.
std::vector<ThroughputRow> simulate_throughput(const ThroughputModel& m, const std::vector<std::size_t>& batches,
                                               dist::Protocol protocol);
double simulated_step_ms(const ThroughputModel& m, std::size_t batch, dist::Protocol protocol);

struct BenchConfig {
  dist::TrainConfig train;  // protocol and exec are overridden per measured mode
  std::size_t warmup = 3;
  std::size_t timed = 10;
};

struct ModeTiming {
  std::string mode;  // vanilla, disadv, conadv-sequential, conadv-overlap
  double median_step_ms = 0.0;
  double median_update_ms = 0.0;
  double median_gen_ms = 0.0;
  std::vector<double> step_ms;
};

struct BenchResult {
  std::vector<ModeTiming> modes;
  unsigned hardware_threads = 0;
  bool trajectory_equal = false;  // overlap and sequential conadv reached identical states every step
  bool flagged = false;           // timings not trustworthy: single thread or trajectory mismatch
  double overlap_over_disadv = 0.0;
  double sequential_over_disadv = 0.0;
  double overlap_over_vanilla = 0.0;
  double phase_balance = 0.0;  // disadv median generation / median update
  ThroughputModel calibrated;  // measured costs, for simulate_throughput
  std::vector<std::string> warnings;

  const ModeTiming& mode(const std::string& name) const;
  nlohmann::json to_json() const;
};

/// Times warmup + timed steps of every mode on identical configs and data.
/// Before timings are reported the overlap trajectory is compared step by
/// step against sequential execution; a mismatch flags the result.
BenchResult bench_wallclock(const BenchConfig& cfg, const model::Dataset& train);

}  // namespace conadv::harness
