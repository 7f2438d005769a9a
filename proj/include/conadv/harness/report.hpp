// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace conadv::harness {

struct RunRow {
  std::string file;
  std::string protocol;
  int tau = 0;
  std::size_t workers = 0;
  std::size_t global_batch = 0;
  double epsilon = 0.0;
  std::string augmentation;
  std::uint64_t seed = 0;  // init seed
  std::size_t steps = 0;
  double test_acc = 0.0;
  double mean_step_ms = 0.0;
  double images_per_ms = 0.0;
};

struct GroupRow {
  std::string protocol;
  std::size_t global_batch = 0;
  double epsilon = 0.0;
  std::string augmentation;
  std::size_t runs = 0;
  double acc_mean = 0.0;
  double acc_sd = 0.0;
  double images_per_ms = 0.0;
};

struct ProbeRow {
  std::string file;
  std::string check;
  std::size_t evaluations = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;
};

struct Report {
  std::vector<RunRow> runs;
  std::vector<GroupRow> groups;  // by protocol, batch, epsilon, augmentation
  std::vector<ProbeRow> probes;
  std::vector<std::string> warnings;  // one per skipped file

  std::string text() const;
  std::string runs_csv() const;
  std::string groups_csv() const;
  std::string probes_csv() const;
};

/// Reads training metrics (JSON lines) and probe reports (one JSON object with
/// a "checks" array). Missing, unreadable or truncated files are skipped and
/// listed in warnings. Throws std::runtime_error when no file is usable.
Report build_report(const std::vector<std::string>& files);

/// build_report, then report.txt, runs.csv, summary.csv and probes.csv in out_dir.
Report emit_report(const std::vector<std::string>& files, const std::string& out_dir);

}  // namespace conadv::harness
