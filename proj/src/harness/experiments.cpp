// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include "conadv/harness/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <thread>

namespace conadv::harness {

MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return r;
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return r;
}

std::vector<dist::MetricsTrace> run_many(const std::vector<dist::TrainConfig>& configs, const DataSplit& data,
                                         std::size_t parallel_runs) {
  std::vector<dist::MetricsTrace> out(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < configs.size();) {
      try {
        out[i] = dist::run_training(configs[i], data.train, data.test);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(std::max<std::size_t>(parallel_runs, 1), configs.size());
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

dist::TrainConfig with_seed(dist::TrainConfig cfg, std::uint64_t seed) {
  cfg.data_seed = cfg.init_seed = cfg.attack_seed = seed;
  return cfg;
}

std::vector<SweepRow> sweep_perturbation(const dist::TrainConfig& base, const std::vector<int>& p_values,
                                         const std::vector<std::uint64_t>& seeds, const DataSplit& data,
                                         std::size_t parallel_runs, const std::string& out_dir) {
  if (seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");
  std::vector<dist::TrainConfig> configs;
  for (int p : p_values) {
    if (p < 0) throw std::invalid_argument("perturbation level p must be >= 0, got " + std::to_string(p));
    for (auto s : seeds) {
      auto c = with_seed(base, s);
      c.attack.epsilon = p / 255.0;
      c.metrics_path = out_dir.empty() ? ""
                                       : (std::filesystem::path(out_dir) /
                                          ("sweep_p" + std::to_string(p) + "_s" + std::to_string(s) + ".jsonl"))
                                             .string();
      configs.push_back(c);
    }
  }
  const auto traces = run_many(configs, data, parallel_runs);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < p_values.size(); ++i) {
    SweepRow r;
    r.p = p_values[i];
    r.epsilon = p_values[i] / 255.0;
    for (std::size_t j = 0; j < seeds.size(); ++j) r.accuracies.push_back(traces[i * seeds.size() + j].final_test_acc);
    r.acc = mean_sd(r.accuracies);
    rows.push_back(r);
  }
  return rows;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::string out = "    p   epsilon   test_acc mean +- sd   runs\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%5d  %8.5f   %8.4f +- %-8.4f  %4zu\n", r.p, r.epsilon, r.acc.mean, r.acc.sd,
                  r.accuracies.size());
    out += buf;
  }
  return out;
}

}  // namespace conadv::harness
