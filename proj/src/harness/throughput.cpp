// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include "conadv/harness/throughput.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <thread>

#include "conadv/dist/training.hpp"

namespace conadv::harness {

using dist::Protocol;

void ThroughputModel::validate() const {
  if (!(t_fwd > 0.0 && t_bwd > 0.0 && t_attack > 0.0)) throw std::invalid_argument("phase costs must be > 0");
  if (capacity == 0) throw std::invalid_argument("per-worker capacity must be > 0");
}

std::size_t ThroughputModel::workers_for(std::size_t batch) const { return (batch + capacity - 1) / capacity; }

double simulated_step_ms(const ThroughputModel& m, std::size_t batch, Protocol protocol) {
  m.validate();
  if (batch == 0) throw std::invalid_argument("batch must be > 0");
  const std::size_t k = m.workers_for(batch);
  if (m.processors < k) {
    throw std::invalid_argument("batch " + std::to_string(batch) + " needs " + std::to_string(k) + " workers but only " +
                                std::to_string(m.processors) + " processors are available");
  }
  const double update = m.t_fwd + m.t_bwd;
  switch (protocol) {
    case Protocol::Vanilla:
      return update;
    case Protocol::DisAdv:
      return m.t_attack + update;
    case Protocol::ConAdv:
      break;
  }
  return m.processors >= 2 * k ? std::max(m.t_attack, update) : m.t_attack + update;
}

std::vector<ThroughputRow> simulate_throughput(const ThroughputModel& m, const std::vector<std::size_t>& batches,
                                               Protocol protocol) {
  std::vector<ThroughputRow> rows;
  rows.reserve(batches.size());
  for (auto b : batches) {
    ThroughputRow r;
    r.batch = b;
    r.step_ms = simulated_step_ms(m, b, protocol);
    r.workers = m.workers_for(b);
    r.images_per_ms = static_cast<double>(b) / r.step_ms;
    r.overlapped = protocol == Protocol::ConAdv && m.processors >= 2 * r.workers;
    rows.push_back(r);
  }
  return rows;
}

const ModeTiming& BenchResult::mode(const std::string& name) const {
  for (const auto& m : modes) {
    if (m.mode == name) return m;
  }
  throw std::out_of_range("no timing for mode " + name);
}

nlohmann::json BenchResult::to_json() const {
  nlohmann::json j;
  for (const auto& m : modes) {
    j["modes"][m.mode] = {{"median_step_ms", m.median_step_ms},
                          {"median_update_ms", m.median_update_ms},
                          {"median_gen_ms", m.median_gen_ms},
                          {"step_ms", m.step_ms}};
  }
  j["hardware_threads"] = hardware_threads;
  j["trajectory_equal"] = trajectory_equal;
  j["flagged"] = flagged;
  j["overlap_over_disadv"] = overlap_over_disadv;
  j["sequential_over_disadv"] = sequential_over_disadv;
  j["overlap_over_vanilla"] = overlap_over_vanilla;
  j["phase_balance"] = phase_balance;
  j["calibrated"] = {{"t_fwd", calibrated.t_fwd},
                     {"t_bwd", calibrated.t_bwd},
                     {"t_attack", calibrated.t_attack},
                     {"processors", calibrated.processors},
                     {"capacity", calibrated.capacity}};
  j["warnings"] = warnings;
  return j;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct ModeRun {
  ModeTiming timing;
  std::vector<std::uint64_t> hashes;
};

ModeRun run_mode(const std::string& name, dist::TrainConfig cfg, const model::Dataset& train, std::size_t warmup,
                 std::size_t timed) {
  cfg.max_steps = std::max<std::size_t>(cfg.max_steps, warmup + timed);
  cfg.metrics_path.clear();
  dist::TrainingSession session(cfg, train);
  ModeRun out;
  out.timing.mode = name;
  std::vector<double> upd, gen;
  for (std::size_t s = 0; s < warmup + timed; ++s) {
    const auto m = session.step();
    out.hashes.push_back(model::state_hash(session.current_model()));
    if (s < warmup) continue;
    out.timing.step_ms.push_back(m.t_step_ms);
    upd.push_back(m.t_update_ms);
    gen.push_back(m.t_gen_ms);
  }
  out.timing.median_step_ms = median(out.timing.step_ms);
  out.timing.median_update_ms = median(upd);
  out.timing.median_gen_ms = median(gen);
  return out;
}

}  // namespace

BenchResult bench_wallclock(const BenchConfig& cfg, const model::Dataset& train) {
  if (cfg.timed == 0) throw std::invalid_argument("bench needs at least one timed step");
  BenchResult r;
  r.hardware_threads = std::thread::hardware_concurrency();
  if (r.hardware_threads < 2) {
    r.flagged = true;
    r.warnings.push_back("overlap requested with " + std::to_string(r.hardware_threads) +
                         " hardware thread(s): generation and update share one core, speedups are not meaningful");
  }
  auto with = [&](Protocol p, dist::ExecMode e) {
    auto c = cfg.train;
    c.protocol = p;
    c.exec = e;
    if (p == Protocol::ConAdv && c.tau < 1) c.tau = 1;
    return c;
  };
  using dist::ExecMode;
  // Correctness first: the overlapped trajectory must equal the sequential one.
  auto seq = run_mode("conadv-sequential", with(Protocol::ConAdv, ExecMode::Sequential), train, cfg.warmup, cfg.timed);
  auto ovl = run_mode("conadv-overlap", with(Protocol::ConAdv, ExecMode::Overlap), train, cfg.warmup, cfg.timed);
  r.trajectory_equal = seq.hashes == ovl.hashes;
  if (!r.trajectory_equal) {
    r.flagged = true;
    r.warnings.push_back("overlap trajectory differs from sequential execution; timings are not trusted");
  }
  auto dis = run_mode("disadv", with(Protocol::DisAdv, ExecMode::Sequential), train, cfg.warmup, cfg.timed);
  auto van = run_mode("vanilla", with(Protocol::Vanilla, ExecMode::Sequential), train, cfg.warmup, cfg.timed);
  r.modes = {van.timing, dis.timing, seq.timing, ovl.timing};

  const double d = dis.timing.median_step_ms;
  r.overlap_over_disadv = ovl.timing.median_step_ms / d;
  r.sequential_over_disadv = seq.timing.median_step_ms / d;
  r.overlap_over_vanilla = ovl.timing.median_step_ms / van.timing.median_step_ms;
  r.phase_balance = dis.timing.median_gen_ms / dis.timing.median_update_ms;

  // Only fwd + bwd enters the step model, so the measured update is split evenly.
  const double local = static_cast<double>(cfg.train.global_batch / static_cast<std::size_t>(cfg.train.workers));
  r.calibrated.capacity = static_cast<std::size_t>(local);
  r.calibrated.processors = std::max<std::size_t>(1, r.hardware_threads);
  r.calibrated.t_attack = std::max(dis.timing.median_gen_ms, 1e-6);
  r.calibrated.t_fwd = r.calibrated.t_bwd = std::max(0.5 * dis.timing.median_update_ms, 1e-6);
  return r;
}

}  // namespace conadv::harness
