// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0
//
// conadv: train, bench, probe, sweep and report subcommands.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "conadv/dist/training.hpp"
#include "conadv/harness/config.hpp"
#include "conadv/harness/data.hpp"
#include "conadv/harness/experiments.hpp"
#include "conadv/harness/report.hpp"
#include "conadv/harness/throughput.hpp"
#include "conadv/theory/probe.hpp"

namespace fs = std::filesystem;
using namespace conadv;

namespace {

constexpr const char* kOutputEnv = "CONADV_OUTPUT_DIR";

// Config file, then --set key=value, then the per-key flags.
struct ConfigOptions {
  std::string file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override one key, key=value (repeatable)");
    auto* group = app->add_option_group("config keys");
    for (const auto& k : harness::config_keys()) {
      group->add_option("--" + k.name, flags[k.name], k.help);
    }
  }

  dist::TrainConfig resolve(CLI::App* app) const {
    dist::TrainConfig cfg;
    if (!file.empty()) cfg = harness::load_config_file(file);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw harness::ConfigError("--set expects key=value, got '" + s + "'");
      harness::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [key, value] : flags) {
      if (app->count("--" + key)) harness::apply_setting(cfg, key, value);
    }
    return cfg;
  }
};

std::string output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputEnv); env != nullptr && *env) return env;
  return "runs";
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::logic_error&) {
      throw CLI::ValidationError(what, "'" + item + "' is not an integer");
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
}

int cmd_train(CLI::App* app, const ConfigOptions& co, const std::string& seeds_text, std::size_t parallel,
              const std::string& out_flag) {
  const auto base = co.resolve(app);
  const auto out = output_dir(out_flag);
  fs::create_directories(out);
  const auto data = harness::load_dataset(base.dataset);
  std::vector<dist::TrainConfig> configs;
  const auto seeds = seeds_text.empty() ? std::vector<std::uint64_t>{base.init_seed}
                                        : parse_list<std::uint64_t>(seeds_text, "--seeds");
  for (auto s : seeds) {
    auto c = seeds_text.empty() ? base : harness::with_seed(base, s);
    if (c.metrics_path.empty() || seeds.size() > 1) {
      c.metrics_path = (fs::path(out) / (dist::protocol_name(c.protocol) + "_b" + std::to_string(c.global_batch) +
                                         "_s" + std::to_string(c.init_seed) + ".jsonl"))
                           .string();
    }
    c.validate();
    harness::save_config_file(fs::path(c.metrics_path).replace_extension(".cfg").string(), c);
    configs.push_back(c);
  }
  const auto traces = harness::run_many(configs, data, parallel);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    std::printf("%s seed=%llu steps=%zu test_acc=%.4f wall=%.1fs hash=%016llx -> %s\n",
                dist::protocol_name(configs[i].protocol).c_str(),
                static_cast<unsigned long long>(configs[i].init_seed), traces[i].steps.size(), traces[i].final_test_acc,
                traces[i].wall_ms / 1000.0, static_cast<unsigned long long>(traces[i].final_hash),
                configs[i].metrics_path.c_str());
  }
  return 0;
}

struct BenchOptions {
  std::size_t warmup = 3, timed = 10;
  std::string simulate = "64,256,1024,4096";
  bool simulate_only = false;
  double t_fwd = 0, t_bwd = 0, t_attack = 0;
  std::size_t processors = 0, capacity = 0;
};

int cmd_bench(CLI::App* app, const ConfigOptions& co, const BenchOptions& bo, const std::string& out_flag) {
  const auto out = output_dir(out_flag);
  fs::create_directories(out);
  harness::ThroughputModel model;
  nlohmann::json j;
  if (!bo.simulate_only) {
    auto cfg = co.resolve(app);
    cfg.validate();
    const auto data = harness::load_dataset(cfg.dataset);
    const auto r = harness::bench_wallclock({cfg, bo.warmup, bo.timed}, data.train);
    for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    std::printf("%-18s %12s %12s %12s\n", "mode", "step ms", "update ms", "gen ms");
    for (const auto& m : r.modes) {
      std::printf("%-18s %12.3f %12.3f %12.3f\n", m.mode.c_str(), m.median_step_ms, m.median_update_ms,
                  m.median_gen_ms);
    }
    std::printf("overlap/disadv %.3f  sequential/disadv %.3f  overlap/vanilla %.3f  gen/update %.3f\n",
                r.overlap_over_disadv, r.sequential_over_disadv, r.overlap_over_vanilla, r.phase_balance);
    std::printf("hardware threads %u, trajectory equal %s%s\n", r.hardware_threads, r.trajectory_equal ? "yes" : "no",
                r.flagged ? ", RESULT FLAGGED" : "");
    j["measured"] = r.to_json();
    model = r.calibrated;
  }
  if (bo.t_fwd > 0) model.t_fwd = bo.t_fwd;
  if (bo.t_bwd > 0) model.t_bwd = bo.t_bwd;
  if (bo.t_attack > 0) model.t_attack = bo.t_attack;
  if (bo.capacity > 0) model.capacity = bo.capacity;
  const auto batches = parse_list<std::size_t>(bo.simulate, "--simulate");
  std::size_t need = 1;
  for (auto b : batches) need = std::max(need, 2 * model.workers_for(b));
  model.processors = bo.processors > 0 ? bo.processors : need;
  std::printf("\nsimulated (t_fwd %.4g, t_bwd %.4g, t_attack %.4g, P %zu, capacity %zu)\n", model.t_fwd, model.t_bwd,
              model.t_attack, model.processors, model.capacity);
  std::printf("%8s %6s %14s %14s %14s\n", "batch", "K", "vanilla img/ms", "disadv img/ms", "conadv img/ms");
  const auto van = harness::simulate_throughput(model, batches, dist::Protocol::Vanilla);
  const auto dis = harness::simulate_throughput(model, batches, dist::Protocol::DisAdv);
  const auto con = harness::simulate_throughput(model, batches, dist::Protocol::ConAdv);
  std::string csv = "batch,workers,vanilla_images_per_ms,disadv_images_per_ms,conadv_images_per_ms,conadv_overlapped\n";
  for (std::size_t i = 0; i < batches.size(); ++i) {
    std::printf("%8zu %6zu %14.3f %14.3f %14.3f%s\n", batches[i], van[i].workers, van[i].images_per_ms,
                dis[i].images_per_ms, con[i].images_per_ms, con[i].overlapped ? "" : "  (no overlap)");
    csv += std::to_string(batches[i]) + "," + std::to_string(van[i].workers) + "," +
           std::to_string(van[i].images_per_ms) + "," + std::to_string(dis[i].images_per_ms) + "," +
           std::to_string(con[i].images_per_ms) + "," + (con[i].overlapped ? "true" : "false") + "\n";
  }
  write_text(fs::path(out) / "throughput.csv", csv);
  j["simulated_model"] = {{"t_fwd", model.t_fwd},
                          {"t_bwd", model.t_bwd},
                          {"t_attack", model.t_attack},
                          {"processors", model.processors},
                          {"capacity", model.capacity}};
  write_text(fs::path(out) / "bench.json", j.dump(2) + "\n");
  return 0;
}

int cmd_probe(const theory::CertifyConfig& cfg, const std::string& out_flag, bool print_json) {
  const auto out = output_dir(out_flag);
  fs::create_directories(out);
  const auto rep = theory::certify(cfg);
  auto j = rep.to_json();
  j["type"] = "probe";
  const auto path = fs::path(out) / "probe.json";
  write_text(path, j.dump(2) + "\n");
  std::printf("%s", rep.summary_table().c_str());
  if (print_json) std::printf("%s\n", j.dump(2).c_str());
  std::printf("%s -> %s\n", rep.ok() ? "all bounds hold" : "BOUND VIOLATIONS", path.string().c_str());
  return rep.ok() ? 0 : 1;
}

int cmd_sweep(CLI::App* app, const ConfigOptions& co, const std::string& p_text, const std::string& seeds_text,
              std::size_t parallel, const std::string& out_flag) {
  auto cfg = co.resolve(app);
  cfg.validate();
  const auto out = output_dir(out_flag);
  fs::create_directories(out);
  const auto data = harness::load_dataset(cfg.dataset);
  const auto p = parse_list<int>(p_text, "--p");
  const auto seeds = parse_list<std::uint64_t>(seeds_text, "--seeds");
  const auto rows = harness::sweep_perturbation(cfg, p, seeds, data, parallel, out);
  std::printf("%s", harness::sweep_table(rows).c_str());
  std::string csv = "p,epsilon,runs,acc_mean,acc_sd\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%zu,%.17g,%.17g\n", r.p, r.epsilon, r.accuracies.size(), r.acc.mean,
                  r.acc.sd);
    csv += buf;
  }
  write_text(fs::path(out) / "sweep.csv", csv);
  return 0;
}

int cmd_report(const std::vector<std::string>& files, const std::string& out_flag) {
  const auto out = output_dir(out_flag);
  const auto rep = harness::emit_report(files, out);
  std::printf("%s", rep.text().c_str());
  std::printf("tables written to %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concurrent adversarial training harness"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out;
  app.add_option("--out", out, std::string("output directory (default $") + kOutputEnv + ", else ./runs)");

  auto* train = app.add_subcommand("train", "train one run per seed and write JSON-lines metrics");
  ConfigOptions train_cfg;
  train_cfg.attach(train);
  std::string train_seeds;
  std::size_t parallel = 1;
  train->add_option("--seeds", train_seeds, "comma-separated seeds; each sets data, init and attack seed");
  train->add_option("--parallel-runs", parallel, "independent runs executed concurrently")->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("bench", "measure phase timings and evaluate the throughput model");
  ConfigOptions bench_cfg;
  bench_cfg.attach(bench);
  BenchOptions bo;
  bench->add_option("--warmup", bo.warmup, "untimed steps per mode");
  bench->add_option("--timed", bo.timed, "timed steps per mode")->check(CLI::PositiveNumber);
  bench->add_option("--simulate", bo.simulate, "comma-separated batch sizes for the throughput model");
  bench->add_flag("--simulate-only", bo.simulate_only, "skip measurement and use supplied costs");
  bench->add_option("--t-fwd", bo.t_fwd, "forward cost per worker step");
  bench->add_option("--t-bwd", bo.t_bwd, "backward cost per worker step");
  bench->add_option("--t-attack", bo.t_attack, "attack cost per worker step");
  bench->add_option("--processors", bo.processors, "processor budget P (default: 2K for the largest batch)");
  bench->add_option("--capacity", bo.capacity, "examples per worker");

  auto* probe = app.add_subcommand("probe", "certify the convergence bounds on the quadratic testbed");
  theory::CertifyConfig pc;
  bool print_json = false;
  probe->add_option("--problem-seed", pc.problem_seed, "instance seed");
  probe->add_option("--seed", pc.seed, "sampling seed");
  probe->add_option("--steps", pc.steps, "steps per trajectory check");
  probe->add_option("--pairs", pc.pairs, "random pairs for the smoothness check");
  probe->add_option("--clip", pc.M, "gradient clipping norm M");
  probe->add_option("--alpha", pc.alpha, "PGD step size");
  probe->add_flag("--convergence", pc.convergence, "also run the rate and floor study (minutes)");
  probe->add_option("--reps", pc.convergence_config.repetitions, "repetitions per horizon for --convergence");
  probe->add_flag("--json", print_json, "print the JSON report to stdout as well");

  auto* sweep = app.add_subcommand("sweep", "final accuracy over perturbation levels epsilon = p/255");
  ConfigOptions sweep_cfg;
  sweep_cfg.attach(sweep);
  std::string p_text = "0,1,2,4,8", sweep_seeds = "1";
  sweep->add_option("--p", p_text, "comma-separated p values");
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds");
  sweep->add_option("--parallel-runs", parallel, "independent runs executed concurrently")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "aggregate metrics and probe files into tables");
  std::vector<std::string> files;
  report->add_option("files", files, "metrics (.jsonl) or probe (.json) files")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(train, train_cfg, train_seeds, parallel, out);
    if (*bench) return cmd_bench(bench, bench_cfg, bo, out);
    if (*probe) return cmd_probe(pc, out, print_json);
    if (*sweep) return cmd_sweep(sweep, sweep_cfg, p_text, sweep_seeds, parallel, out);
    if (*report) return cmd_report(files, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
