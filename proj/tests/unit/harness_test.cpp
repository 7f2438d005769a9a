// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "conadv/harness/config.hpp"
#include "conadv/harness/data.hpp"
#include "conadv/harness/experiments.hpp"
#include "conadv/harness/report.hpp"
#include "conadv/harness/throughput.hpp"
#include "json.hpp"

using namespace conadv;
using namespace conadv::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("conadv_harness_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

dist::TrainConfig tiny(dist::Protocol p) {
  dist::TrainConfig c;
  c.protocol = p;
  c.workers = 2;
  c.global_batch = 64;
  c.epochs = 2;
  c.model_preset = "mlp";
  c.hidden = {16};
  c.attack.epsilon = 0.05;
  c.dataset = "blobs:n=512,n_test=128,d=16,z=4,seed=3";
  c.eval_each_epoch = false;
  return c;
}

const DataSplit& tiny_data() {
  static const auto d = load_dataset("blobs:n=512,n_test=128,d=16,z=4,seed=3");
  return d;
}

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, RoundTripsEveryKey) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = tiny(trial % 3 == 0 ? dist::Protocol::Vanilla : dist::Protocol::ConAdv);
    c.tau = static_cast<int>(rng() % 5);
    c.base_lr = std::uniform_real_distribution<double>(1e-4, 10.0)(rng);
    c.attack.epsilon = std::uniform_real_distribution<double>(0.0, 0.3)(rng);
    c.attack.alpha = std::uniform_real_distribution<double>(0.0, 3.0)(rng) / 7.0;
    c.attack.clamp_domain = trial % 2 ? std::nullopt : std::optional<std::pair<double, double>>{{-0.5, 1.25}};
    c.attack.step_mode = trial % 4 == 1 ? adversary::StepMode::SignGradient : adversary::StepMode::RawGradient;
    c.augmentation = trial % 5 == 2 ? dist::Augmentation::FlipCrop : dist::Augmentation::None;
    c.data_seed = rng();
    c.hidden = {static_cast<std::size_t>(rng() % 64 + 1), 7};
    EXPECT_EQ(parse_config(serialize_config(c)), c) << serialize_config(c);
  }
}

TEST(Config, EveryKeyIsReadable) {
  dist::TrainConfig c;
  for (const auto& k : config_keys()) {
    auto d = c;
    apply_setting(d, k.name, get_setting(c, k.name));
    EXPECT_EQ(d, c) << k.name;
  }
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("no_such_key = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("tau = 1\ntau = 2\n"), ConfigError);
  EXPECT_THROW(parse_config("protocol = sideways\n"), ConfigError);
  EXPECT_THROW(parse_config("global_batch = twelve\n"), ConfigError);
  EXPECT_THROW(parse_config("just words\n"), ConfigError);
  try {
    parse_config("# header\ntau = 1\nepsilon = x\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, CommentsAndFileRoundTrip) {
  const auto c = parse_config("# comment\nprotocol = disadv   # trailing\n\nglobal_batch = 512\n");
  EXPECT_EQ(c.protocol, dist::Protocol::DisAdv);
  EXPECT_EQ(c.global_batch, 512u);
  const auto path = (scratch("cfg") / "run.cfg").string();
  save_config_file(path, c);
  EXPECT_EQ(load_config_file(path), c);
  EXPECT_THROW(load_config_file(path + ".missing"), std::exception);
}

// ---------------------------------------------------------------- data

TEST(Data, BlobsExample) {
  const auto d = load_dataset("blobs:n=1000,d=16,z=4,seed=7");
  EXPECT_EQ(d.train.size(), 1000u);
  EXPECT_EQ(d.train.example_size(), 16u);
  EXPECT_EQ(d.train.num_classes, 4u);
  for (int y : d.train.labels) {
    EXPECT_GE(y, 0);
    EXPECT_LT(y, 4);
  }
}

TEST(Data, GeneratorsAreDeterministicAndInUnitRange) {
  for (const char* spec : {"glyphs:n_train=300,n_test=50,seed=2", "shapes:n_train=300,n_test=50,seed=2",
                           "blobs:n=300,n_test=50,seed=2"}) {
    const auto a = load_dataset(spec), b = load_dataset(spec);
    EXPECT_EQ(a.train.inputs, b.train.inputs) << spec;
    EXPECT_EQ(a.test.labels, b.test.labels) << spec;
    EXPECT_NE(a.train.inputs, a.test.inputs) << spec;
    for (double v : a.train.inputs) {
      ASSERT_GE(v, 0.0) << spec;
      ASSERT_LE(v, 1.0) << spec;
    }
    std::vector<int> seen(a.train.num_classes, 0);
    for (int y : a.train.labels) ++seen.at(static_cast<std::size_t>(y));
    for (int n : seen) EXPECT_GT(n, 0) << spec;
  }
}

TEST(Data, IdxRoundTripQuantizes) {
  const auto dir = scratch("idx");
  const auto src = make_glyphs(40, 8, 5);
  write_idx((dir / "x.idx").string(), (dir / "y.idx").string(), src);
  const auto back = read_idx((dir / "x.idx").string(), (dir / "y.idx").string());
  ASSERT_EQ(back.size(), 40u);
  EXPECT_EQ(back.example_shape, src.example_shape);
  EXPECT_EQ(back.labels, src.labels);
  for (std::size_t i = 0; i < src.inputs.size(); ++i) EXPECT_NEAR(back.inputs[i], src.inputs[i], 0.5 / 255 + 1e-12);
}

TEST(Data, IdxErrors) {
  const auto dir = scratch("idx_err");
  write_idx((dir / "x.idx").string(), (dir / "y.idx").string(), make_glyphs(30, 8, 1));
  write_idx((dir / "x2.idx").string(), (dir / "y2.idx").string(), make_glyphs(20, 8, 1));
  EXPECT_THROW(read_idx((dir / "x.idx").string(), (dir / "y2.idx").string()), LengthMismatchError);
  {
    std::ofstream f(dir / "bad.idx", std::ios::binary);
    f << "not an idx file at all";
  }
  EXPECT_THROW(read_idx((dir / "bad.idx").string(), (dir / "y.idx").string()), MalformedHeaderError);
  fs::resize_file(dir / "x.idx", fs::file_size(dir / "x.idx") - 10);
  EXPECT_THROW(read_idx((dir / "x.idx").string(), (dir / "y.idx").string()), LengthMismatchError);
  EXPECT_THROW(load_dataset("tarball:path=x"), UnknownFormatError);
}

TEST(Data, CsvShapesAndRescaling) {
  const auto dir = scratch("csv");
  {
    std::ofstream f(dir / "d.csv");
    f << "a,b,c,label\n";
    for (int i = 0; i < 30; ++i) f << i << "," << 2 * i << "," << -i << "," << i % 10 << "\n";
  }
  const auto d = read_csv((dir / "d.csv").string(), 10);
  EXPECT_EQ(d.size(), 30u);
  EXPECT_EQ(d.example_size(), 3u);
  EXPECT_EQ(d.num_classes, 10u);
  for (double v : d.inputs) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  {
    std::ofstream f(dir / "ragged.csv");
    f << "0.1,0.2,1\n0.3,1\n";
  }
  EXPECT_THROW(read_csv((dir / "ragged.csv").string(), 2), LengthMismatchError);
  {
    std::ofstream f(dir / "text.csv");
    f << "0.1,0.2,1\n0.3,oops,1\n";
  }
  EXPECT_THROW(read_csv((dir / "text.csv").string(), 2), MalformedHeaderError);
}

TEST(Data, SplitPartitions) {
  const auto all = make_blobs(200, 4, 3, 9);
  const auto s = split(all, 0.25, 4);
  EXPECT_EQ(s.train.size() + s.test.size(), 200u);
  EXPECT_EQ(s.test.size(), 50u);
}

// ---------------------------------------------------------------- augmentation

TEST(Augmentation, DeterministicPerSeed) {
  const auto d = load_dataset("shapes:n_train=16,n_test=1,seed=4").train;
  const auto b = d.all();
  EXPECT_EQ(model::augment_flip_crop(b, 9).inputs.data(), model::augment_flip_crop(b, 9).inputs.data());
  EXPECT_NE(model::augment_flip_crop(b, 9).inputs.data(), model::augment_flip_crop(b, 10).inputs.data());
}

TEST(Augmentation, WithoutPaddingEveryRowIsItselfOrItsMirror) {
  const auto d = load_dataset("glyphs:n_train=64,n_test=1,seed=4").train;
  const auto b = d.all();
  const auto out = model::augment_flip_crop(b, 3, 0);
  const std::size_t h = 8, w = 8;
  std::size_t flipped = 0;
  for (std::size_t r = 0; r < d.size(); ++r) {
    bool same = true, mirror = true;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double o = out.inputs.data()[r * h * w + y * w + x];
        same = same && o == b.inputs.data()[r * h * w + y * w + x];
        mirror = mirror && o == b.inputs.data()[r * h * w + y * w + (w - 1 - x)];
      }
    }
    EXPECT_TRUE(same || mirror) << r;
    flipped += mirror && !same;
  }
  EXPECT_GT(flipped, 0u);
  EXPECT_LT(flipped, d.size());
  EXPECT_EQ(out.labels, b.labels);
}

// ---------------------------------------------------------------- throughput

TEST(Throughput, AttackAsCostlyAsUpdateMatchesVanilla) {
  ThroughputModel m{1.0, 2.0, 3.0, 64, 64};
  for (std::size_t b : {64u, 512u, 2048u}) {
    EXPECT_EQ(simulated_step_ms(m, b, dist::Protocol::ConAdv), simulated_step_ms(m, b, dist::Protocol::Vanilla));
    EXPECT_EQ(simulated_step_ms(m, b, dist::Protocol::DisAdv), 6.0);
    EXPECT_EQ(simulated_step_ms(m, b, dist::Protocol::DisAdv) / simulated_step_ms(m, b, dist::Protocol::ConAdv), 2.0);
  }
}

TEST(Throughput, UnderResourcedFallsBackToSerial) {
  ThroughputModel m{1.0, 2.0, 3.0, 64, 64};
  EXPECT_EQ(simulated_step_ms(m, 4096, dist::Protocol::ConAdv), 6.0);  // K = 64 = P
  EXPECT_FALSE(simulate_throughput(m, {4096}, dist::Protocol::ConAdv)[0].overlapped);
  EXPECT_TRUE(simulate_throughput(m, {2048}, dist::Protocol::ConAdv)[0].overlapped);
  EXPECT_THROW(simulated_step_ms(m, 4097, dist::Protocol::Vanilla), std::invalid_argument);
  EXPECT_THROW(simulated_step_ms(ThroughputModel{0.0, 1.0, 1.0, 4, 4}, 4, dist::Protocol::Vanilla),
               std::invalid_argument);
}

TEST(Throughput, ConAdvNeverSlowerThanDisAdv) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> cost(0.1, 10.0);
  for (int i = 0; i < 500; ++i) {
    ThroughputModel m{cost(rng), cost(rng), cost(rng), 1 + rng() % 256, 1 + rng() % 128};
    const std::size_t batch = 1 + rng() % (m.processors * m.capacity);
    const double c = simulated_step_ms(m, batch, dist::Protocol::ConAdv);
    const double d = simulated_step_ms(m, batch, dist::Protocol::DisAdv);
    EXPECT_LE(c, d);
    EXPECT_EQ(c == d, m.processors < 2 * m.workers_for(batch));
  }
}

// ---------------------------------------------------------------- report

namespace {

std::string train_to(const fs::path& dir, dist::TrainConfig c, const std::string& name) {
  c.metrics_path = (dir / name).string();
  dist::run_training(c, tiny_data().train, tiny_data().test);
  return c.metrics_path;
}

}  // namespace

TEST(Report, SingleRunAndProtocolTriple) {
  const auto dir = scratch("report");
  const auto one = train_to(dir, tiny(dist::Protocol::Vanilla), "v.jsonl");
  auto rep = build_report({one});
  ASSERT_EQ(rep.runs.size(), 1u);
  EXPECT_EQ(rep.runs[0].protocol, "vanilla");
  EXPECT_EQ(rep.groups.size(), 1u);
  EXPECT_TRUE(rep.warnings.empty());

  const auto dis = train_to(dir, tiny(dist::Protocol::DisAdv), "d.jsonl");
  const auto con = train_to(dir, tiny(dist::Protocol::ConAdv), "c.jsonl");
  rep = emit_report({one, dis, con, (dir / "missing.jsonl").string()}, (dir / "out").string());
  EXPECT_EQ(rep.runs.size(), 3u);
  EXPECT_EQ(rep.groups.size(), 3u);
  EXPECT_EQ(rep.warnings.size(), 1u);
  for (const char* f : {"report.txt", "runs.csv", "summary.csv", "probes.csv"}) EXPECT_TRUE(fs::exists(dir / "out" / f));
}

TEST(Report, TruncatedFileIsWarnedAndNothingUsableThrows) {
  const auto dir = scratch("report_bad");
  const auto good = train_to(dir, tiny(dist::Protocol::Vanilla), "v.jsonl");
  {
    std::ifstream in(good);
    std::ofstream out(dir / "cut.jsonl");
    std::string line;
    for (int i = 0; i < 3 && std::getline(in, line); ++i) out << line << "\n";
  }
  const auto rep = build_report({good, (dir / "cut.jsonl").string()});
  EXPECT_EQ(rep.runs.size(), 1u);
  EXPECT_EQ(rep.warnings.size(), 1u);
  EXPECT_THROW(build_report({(dir / "cut.jsonl").string()}), std::exception);
}

// ---------------------------------------------------------------- sweep

TEST(Sweep, ZeroRadiusEqualsDuplicatedCleanBatch) {
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto rows = sweep_perturbation(tiny(dist::Protocol::ConAdv), {0, 3}, seeds, tiny_data());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].p, 0);
  EXPECT_EQ(rows[1].epsilon, 3.0 / 255.0);
  for (const auto& r : rows) EXPECT_EQ(r.accuracies.size(), seeds.size());

  auto clean = tiny(dist::Protocol::DisAdv);
  clean.attack.epsilon = 0.0;
  std::vector<dist::TrainConfig> configs;
  for (auto s : seeds) configs.push_back(with_seed(clean, s));
  const auto traces = run_many(configs, tiny_data());
  for (std::size_t i = 0; i < seeds.size(); ++i) EXPECT_EQ(rows[0].accuracies[i], traces[i].final_test_acc);
  const auto table = sweep_table(rows);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
}

TEST(Experiments, RunManyKeepsOrderAndMatchesSerial) {
  std::vector<dist::TrainConfig> configs;
  for (std::uint64_t s : {4, 5, 6}) configs.push_back(with_seed(tiny(dist::Protocol::ConAdv), s));
  const auto serial = run_many(configs, tiny_data(), 1);
  const auto parallel = run_many(configs, tiny_data(), 3);
  for (std::size_t i = 0; i < configs.size(); ++i) EXPECT_EQ(serial[i].final_hash, parallel[i].final_hash);
  const auto ms = mean_sd({1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(ms.mean, 2.0);
  EXPECT_DOUBLE_EQ(ms.sd, 1.0);
}

// ---------------------------------------------------------------- cli

namespace {

std::vector<nlohmann::json> without_timings(const fs::path& path) {
  std::ifstream in(path);
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    for (const char* k : {"t_update_ms", "t_gen_ms", "t_step_ms", "wall_ms"}) j.erase(k);
    out.push_back(j);
  }
  return out;
}

}  // namespace

TEST(Cli, TrainIsReproducibleModuloTimings) {
  const auto dir = scratch("cli");
  const std::string args =
      " train --protocol conadv --tau 2 --workers 2 --global_batch 64 --epochs 2 --model mlp --hidden 16"
      " --dataset blobs:n=256,n_test=64,d=8,z=3 > /dev/null";
  for (const char* run : {"a", "b"}) {
    const auto cmd = std::string(CONADV_CLI) + " --out " + (dir / run).string() + args;
    ASSERT_EQ(std::system(cmd.c_str()), 0) << cmd;
  }
  const auto a = without_timings(dir / "a" / "conadv_b64_s1.jsonl");
  const auto b = without_timings(dir / "b" / "conadv_b64_s1.jsonl");
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.front()["type"], "run");
  EXPECT_EQ(a.back()["type"], "final");
  EXPECT_EQ(load_config_file((dir / "a" / "conadv_b64_s1.cfg").string()).tau, 2);
}
