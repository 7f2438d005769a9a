// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "../support/random_tensor.hpp"
#include "conadv/autodiff/gradcheck.hpp"
#include "conadv/model/model.hpp"

using namespace conadv;
using namespace conadv::model;
using conadv::testing::uniform_tensor;

namespace {

LabeledBatch make_batch(ad::Shape example, std::size_t n, std::uint64_t seed, std::size_t classes = 10) {
  ad::Shape shape{n};
  shape.insert(shape.end(), example.begin(), example.end());
  LabeledBatch b{uniform_tensor(shape, seed, 0.0, 1.0), {}, {}};
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>((i * 7 + seed) % classes));
  b.ids.resize(n);
  std::iota(b.ids.begin(), b.ids.end(), std::size_t{0});
  return b;
}

Model tiny_mlp(std::uint64_t seed = 3) {
  return init_model(make_architecture("mlp", {6}, 4, {5, 4}), seed);
}

}  // namespace

TEST(ModelArchitecture, PresetsAndErrors) {
  auto mlp = make_architecture("mlp", {784}, 10);
  auto m = init_model(mlp, 1);
  EXPECT_EQ(m.params.parameter_count(), 784 * 256 + 256 + 2 * 256 + 256 * 128 + 128 + 2 * 128 + 128 * 10 + 10);
  EXPECT_EQ(m.bn.size(), 2u);
  auto cnn = init_model(make_architecture("cnn", {1, 8, 8}, 10), 1);
  EXPECT_EQ(cnn.bn.size(), 2u);
  EXPECT_EQ(cnn.params.tensors.back().tensor.shape(), ad::Shape{10});
  EXPECT_THROW(make_architecture("resnet", {4}, 10), std::invalid_argument);
  EXPECT_THROW(make_architecture("cnn", {64}, 10), std::invalid_argument);
}

TEST(ModelForward, ConstantBatchNormalizesToZero) {
  auto m = init_model(make_architecture("mlp", {3}, 2, {4}), 9);
  LabeledBatch b{ad::Tensor::filled({5, 3}, 0.7), {0, 1, 0, 1, 0}, {}};
  model_forward(m, b, BnBranch::Main, Phase::Train);
  auto logits = model_forward(m, b, BnBranch::Main, Phase::Train);
  for (double v : logits.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(ModelForward, TrainOnMainLeavesAuxUntouched) {
  auto m = tiny_mlp();
  const auto aux_before = m.bn;
  for (std::uint64_t s = 0; s < 5; ++s) model_forward(m, make_batch({6}, 8, s, 4), BnBranch::Main, Phase::Train);
  model_forward(m, make_batch({6}, 8, 11, 4), BnBranch::Main, Phase::Eval);
  for (std::size_t i = 0; i < m.bn.size(); ++i) {
    EXPECT_EQ(m.bn[i].aux.mean, aux_before[i].aux.mean);
    EXPECT_EQ(m.bn[i].aux.var, aux_before[i].aux.var);
    EXPECT_NE(m.bn[i].main.mean, aux_before[i].main.mean);
  }
}

TEST(ModelForward, FreshBranchesGiveIdenticalLogits) {
  const auto m = tiny_mlp();
  const auto b = make_batch({6}, 8, 2, 4);
  EXPECT_EQ(model_forward(m, b, BnBranch::Main).data(), model_forward(m, b, BnBranch::Aux).data());
}

TEST(ModelForward, EvalIsPure) {
  auto m = init_model(make_architecture("cnn", {1, 8, 8}, 10), 4);
  model_forward(m, make_batch({1, 8, 8}, 6, 1), BnBranch::Aux, Phase::Train);
  const auto h = state_hash(m);
  model_forward(m, make_batch({1, 8, 8}, 6, 2), BnBranch::Main, Phase::Eval);
  model_forward(m, make_batch({1, 8, 8}, 6, 3), BnBranch::Aux, Phase::Eval);
  input_gradient(m, make_batch({1, 8, 8}, 6, 3), BnBranch::Aux);
  EXPECT_EQ(state_hash(m), h);
}

TEST(ModelForward, RunningVarianceIsUnbiasedEma) {
  auto m = init_model(make_architecture("mlp", {1}, 2, {1}), 5);
  m.params.tensors[0].tensor[0] = 1.0;  // dense 1->1 weight
  LabeledBatch b{ad::Tensor({4, 1}, {0, 1, 2, 3}), {0, 1, 0, 1}, {}};
  model_forward(m, b, BnBranch::Main, Phase::Train);
  EXPECT_NEAR(m.bn[0].main.mean[0], 0.1 * 1.5, 1e-15);
  EXPECT_NEAR(m.bn[0].main.var[0], 0.9 + 0.1 * (5.0 / 3.0), 1e-15);
}

TEST(ModelForward, Errors) {
  auto m = tiny_mlp();
  EXPECT_THROW(model_forward(m, make_batch({6}, 1, 0, 4), BnBranch::Main, Phase::Train), DataError);
  EXPECT_NO_THROW(model_forward(m, make_batch({6}, 1, 0, 4), BnBranch::Main, Phase::Eval));
  auto bad = make_batch({6}, 4, 0, 4);
  bad.labels[2] = 4;
  EXPECT_THROW(model_forward(m, bad, BnBranch::Main, Phase::Train), DataError);
  EXPECT_THROW(model_forward(m, make_batch({5}, 4, 0, 4), BnBranch::Main, Phase::Eval), DataError);
}

TEST(ModelLoss, DuplicateBatchEqualsCleanLoss) {
  auto a = tiny_mlp();
  auto b = a;
  const auto batch = make_batch({6}, 8, 7, 4);
  const auto both = loss_and_grads(a, batch, batch);
  const auto clean = clean_loss_and_grads(b, batch);
  EXPECT_NEAR(both.loss, clean.loss, 1e-14);
  for (std::size_t i = 0; i < both.grads.size(); ++i)
    EXPECT_LT(ad::max_abs_diff(both.grads[i].values(), clean.grads[i].values()), 1e-14);
}

TEST(ModelLoss, UniformLogitsGiveLogZ) {
  auto m = init_model(make_architecture("linear", {6}, 10), 1);
  for (auto& v : m.params.tensors[0].tensor.values()) v = 0.0;
  const auto batch = make_batch({6}, 5, 1);
  const auto r = loss_and_grads(m, batch, make_batch({6}, 5, 2));
  EXPECT_NEAR(r.clean_loss, 2.302585092994046, 1e-12);
}

TEST(ModelLoss, SizeMismatchRejected) {
  auto m = tiny_mlp();
  EXPECT_THROW(loss_and_grads(m, make_batch({6}, 4, 0, 4), make_batch({6}, 5, 0, 4)), DataError);
}

TEST(ModelLoss, GradientsMatchFiniteDifferences) {
  const auto base = tiny_mlp(21);
  const auto clean = make_batch({6}, 6, 1, 4);
  const auto adv = make_batch({6}, 6, 2, 4);
  auto work = base;
  const auto analytic = loss_and_grads(work, clean, adv);
  for (std::size_t p = 0; p < base.params.tensors.size(); ++p) {
    auto f = [&](const ad::Tensor& at) {
      auto m = base;
      m.params.tensors[p].tensor = at;
      return loss_and_grads(m, clean, adv).loss;
    };
    auto g = [&](const ad::Tensor& at) {
      auto m = base;
      m.params.tensors[p].tensor = at;
      return loss_and_grads(m, clean, adv).grads[p].data();
    };
    EXPECT_LE(ad::finite_diff_check(f, g, base.params.tensors[p].tensor), 1e-6) << base.params.tensors[p].name;
    EXPECT_EQ(g(base.params.tensors[p].tensor), analytic.grads[p].data());
  }
}

TEST(ModelLoss, ParallelBranchesMatchSequential) {
  auto a = init_model(make_architecture("cnn", {1, 8, 8}, 10), 8);
  auto b = a;
  const auto clean = make_batch({1, 8, 8}, 6, 1);
  const auto adv = make_batch({1, 8, 8}, 6, 2);
  const auto s = loss_and_grads(a, clean, adv, BnMode::Batch, false);
  const auto p = loss_and_grads(b, clean, adv, BnMode::Batch, true);
  EXPECT_EQ(s.loss, p.loss);
  for (std::size_t i = 0; i < s.grads.size(); ++i) EXPECT_EQ(s.grads[i].data(), p.grads[i].data());
  EXPECT_EQ(state_hash(a), state_hash(b));
}

TEST(ModelProperty, SwappingRolesAndBranchStatesKeepsLoss) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = tiny_mlp(seed);
    for (std::uint64_t s = 0; s < 3; ++s) {
      model_forward(m, make_batch({6}, 8, 100 + s, 4), BnBranch::Main, Phase::Train);
      model_forward(m, make_batch({6}, 8, 200 + s, 4), BnBranch::Aux, Phase::Train);
    }
    auto swapped = m;
    for (auto& s : swapped.bn) std::swap(s.main, s.aux);
    const auto clean = make_batch({6}, 8, seed, 4);
    const auto adv = make_batch({6}, 8, seed + 50, 4);
    for (auto mode : {BnMode::Batch, BnMode::Frozen}) {
      auto m1 = m;
      auto m2 = swapped;
      EXPECT_NEAR(loss_and_grads(m1, clean, adv, mode).loss, loss_and_grads(m2, adv, clean, mode).loss, 1e-12);
    }
  }
}

TEST(ModelProperty, InputGradientRowsArePerExample) {
  const auto m = tiny_mlp(5);
  const auto batch = make_batch({6}, 4, 9, 4);
  const auto g = input_gradient(m, batch, BnBranch::Aux);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    std::vector<double> row(batch.inputs.values().begin() + r * 6, batch.inputs.values().begin() + r * 6 + 6);
    LabeledBatch single{ad::Tensor({1, 6}, row), {batch.labels[r]}, {}};
    const auto gs = input_gradient(m, single, BnBranch::Aux);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(g[r * 6 + j], gs[j], 1e-14);
  }
}

TEST(ModelAccuracy, CountsArgmax) {
  auto m = init_model(make_architecture("linear", {2}, 2), 1);
  m.params.tensors[0].tensor = ad::Tensor({2, 2}, {1, 0, 0, 1});
  Dataset d{{2}, {1, 0, 0, 1, 1, 0, 0, 1}, {0, 1, 1, 1}, 2};
  EXPECT_DOUBLE_EQ(accuracy(m, d, 3), 0.75);
}
