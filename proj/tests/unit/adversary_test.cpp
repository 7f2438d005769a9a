// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "../support/random_tensor.hpp"
#include "conadv/adversary/attack.hpp"

using namespace conadv;
using namespace conadv::adversary;
using model::LabeledBatch;
using conadv::testing::uniform_tensor;

namespace {

LabeledBatch image_batch(std::size_t n, std::uint64_t seed) {
  LabeledBatch b{uniform_tensor({n, 1, 8, 8}, seed, 0.0, 1.0), {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    b.labels.push_back(static_cast<int>((i + seed) % 10));
    b.ids.push_back(100 + i);
  }
  return b;
}

// Gradient of L = w^T x for every row.
InputGradientFn linear_gradient(std::vector<double> w) {
  return [w](const LabeledBatch& b) {
    ad::Tensor g(b.inputs.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = w[i % w.size()];
    return g;
  };
}

}  // namespace

TEST(ProjectLinf, Examples) {
  EXPECT_EQ(project_linf(ad::Tensor::vector({0.5}), ad::Tensor::vector({0.0}), 0.1).data(), std::vector<double>{0.1});
  EXPECT_EQ(project_linf(ad::Tensor::vector({0.7, 1.1}), ad::Tensor::vector({1, 1}), 0.2).data(),
            (std::vector<double>{0.8, 1.1}));
  EXPECT_EQ(project_linf(ad::Tensor::vector({0.05, -0.02}), ad::Tensor::vector({0, 0}), 0.1).data(),
            (std::vector<double>{0.05, -0.02}));
  EXPECT_THROW(project_linf(ad::Tensor::vector({1, 2}), ad::Tensor::vector({1}), 0.1), ad::ShapeError);
}

TEST(Attack, LinearModelRawStep) {
  LabeledBatch b{ad::Tensor({1, 2}, {0.3, 0.4}), {0}, {}};
  AttackConfig cfg;
  cfg.epsilon = 1.0;
  cfg.alpha = 0.1;
  cfg.random_init = false;
  cfg.clamp_domain.reset();
  const auto adv = perturb(b, linear_gradient({1, -2}), cfg, 0);
  EXPECT_NEAR(adv.inputs[0], 0.3 + 0.1, 1e-15);
  EXPECT_NEAR(adv.inputs[1], 0.4 - 0.2, 1e-15);
  EXPECT_EQ(adv.labels, b.labels);
}

TEST(Attack, SignStep) {
  LabeledBatch b{ad::Tensor({1, 3}, {0.5, 0.5, 0.5}), {0}, {}};
  AttackConfig cfg{0.1, 0.05, false, StepMode::SignGradient};
  const auto adv = perturb(b, linear_gradient({3, -0.001, 0}), cfg, 0);
  EXPECT_EQ(adv.inputs.data(), (std::vector<double>{0.55, 0.45, 0.5}));
}

TEST(Attack, ZeroRadiusAndZeroStepAreIdentity) {
  const auto m = model::init_model(model::make_architecture("cnn", {1, 8, 8}, 10), 2);
  const auto b = image_batch(4, 1);
  AttackConfig zero_eps{0.0, 5.0, true};
  EXPECT_EQ(generate_adversarial(m, b, zero_eps, 9).inputs.data(), b.inputs.data());
  AttackConfig zero_alpha{0.3, 0.0, false};
  EXPECT_EQ(generate_adversarial(m, b, zero_alpha, 9).inputs.data(), b.inputs.data());
}

TEST(Attack, NonFiniteGradientAborts) {
  LabeledBatch b{ad::Tensor({2, 2}, {0.1, 0.2, 0.3, 0.4}), {0, 1}, {}};
  AttackConfig cfg{0.1, 0.1, false};
  auto bad = linear_gradient({1, std::numeric_limits<double>::quiet_NaN()});
  EXPECT_THROW(perturb(b, bad, cfg, 0), AttackError);
  cfg.epsilon = -1;
  EXPECT_THROW(perturb(b, linear_gradient({1, 1}), cfg, 0), std::invalid_argument);
}

TEST(AttackProperty, FeasibleForRandomModelsAndInputs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = model::init_model(model::make_architecture(seed % 2 ? "cnn" : "mlp", {1, 8, 8}, 10, {}), seed);
    const auto b = image_batch(6, seed);
    AttackConfig cfg{0.05 * static_cast<double>(seed % 5), 10.0, seed % 3 != 0,
                     seed % 4 ? StepMode::RawGradient : StepMode::SignGradient};
    const auto adv = generate_adversarial(m, b, cfg, seed);
    for (std::size_t i = 0; i < b.inputs.size(); ++i) {
      EXPECT_LE(std::abs(adv.inputs[i] - b.inputs[i]), cfg.epsilon + 1e-15);
      EXPECT_GE(adv.inputs[i], 0.0);
      EXPECT_LE(adv.inputs[i], 1.0);
    }
  }
}

TEST(AttackProperty, SmallStepAscends) {
  int ascents = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const auto m = model::init_model(model::make_architecture("mlp", {1, 8, 8}, 10, {16}), 500 + t);
    auto b = image_batch(1, 700 + t);
    b.inputs = uniform_tensor({1, 1, 8, 8}, 900 + t, 0.2, 0.8);  // interior, so the domain clamp is inactive
    AttackConfig cfg{0.1, 1e-3, false};
    const auto adv = generate_adversarial(m, b, cfg, t);
    if (model::eval_loss(m, adv, model::BnBranch::Aux) >= model::eval_loss(m, b, model::BnBranch::Aux)) ++ascents;
  }
  EXPECT_GE(ascents, 198);
}

TEST(AttackProperty, DeterministicAndBatchIndependent) {
  const auto m = model::init_model(model::make_architecture("cnn", {1, 8, 8}, 10), 7);
  const auto b = image_batch(6, 3);
  AttackConfig cfg{0.1, 0.5, true};
  const auto a1 = generate_adversarial(m, b, cfg, 42);
  const auto a2 = generate_adversarial(m, b, cfg, 42);
  EXPECT_EQ(a1.inputs.data(), a2.inputs.data());
  EXPECT_NE(generate_adversarial(m, b, cfg, 43).inputs.data(), a1.inputs.data());

  // Row 4 attacked alone matches row 4 attacked within the full batch.
  LabeledBatch one{ad::Tensor({1, 1, 8, 8}), {b.labels[4]}, {b.ids[4]}};
  std::copy_n(b.inputs.values().begin() + 4 * 64, 64, one.inputs.values().begin());
  const auto solo = generate_adversarial(m, one, cfg, 42);
  for (std::size_t j = 0; j < 64; ++j) EXPECT_NEAR(solo.inputs[j], a1.inputs[4 * 64 + j], 1e-14);
}
