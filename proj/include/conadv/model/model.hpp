// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small classifiers with split batch normalization: every BN layer keeps a
// main set of running statistics for clean batches and an auxiliary set for
// adversarial batches, while the affine scale/shift parameters are shared.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "conadv/autodiff/graph.hpp"
#include "conadv/model/dataset.hpp"

namespace conadv::model {

enum class BnBranch { Main, Aux };
enum class Phase { Train, Eval };

/// Batch: training forwards normalize with batch statistics and update the
/// routed branch. Frozen: every forward uses the branch's running statistics
/// and nothing is updated, which removes coupling between examples.
enum class BnMode { Batch, Frozen };

enum class LayerKind { Dense, Conv, BatchNorm, Relu, MaxPool };

struct LayerSpec {
  LayerKind kind;
  std::size_t units = 0;  // Dense outputs or Conv output channels
  std::size_t kernel = 3;
  ad::Padding padding = ad::Padding::Same;
};

struct Architecture {
  std::string preset;
  ad::Shape input_shape;  // per example, e.g. {784} or {1, 28, 28}
  std::vector<LayerSpec> layers;
  std::size_t num_classes = 0;
};

/// mlp: Dense-BN-ReLU blocks (default widths 256, 128) then Dense(Z).
/// cnn: conv3x3(8)-BN-ReLU-pool, conv3x3(16)-BN-ReLU-pool, Dense(Z) (default channels 8, 16).
/// linear: a single Dense(Z).
Architecture make_architecture(const std::string& preset, const ad::Shape& input_shape, std::size_t num_classes,
                               const std::vector<std::size_t>& hidden = {});

enum class ParamRole { Weight, Bias, BnScale, BnShift };

struct ParamTensor {
  std::string name;
  ParamRole role;
  std::size_t layer;
  ad::Tensor tensor;
};

struct BatchNormStats {
  std::vector<double> mean;
  std::vector<double> var;
};

struct DualBatchNormState {
  BatchNormStats main;
  BatchNormStats aux;
  double momentum = 0.9;
  double eps = 1e-5;

  BatchNormStats& branch(BnBranch b) { return b == BnBranch::Main ? main : aux; }
  const BatchNormStats& branch(BnBranch b) const { return b == BnBranch::Main ? main : aux; }
};

struct ModelParams {
  Architecture arch;
  std::vector<ParamTensor> tensors;
  std::size_t num_classes() const { return arch.num_classes; }
  std::size_t parameter_count() const;
};

/// Gradients aligned index-for-index with ModelParams::tensors.
using GradientSet = std::vector<ad::Tensor>;

/// Parameters plus the split BN statistics: everything a forward pass reads.
struct Model {
  ModelParams params;
  std::vector<DualBatchNormState> bn;  // one entry per BatchNorm layer, in layer order
};

using Snapshot = std::shared_ptr<const Model>;
inline Snapshot snapshot(const Model& m) { return std::make_shared<const Model>(m); }

/// He fan-in normal weights, zero biases, unit BN scale, zero BN shift, and
/// running statistics (mean 0, var 1) for both branches.
Model init_model(const Architecture& arch, std::uint64_t seed, double bn_momentum = 0.9, double bn_eps = 1e-5);

/// Logits for a batch. In Train phase under BnMode::Batch the routed branch's
/// running statistics are updated; Eval never mutates the model.
ad::Tensor model_forward(Model& model, const LabeledBatch& batch, BnBranch branch, Phase phase,
                         BnMode bn_mode = BnMode::Batch);
ad::Tensor model_forward(const Model& model, const LabeledBatch& batch, BnBranch branch);

struct LossAndGrads {
  double loss = 0.0;
  double clean_loss = 0.0;
  double adv_loss = 0.0;
  GradientSet grads;
};

/// loss = (mean clean CE via Main + mean adversarial CE via Aux) / 2 and its
/// parameter gradients. Updates Main stats from the clean batch and Aux stats
/// from the adversarial batch when bn_mode is Batch. When `parallel_branches`
/// is set the two halves are computed on separate threads; results are
/// identical either way.
LossAndGrads loss_and_grads(Model& model, const LabeledBatch& clean, const LabeledBatch& adv,
                            BnMode bn_mode = BnMode::Batch, bool parallel_branches = false);

/// Mean clean CE via Main only (the non-adversarial baseline).
LossAndGrads clean_loss_and_grads(Model& model, const LabeledBatch& clean, BnMode bn_mode = BnMode::Batch);

/// Gradient of the summed per-example CE with respect to the inputs, with the
/// given branch in running-statistics mode. Row i is the gradient of example
/// i's own loss.
ad::Tensor input_gradient(const Model& model, const LabeledBatch& batch, BnBranch branch);

/// Mean CE of a batch in eval mode.
double eval_loss(const Model& model, const LabeledBatch& batch, BnBranch branch);

/// Fraction of correct argmax predictions, Main branch, eval mode, evaluated
/// in chunks of `chunk` examples.
double accuracy(const Model& model, const Dataset& data, std::size_t chunk = 1024);

/// Order-sensitive hash over every parameter and running statistic bit.
std::uint64_t state_hash(const Model& model);

double global_norm(const GradientSet& grads);

}  // namespace conadv::model
