// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "conadv/model/model.hpp"

namespace conadv::optim {

class OptimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OptimizerKind { SgdMomentum, Lars };

struct OptimState {
  OptimizerKind kind = OptimizerKind::Lars;
  double momentum = 0.9;
  double weight_decay = 1e-4;  // applied to Weight-role tensors only
  double trust_coef = 0.001;
  double eps = 1e-9;
  std::vector<std::vector<double>> velocity;  // lazily shaped on first step
  std::uint64_t step = 0;
};

/// v <- m v + (g + wd w); w <- w - lr v.
void sgd_momentum_step(model::ModelParams& params, const model::GradientSet& grads, OptimState& state, double lr);

/// Layer-wise rate for one tensor. Bias and BN tensors, and weights with zero
/// norm, get the global rate unchanged.
double lars_local_lr(const model::ParamTensor& param, const ad::Tensor& grad, const OptimState& state, double lr);

/// v <- m v + local_lr (g + wd w); w <- w - v, with wd dropped for exempt tensors.
void lars_step(model::ModelParams& params, const model::GradientSet& grads, OptimState& state, double lr);

/// Dispatches on state.kind.
void apply_step(model::ModelParams& params, const model::GradientSet& grads, OptimState& state, double lr);

enum class ScheduleMode { WarmupPoly, Constant };

struct ScheduleConfig {
  ScheduleMode mode = ScheduleMode::WarmupPoly;
  double peak = 0.1;
  std::uint64_t warmup_steps = 0;
  std::uint64_t total_steps = 1;
  double power = 2.0;
};

/// Linear ramp 0 -> peak over the warmup, then peak * (1 - progress)^power,
/// reaching 0 at total_steps and staying there.
double lr_schedule(std::uint64_t t, const ScheduleConfig& cfg);

/// Peak rate under the linear scaling rule: base_lr * global_batch / 256.
double linear_scaled_lr(double base_lr, std::size_t global_batch);

ScheduleMode parse_schedule_mode(const std::string& name);
std::string schedule_mode_name(ScheduleMode mode);
OptimizerKind parse_optimizer(const std::string& name);
std::string optimizer_name(OptimizerKind kind);

}  // namespace conadv::optim
