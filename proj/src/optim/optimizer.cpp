// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include "conadv/optim/optimizer.hpp"

#include <cmath>

namespace conadv::optim {

namespace {

void prepare(const model::ModelParams& params, const model::GradientSet& grads, OptimState& state) {
  if (grads.size() != params.tensors.size()) {
    throw OptimError("got " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.tensors.size()) + " parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& p = params.tensors[i];
    if (grads[i].shape() != p.tensor.shape()) {
      throw OptimError("gradient for " + p.name + " has shape " + ad::to_string(grads[i].shape()) + ", expected " +
                       ad::to_string(p.tensor.shape()));
    }
    if (!grads[i].all_finite()) throw OptimError("non-finite gradient for " + p.name);
  }
  if (state.velocity.empty()) {
    for (const auto& p : params.tensors) state.velocity.emplace_back(p.tensor.size(), 0.0);
  }
  if (state.velocity.size() != params.tensors.size()) throw OptimError("momentum buffers do not match parameters");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (state.velocity[i].size() != params.tensors[i].tensor.size()) {
      throw OptimError("momentum buffer for " + params.tensors[i].name + " has the wrong size");
    }
  }
}

void check_lr(double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw OptimError("learning rate must be finite and >= 0");
}

bool exempt(model::ParamRole role) { return role != model::ParamRole::Weight; }

}  // namespace

void sgd_momentum_step(model::ModelParams& params, const model::GradientSet& grads, OptimState& state, double lr) {
  check_lr(lr);
  prepare(params, grads, state);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto w = params.tensors[i].tensor.values();
    auto g = grads[i].values();
    auto& v = state.velocity[i];
    const double wd = exempt(params.tensors[i].role) ? 0.0 : state.weight_decay;
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = state.momentum * v[j] + (g[j] + wd * w[j]);
      w[j] -= lr * v[j];
    }
  }
  ++state.step;
}

double lars_local_lr(const model::ParamTensor& param, const ad::Tensor& grad, const OptimState& state, double lr) {
  if (exempt(param.role)) return lr;
  const double wn = ad::l2_norm(param.tensor.values());
  if (wn == 0.0) return lr;
  const double gn = ad::l2_norm(grad.values());
  const double trust = wn / (gn + state.weight_decay * wn + state.eps);
  if (!std::isfinite(trust)) throw OptimError("non-finite trust ratio for " + param.name);
  return lr * state.trust_coef * trust;
}

void lars_step(model::ModelParams& params, const model::GradientSet& grads, OptimState& state, double lr) {
  check_lr(lr);
  prepare(params, grads, state);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& p = params.tensors[i];
    const double local = lars_local_lr(p, grads[i], state, lr);
    const double wd = exempt(p.role) ? 0.0 : state.weight_decay;
    auto w = params.tensors[i].tensor.values();
    auto g = grads[i].values();
    auto& v = state.velocity[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = state.momentum * v[j] + local * (g[j] + wd * w[j]);
      w[j] -= v[j];
    }
  }
  ++state.step;
}

void apply_step(model::ModelParams& params, const model::GradientSet& grads, OptimState& state, double lr) {
  if (state.kind == OptimizerKind::Lars) {
    lars_step(params, grads, state, lr);
  } else {
    sgd_momentum_step(params, grads, state, lr);
  }
}

double lr_schedule(std::uint64_t t, const ScheduleConfig& cfg) {
  if (cfg.mode == ScheduleMode::Constant) return cfg.peak;
  if (t < cfg.warmup_steps) return cfg.peak * static_cast<double>(t) / static_cast<double>(cfg.warmup_steps);
  if (t >= cfg.total_steps) return 0.0;
  const double span = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  const double progress = static_cast<double>(t - cfg.warmup_steps) / span;
  return cfg.peak * std::pow(1.0 - progress, cfg.power);
}

double linear_scaled_lr(double base_lr, std::size_t global_batch) {
  return base_lr * static_cast<double>(global_batch) / 256.0;
}

ScheduleMode parse_schedule_mode(const std::string& name) {
  if (name == "warmup-poly") return ScheduleMode::WarmupPoly;
  if (name == "constant") return ScheduleMode::Constant;
  throw std::invalid_argument("unknown lr schedule '" + name + "'");
}

std::string schedule_mode_name(ScheduleMode mode) {
  return mode == ScheduleMode::Constant ? "constant" : "warmup-poly";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "lars") return OptimizerKind::Lars;
  if (name == "sgd") return OptimizerKind::SgdMomentum;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

std::string optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::Lars ? "lars" : "sgd"; }

}  // namespace conadv::optim
