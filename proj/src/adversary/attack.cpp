// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include "conadv/adversary/attack.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "conadv/common/rng.hpp"

namespace conadv::adversary {

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("attack epsilon must be >= 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("attack alpha must be >= 0");
  if (clamp_domain && !(clamp_domain->first <= clamp_domain->second)) {
    throw std::invalid_argument("attack clamp domain is empty");
  }
}

ad::Tensor project_linf(const ad::Tensor& x, const ad::Tensor& center, double epsilon) {
  if (!x.same_shape(center)) {
    throw ad::ShapeError("project_linf: x is " + ad::to_string(x.shape()) + ", center is " +
                         ad::to_string(center.shape()));
  }
  if (!(epsilon >= 0.0)) throw std::invalid_argument("project_linf: negative epsilon");
  ad::Tensor out = x;
  auto o = out.values();
  auto c = center.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(o[i], c[i] - epsilon, c[i] + epsilon);
  return out;
}

model::LabeledBatch perturb(const model::LabeledBatch& batch, const InputGradientFn& gradient,
                            const AttackConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  model::LabeledBatch adv = batch;
  if (cfg.epsilon == 0.0) return adv;

  const std::size_t n = batch.size();
  const std::size_t d = n ? batch.inputs.size() / n : 0;
  auto x = adv.inputs.values();
  if (cfg.random_init) {
    std::uniform_real_distribution<double> u(-cfg.epsilon, cfg.epsilon);
    for (std::size_t r = 0; r < n; ++r) {
      const std::uint64_t id = batch.ids.empty() ? r : batch.ids[r];
      std::mt19937_64 rng(mix_seed({seed, id}));
      for (std::size_t j = 0; j < d; ++j) x[r * d + j] += u(rng);
    }
    if (cfg.clamp_domain) {
      for (auto& v : x) v = std::clamp(v, cfg.clamp_domain->first, cfg.clamp_domain->second);
    }
  }

  if (cfg.alpha > 0.0) {
    const ad::Tensor g = gradient(adv);
    if (!g.same_shape(adv.inputs)) {
      throw ad::ShapeError("input gradient shape " + ad::to_string(g.shape()) + " does not match " +
                           ad::to_string(adv.inputs.shape()));
    }
    auto gv = g.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(gv[i])) {
        throw AttackError("non-finite input gradient at example " + std::to_string(i / std::max<std::size_t>(d, 1)) +
                          ", coordinate " + std::to_string(i % std::max<std::size_t>(d, 1)));
      }
      const double step = cfg.step_mode == StepMode::SignGradient ? (gv[i] > 0.0) - (gv[i] < 0.0) : gv[i];
      x[i] += cfg.alpha * step;
    }
  }

  adv.inputs = project_linf(adv.inputs, batch.inputs, cfg.epsilon);
  if (cfg.clamp_domain) {
    for (auto& v : adv.inputs.values()) v = std::clamp(v, cfg.clamp_domain->first, cfg.clamp_domain->second);
  }
  return adv;
}

model::LabeledBatch generate_adversarial(const model::Model& snapshot, const model::LabeledBatch& batch,
                                         const AttackConfig& cfg, std::uint64_t seed) {
  return perturb(
      batch, [&snapshot](const model::LabeledBatch& b) { return model::input_gradient(snapshot, b, model::BnBranch::Aux); },
      cfg, seed);
}

}  // namespace conadv::adversary
