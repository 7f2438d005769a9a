// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-step projected gradient ascent on the inputs, started from a random
// point of the L-infinity ball.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>

#include "conadv/model/model.hpp"

namespace conadv::adversary {

class AttackError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class StepMode { RawGradient, SignGradient };

struct AttackConfig {
  double epsilon = 0.1;
  double alpha = 1.0;
  bool random_init = true;
  StepMode step_mode = StepMode::RawGradient;
  std::optional<std::pair<double, double>> clamp_domain = std::pair{0.0, 1.0};

  /// Throws std::invalid_argument on negative radius or step, or an empty domain.
  void validate() const;

  bool operator==(const AttackConfig&) const = default;
};

/// Coordinatewise clamp of x to [center - epsilon, center + epsilon].
ad::Tensor project_linf(const ad::Tensor& x, const ad::Tensor& center, double epsilon);

/// Gradient of each example's own loss with respect to its inputs, one row
/// per example.
using InputGradientFn = std::function<ad::Tensor(const model::LabeledBatch&)>;

/// x0 = x + U[-eps, eps] (if random_init), x' = x0 + alpha * step(grad(x0)),
/// then projection to the ball around x and to the clamp domain. The random
/// start of row r is drawn from a stream keyed by (seed, id of row r), so a
/// row's perturbation does not depend on which other rows share its batch.
model::LabeledBatch perturb(const model::LabeledBatch& batch, const InputGradientFn& gradient,
                            const AttackConfig& cfg, std::uint64_t seed);

/// perturb() against a model snapshot, differentiating through the auxiliary
/// BN branch with its running statistics. The snapshot is only read.
model::LabeledBatch generate_adversarial(const model::Model& snapshot, const model::LabeledBatch& batch,
                                         const AttackConfig& cfg, std::uint64_t seed);

}  // namespace conadv::adversary
