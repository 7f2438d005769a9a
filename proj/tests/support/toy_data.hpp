// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include "conadv/model/dataset.hpp"

namespace conadv::testing {

// Class-dependent means plus uniform noise, clamped to [0, 1].
inline model::Dataset toy_dataset(std::size_t n, ad::Shape example, std::size_t classes, std::uint64_t seed) {
  model::Dataset d{example, {}, {}, classes};
  const std::size_t dim = ad::numel(example);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> centers(classes * dim);
  for (auto& c : centers) c = u(rng);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<int>(i % classes);
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = centers[static_cast<std::size_t>(y) * dim + j] + 0.3 * (u(rng) - 0.5);
      d.inputs.push_back(std::min(1.0, std::max(0.0, v)));
    }
    d.labels.push_back(y);
  }
  return d;
}

}  // namespace conadv::testing
