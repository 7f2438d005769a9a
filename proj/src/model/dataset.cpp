// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include "conadv/model/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "conadv/common/rng.hpp"

namespace conadv::model {

void LabeledBatch::validate(std::size_t num_classes) const {
  if (inputs.rank() < 2 || inputs.dim(0) != labels.size()) {
    throw DataError("batch dimension " + (inputs.rank() ? std::to_string(inputs.dim(0)) : std::string("?")) +
                    " does not match " + std::to_string(labels.size()) + " labels");
  }
  if (!ids.empty() && ids.size() != labels.size()) throw DataError("batch ids do not match label count");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

std::span<const double> Dataset::example(std::size_t i) const {
  const std::size_t d = example_size();
  return std::span<const double>(inputs).subspan(i * d, d);
}

LabeledBatch Dataset::batch(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw DataError("empty batch");
  const std::size_t d = example_size();
  ad::Shape shape{indices.size()};
  shape.insert(shape.end(), example_shape.begin(), example_shape.end());
  LabeledBatch b{ad::Tensor(shape), {}, {indices.begin(), indices.end()}};
  b.labels.reserve(indices.size());
  auto out = b.inputs.values();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= size()) throw DataError("example index " + std::to_string(indices[r]) + " out of range");
    auto src = example(indices[r]);
    std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(r * d));
    b.labels.push_back(labels[indices[r]]);
  }
  return b;
}

LabeledBatch Dataset::all() const {
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return batch(idx);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out{example_shape, {}, {}, num_classes};
  const std::size_t d = example_size();
  out.inputs.reserve(indices.size() * d);
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    auto src = example(i);
    out.inputs.insert(out.inputs.end(), src.begin(), src.end());
    out.labels.push_back(labels.at(i));
  }
  return out;
}

LabeledBatch augment_flip_crop(const LabeledBatch& batch, std::uint64_t seed, std::size_t pad) {
  const auto& shape = batch.inputs.shape();
  if (shape.size() != 4) throw DataError("flip-crop needs [N,C,H,W] inputs, got " + ad::to_string(shape));
  const std::size_t n = shape[0], c = shape[1], h = shape[2], w = shape[3];
  LabeledBatch out = batch;
  auto src = batch.inputs.values();
  auto dst = out.inputs.values();
  const int p = static_cast<int>(pad);
  for (std::size_t r = 0; r < n; ++r) {
    std::mt19937_64 rng(mix_seed({seed, batch.ids.empty() ? r : batch.ids[r]}));
    const bool flip = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    const int dy = std::uniform_int_distribution<int>(-p, p)(rng);
    const int dx = std::uniform_int_distribution<int>(-p, p)(rng);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (r * c + ch) * h * w;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const int sy = static_cast<int>(y) + dy;
          int sx = static_cast<int>(x) + dx;
          double v = 0.0;
          if (sy >= 0 && sy < static_cast<int>(h) && sx >= 0 && sx < static_cast<int>(w)) {
            if (flip) sx = static_cast<int>(w) - 1 - sx;
            v = src[base + static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)];
          }
          dst[base + y * w + x] = v;
        }
      }
    }
  }
  return out;
}

}  // namespace conadv::model
