// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "conadv/autodiff/tensor.hpp"

namespace conadv::model {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs [batch, ...] with one class id per row. `ids` carries the dataset
/// index of every row when the batch was drawn from a Dataset.
struct LabeledBatch {
  ad::Tensor inputs;
  std::vector<int> labels;
  std::vector<std::size_t> ids;

  std::size_t size() const { return labels.size(); }
  /// Throws DataError unless the batch dimension matches the label count and
  /// every label lies in [0, num_classes).
  void validate(std::size_t num_classes) const;
};

/// In-memory labeled examples, inputs stored row-major one example per row.
struct Dataset {
  ad::Shape example_shape;
  std::vector<double> inputs;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t example_size() const { return ad::numel(example_shape); }
  std::span<const double> example(std::size_t i) const;

  LabeledBatch batch(std::span<const std::size_t> indices) const;
  LabeledBatch all() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

/// Random horizontal flip and a random shift of up to `pad` pixels with zero
/// fill, per example of a [N,C,H,W] batch. Row r draws from a stream keyed by
/// (seed, id of row r).
LabeledBatch augment_flip_crop(const LabeledBatch& batch, std::uint64_t seed, std::size_t pad = 2);

}  // namespace conadv::model
