// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset ingestion. A dataset spec is "<kind>:<key>=<value>,..." with kinds
//   glyphs  n_train, n_test, size, seed, noise     synthetic seven-segment digits
//   shapes  n_train, n_test, size, seed, noise     synthetic mirror-symmetric shapes
//   blobs   n, n_test, d, z, seed, spread          Gaussian class blobs
//   idx     images, labels, test_images, test_labels, test_fraction, seed
//   csv     path, test, classes, test_fraction, seed (label in the last column)
// All inputs are scaled into [0, 1]. num_classes 0 or absent: max label + 1.

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "conadv/model/dataset.hpp"

namespace conadv::harness {

class MalformedHeaderError : public model::DataError {
 public:
  using model::DataError::DataError;
};
class LengthMismatchError : public model::DataError {
 public:
  using model::DataError::DataError;
};
class UnknownFormatError : public model::DataError {
 public:
  using model::DataError::DataError;
};

struct DataSplit {
  model::Dataset train;
  model::Dataset test;
};

struct DatasetSpec {
  std::string kind;
  std::map<std::string, std::string> args;

  static DatasetSpec parse(const std::string& text);
  std::string get(const std::string& key, const std::string& fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
};

DataSplit load_dataset(const std::string& spec);

/// Seven-segment digit glyphs rendered at size x size with random placement,
/// scale, slant, stroke width, contrast and pixel noise. Shape [1, size, size].
model::Dataset make_glyphs(std::size_t n, std::size_t size, std::uint64_t seed, double noise = 0.15);

/// Ten mirror-symmetric outline and solid shapes (squares, disks, rings,
/// crosses, triangles, bars) with random size, offset, stroke and contrast.
/// Horizontal flips and small shifts preserve every label. Shape [1, size, size].
model::Dataset make_shapes(std::size_t n, std::size_t size, std::uint64_t seed, double noise = 0.2);

/// Isotropic Gaussian clusters around random centers, squashed into (0, 1) by
/// a fixed logistic. The same seed yields the same centers whatever n is.
model::Dataset make_blobs(std::size_t n, std::size_t d, std::size_t z, std::uint64_t seed, double spread = 1.0,
                          std::uint64_t sample_seed = 0);

/// Big-endian IDX pair: images magic 0x00000803 [n, rows, cols] ubyte, labels
/// magic 0x00000801 [n] ubyte.
model::Dataset read_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const std::string& images_path, const std::string& labels_path, const model::Dataset& data);

/// One example per row: features then an integer label. A non-numeric first
/// row is taken as a header. Values outside [0, 1] are min-max rescaled.
model::Dataset read_csv(const std::string& path, std::size_t num_classes);

/// Seeded random split off the tail of a shuffle.
DataSplit split(const model::Dataset& all, double test_fraction, std::uint64_t seed);

}  // namespace conadv::harness
