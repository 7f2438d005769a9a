// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include "conadv/harness/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "conadv/common/rng.hpp"

namespace conadv::harness {

using model::DataError;
using model::Dataset;

DatasetSpec DatasetSpec::parse(const std::string& text) {
  DatasetSpec s;
  const auto colon = text.find(':');
  s.kind = text.substr(0, colon);
  if (s.kind.empty()) throw UnknownFormatError("empty dataset spec");
  if (colon == std::string::npos) return s;
  std::stringstream rest(text.substr(colon + 1));
  std::string item;
  while (std::getline(rest, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UnknownFormatError("dataset spec item '" + item + "' is not key=value");
    }
    s.args[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return s;
}

std::string DatasetSpec::get(const std::string& key, const std::string& fallback) const {
  auto it = args.find(key);
  return it == args.end() ? fallback : it->second;
}

std::size_t DatasetSpec::get_size(const std::string& key, std::size_t fallback) const {
  auto it = args.find(key);
  if (it == args.end()) return fallback;
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw UnknownFormatError("dataset option " + key + "=" + it->second + " is not a count");
  }
}

double DatasetSpec::get_double(const std::string& key, double fallback) const {
  auto it = args.find(key);
  if (it == args.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::logic_error&) {
    throw UnknownFormatError("dataset option " + key + "=" + it->second + " is not a number");
  }
}

namespace {

// Segment endpoints in glyph coordinates, origin top-left, unit box.
struct Segment {
  double x0, y0, x1, y1;
};
constexpr std::array<Segment, 7> kSegments{{
    {0.25, 0.12, 0.75, 0.12},  // a top
    {0.75, 0.12, 0.75, 0.50},  // b upper right
    {0.75, 0.50, 0.75, 0.88},  // c lower right
    {0.25, 0.88, 0.75, 0.88},  // d bottom
    {0.25, 0.50, 0.25, 0.88},  // e lower left
    {0.25, 0.12, 0.25, 0.50},  // f upper left
    {0.25, 0.50, 0.75, 0.50},  // g middle
}};
// Bit s set when segment s is lit.
constexpr std::array<unsigned, 10> kDigits{0x3f, 0x06, 0x5b, 0x4f, 0x66, 0x6d, 0x7d, 0x07, 0x7f, 0x6f};

double segment_distance(const Segment& s, double x, double y) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  const double t = std::clamp(((x - s.x0) * dx + (y - s.y0) * dy) / len2, 0.0, 1.0);
  const double px = s.x0 + t * dx - x, py = s.y0 + t * dy - y;
  return std::sqrt(px * px + py * py);
}

void rescale_unit(std::vector<double>& v) {
  if (v.empty()) return;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double a = *lo, b = *hi;
  if (a >= 0.0 && b <= 1.0) return;
  const double span = b - a;
  for (auto& x : v) x = span > 0.0 ? (x - a) / span : 0.0;
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

std::size_t infer_classes(const std::vector<int>& labels) {
  int top = -1;
  for (int y : labels) top = std::max(top, y);
  return static_cast<std::size_t>(top + 1);
}

void set_classes(Dataset& d, std::size_t classes) {
  if (classes == 0) {
    d.num_classes = infer_classes(d.labels);
    return;
  }
  for (int y : d.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  d.num_classes = classes;
}

}  // namespace

Dataset make_glyphs(std::size_t n, std::size_t size, std::uint64_t seed, double noise) {
  if (size < 4) throw DataError("glyph size must be >= 4");
  Dataset d{{1, size, size}, {}, {}, 10};
  d.inputs.assign(n * size * size, 0.0);
  d.labels.resize(n);
  const double step = 1.0 / static_cast<double>(size);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(mix_seed({seed, i}));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const int label = static_cast<int>(rng() % 10);
    d.labels[i] = label;
    const double scale = 1.0 + 0.12 * u(rng);
    const double slant = 0.2 * u(rng);
    const double cx = 0.5 + 0.08 * u(rng), cy = 0.5 + 0.08 * u(rng);
    const double width = 0.07 + 0.02 * u(rng);
    const double contrast = 0.8 + 0.2 * u(rng);
    // A few lit segments flicker off and a dark one can appear.
    unsigned mask = kDigits[static_cast<std::size_t>(label)];
    for (unsigned s = 0; s < 7; ++s) {
      if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.04) mask ^= 1u << s;
    }
    double* px = d.inputs.data() + i * size * size;
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = 0; c < size; ++c) {
        // Pixel center mapped back into glyph coordinates.
        const double y = ((static_cast<double>(r) + 0.5) * step - cy) / scale + 0.5;
        const double x = ((static_cast<double>(c) + 0.5) * step - cx) / scale + 0.5 + slant * (y - 0.5);
        double v = 0.0;
        for (unsigned s = 0; s < 7; ++s) {
          if (!(mask & (1u << s))) continue;
          const double dist = segment_distance(kSegments[s], x, y);
          v = std::max(v, std::exp(-dist * dist / (2.0 * width * width)));
        }
        px[r * size + c] = std::clamp(contrast * v + noise * g(rng), 0.0, 1.0);
      }
    }
  }
  return d;
}

Dataset make_shapes(std::size_t n, std::size_t size, std::uint64_t seed, double noise) {
  if (size < 6) throw DataError("shape size must be >= 6");
  Dataset d{{1, size, size}, {}, {}, 10};
  d.inputs.assign(n * size * size, 0.0);
  d.labels.resize(n);
  const double half = 0.5 * static_cast<double>(size);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(mix_seed({seed, i}));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const int label = static_cast<int>(rng() % 10);
    d.labels[i] = label;
    const double radius = half * (0.55 + 0.15 * u(rng));  // pixels
    const double cx = half + 0.12 * half * u(rng), cy = half + 0.12 * half * u(rng);
    const double w = 0.22 + 0.06 * u(rng);  // stroke, in radius units
    const double contrast = 0.8 + 0.2 * u(rng);
    const double edge = 1.0 / radius;  // one pixel of antialiasing
    double* px = d.inputs.data() + i * size * size;
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = 0; c < size; ++c) {
        const double x = (static_cast<double>(c) + 0.5 - cx) / radius;
        const double y = (static_cast<double>(r) + 0.5 - cy) / radius;
        const double ax = std::abs(x), ay = std::abs(y), box = std::max(ax, ay), rad = std::hypot(x, y);
        // Signed depth inside the shape; positive inside.
        double depth = 0.0;
        switch (label) {
          case 0: depth = 0.8 - box; break;                                        // filled square
          case 1: depth = w - std::abs(box - 0.85); break;                           // outline square
          case 2: depth = 0.9 - rad; break;                                          // disk
          case 3: depth = w - std::abs(rad - 0.8); break;                            // ring
          case 4: depth = std::max(std::min(w - ax, 1.0 - ay), std::min(w - ay, 1.0 - ax)); break;  // plus
          case 5: depth = std::min(w - std::min(std::abs(x - y), std::abs(x + y)) / std::sqrt(2.0), 0.9 - box); break;  // X
          case 6: depth = std::min(0.5 * (y + 0.9) - ax, 0.9 - y); break;            // triangle, apex up
          case 7: depth = std::min(0.5 * (0.9 - y) - ax, y + 0.9); break;            // triangle, apex down
          case 8: depth = std::min(1.5 * w - ay, 1.0 - ax); break;                   // horizontal bar
          default: depth = std::min(1.5 * w - ax, 1.0 - ay); break;                  // vertical bar
        }
        const double v = std::clamp(0.5 + depth / edge, 0.0, 1.0);
        px[r * size + c] = std::clamp(contrast * v + noise * g(rng), 0.0, 1.0);
      }
    }
  }
  return d;
}

Dataset make_blobs(std::size_t n, std::size_t d, std::size_t z, std::uint64_t seed, double spread,
                   std::uint64_t sample_seed) {
  if (d == 0 || z == 0) throw DataError("blobs need d > 0 and z > 0");
  std::mt19937_64 crng(mix_seed({seed, 0xb10b}));
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> centers(z * d);
  for (auto& c : centers) c = 3.0 * g(crng);
  Dataset out{{d}, std::vector<double>(n * d), std::vector<int>(n), z};
  std::mt19937_64 rng(mix_seed({seed, sample_seed}));
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(rng() % z);
    out.labels[i] = static_cast<int>(k);
    for (std::size_t j = 0; j < d; ++j) out.inputs[i * d + j] = centers[k * d + j] + spread * g(rng);
  }
  // Fixed squash, so train and test share one scale whatever their sizes.
  for (auto& x : out.inputs) x = 1.0 / (1.0 + std::exp(-x / 4.0));
  return out;
}

Dataset read_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  if (img.size() < 16 || be32(img, 0) != 0x00000803) {
    throw MalformedHeaderError(images_path + ": expected IDX image header with magic 0x00000803");
  }
  if (lab.size() < 8 || be32(lab, 0) != 0x00000801) {
    throw MalformedHeaderError(labels_path + ": expected IDX label header with magic 0x00000801");
  }
  const std::size_t n = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
  const std::size_t nl = be32(lab, 4);
  if (rows == 0 || cols == 0) throw MalformedHeaderError(images_path + ": zero image dimension");
  if (n != nl) {
    throw LengthMismatchError("IDX images declare " + std::to_string(n) + " examples but labels declare " +
                              std::to_string(nl));
  }
  if (img.size() != 16 + n * rows * cols) {
    throw LengthMismatchError(images_path + ": payload holds " + std::to_string(img.size() - 16) + " bytes, header implies " +
                              std::to_string(n * rows * cols));
  }
  if (lab.size() != 8 + n) {
    throw LengthMismatchError(labels_path + ": payload holds " + std::to_string(lab.size() - 8) + " labels, header implies " +
                              std::to_string(n));
  }
  Dataset d{{1, rows, cols}, {}, {}, 0};
  d.inputs.reserve(n * rows * cols);
  for (std::size_t i = 16; i < img.size(); ++i) d.inputs.push_back(img[i] / 255.0);
  d.labels.reserve(n);
  for (std::size_t i = 8; i < lab.size(); ++i) d.labels.push_back(lab[i]);
  d.num_classes = infer_classes(d.labels);
  return d;
}

void write_idx(const std::string& images_path, const std::string& labels_path, const Dataset& data) {
  if (data.example_shape.empty() || data.example_size() == 0) throw DataError("cannot write an empty example shape");
  const std::size_t cols = data.example_shape.back();
  const std::size_t rows = data.example_size() / cols;
  std::ofstream img(images_path, std::ios::binary), lab(labels_path, std::ios::binary);
  if (!img || !lab) throw DataError("cannot write IDX files " + images_path + ", " + labels_path);
  put_be32(img, 0x00000803);
  put_be32(img, static_cast<std::uint32_t>(data.size()));
  put_be32(img, static_cast<std::uint32_t>(rows));
  put_be32(img, static_cast<std::uint32_t>(cols));
  for (double v : data.inputs) img.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  put_be32(lab, 0x00000801);
  put_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (int y : data.labels) {
    if (y < 0 || y > 255) throw DataError("IDX labels must fit in one byte");
    lab.put(static_cast<char>(y));
  }
}

namespace {

Dataset read_csv_raw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  Dataset d;
  std::string line;
  std::size_t width = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (cell.find_first_not_of(" \t", pos) != std::string::npos) numeric = false;
      } catch (const std::logic_error&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (line_no == 1) continue;  // header row
      throw MalformedHeaderError(path + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    if (row.size() < 2) throw MalformedHeaderError(path + ":" + std::to_string(line_no) + ": need features and a label");
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw LengthMismatchError(path + ":" + std::to_string(line_no) + ": " + std::to_string(row.size()) +
                                " columns, expected " + std::to_string(width));
    }
    const double y = row.back();
    if (y != std::floor(y) || y < 0) {
      throw DataError(path + ":" + std::to_string(line_no) + ": label must be a non-negative integer");
    }
    d.labels.push_back(static_cast<int>(y));
    d.inputs.insert(d.inputs.end(), row.begin(), row.end() - 1);
  }
  if (d.labels.empty()) throw DataError(path + ": no examples");
  d.example_shape = {width - 1};
  return d;
}

}  // namespace

Dataset read_csv(const std::string& path, std::size_t num_classes) {
  auto d = read_csv_raw(path);
  rescale_unit(d.inputs);
  set_classes(d, num_classes);
  return d;
}

DataSplit split(const Dataset& all, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw DataError("test_fraction must lie in [0, 1)");
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), std::mt19937_64(mix_seed({seed, 0x5b1'17})));
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(all.size())));
  const std::span<const std::size_t> view(idx);
  return {all.subset(view.subspan(n_test)), all.subset(view.first(n_test))};
}

DataSplit load_dataset(const std::string& text) {
  const auto spec = DatasetSpec::parse(text);
  const auto seed = static_cast<std::uint64_t>(spec.get_size("seed", 1));
  if (spec.kind == "glyphs") {
    const auto size = spec.get_size("size", 8);
    const double noise = spec.get_double("noise", 0.15);
    return {make_glyphs(spec.get_size("n_train", 16384), size, mix_seed({seed, 1}), noise),
            make_glyphs(spec.get_size("n_test", 2048), size, mix_seed({seed, 2}), noise)};
  }
  if (spec.kind == "shapes") {
    const auto size = spec.get_size("size", 12);
    const double noise = spec.get_double("noise", 0.2);
    return {make_shapes(spec.get_size("n_train", 16384), size, mix_seed({seed, 1}), noise),
            make_shapes(spec.get_size("n_test", 2048), size, mix_seed({seed, 2}), noise)};
  }
  if (spec.kind == "blobs") {
    const auto d = spec.get_size("d", 16), z = spec.get_size("z", 4);
    const double spread = spec.get_double("spread", 1.0);
    return {make_blobs(spec.get_size("n", 1000), d, z, seed, spread, 1),
            make_blobs(spec.get_size("n_test", 0), d, z, seed, spread, 2)};
  }
  if (spec.kind == "idx") {
    auto train = read_idx(spec.get("images", ""), spec.get("labels", ""));
    const auto classes = spec.get_size("classes", 0);
    if (spec.args.count("test_images")) {
      auto test = read_idx(spec.get("test_images", ""), spec.get("test_labels", ""));
      if (test.example_shape != train.example_shape) throw LengthMismatchError("IDX test images have a different shape");
      const auto z = classes ? classes : std::max(train.num_classes, test.num_classes);
      set_classes(train, z);
      set_classes(test, z);
      return {std::move(train), std::move(test)};
    }
    set_classes(train, classes);
    return split(train, spec.get_double("test_fraction", 0.0), seed);
  }
  if (spec.kind == "csv") {
    const auto classes = spec.get_size("classes", 0);
    if (!spec.args.count("test")) return split(read_csv(spec.get("path", ""), classes), spec.get_double("test_fraction", 0.0), seed);
    auto train = read_csv_raw(spec.get("path", ""));
    auto test = read_csv_raw(spec.get("test", ""));
    if (test.example_shape != train.example_shape) throw LengthMismatchError("CSV test rows have a different width");
    // One scale for both files.
    const std::size_t n_train = train.inputs.size();
    train.inputs.insert(train.inputs.end(), test.inputs.begin(), test.inputs.end());
    rescale_unit(train.inputs);
    test.inputs.assign(train.inputs.begin() + static_cast<std::ptrdiff_t>(n_train), train.inputs.end());
    train.inputs.resize(n_train);
    const auto z = classes ? classes : std::max(infer_classes(train.labels), infer_classes(test.labels));
    set_classes(train, z);
    set_classes(test, z);
    return {std::move(train), std::move(test)};
  }
  throw UnknownFormatError("unknown dataset kind '" + spec.kind + "' (expected glyphs, shapes, blobs, idx or csv)");
}

}  // namespace conadv::harness
