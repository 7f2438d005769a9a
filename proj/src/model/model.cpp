// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include "conadv/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <future>
#include <numeric>
#include <random>

namespace conadv::model {

namespace {

std::string pname(std::size_t layer, const char* what) { return "L" + std::to_string(layer) + "." + what; }

struct BuiltGraph {
  ad::Graph g;
  ad::NodeId input = 0;
  ad::NodeId logits = 0;
  ad::NodeId loss = 0;
  std::vector<ad::NodeId> bn_nodes;
  std::vector<ad::NodeId> param_nodes;  // aligned with ModelParams::tensors
};

BuiltGraph build_graph(const Model& m, const LabeledBatch& batch, BnBranch branch, bool batch_stats,
                       ad::Reduction reduction, bool param_grads, bool input_grad) {
  BuiltGraph b;
  auto& g = b.g;
  b.input = g.input("x", batch.inputs.shape());
  g.set_requires_grad(b.input, input_grad);
  for (const auto& p : m.params.tensors) {
    auto id = g.parameter(p.name, p.tensor.shape());
    g.set_requires_grad(id, param_grads);
    b.param_nodes.push_back(id);
  }
  ad::NodeId h = b.input;
  std::size_t next_param = 0;
  std::size_t bn_index = 0;
  for (const auto& layer : m.params.arch.layers) {
    switch (layer.kind) {
      case LayerKind::Dense: {
        const auto w = b.param_nodes[next_param++];
        const auto bias = b.param_nodes[next_param++];
        h = g.dense(h, w, bias);
        break;
      }
      case LayerKind::Conv: {
        const auto w = b.param_nodes[next_param++];
        const auto bias = b.param_nodes[next_param++];
        h = g.conv2d(h, w, bias, layer.padding);
        break;
      }
      case LayerKind::BatchNorm: {
        const auto gamma = b.param_nodes[next_param++];
        const auto beta = b.param_nodes[next_param++];
        const auto& state = m.bn[bn_index++];
        ad::BatchNormSpec spec;
        spec.eps = state.eps;
        if (batch_stats) {
          spec.mode = ad::NormMode::Batch;
        } else {
          spec.mode = ad::NormMode::Running;
          spec.running_mean = state.branch(branch).mean;
          spec.running_var = state.branch(branch).var;
        }
        h = g.batch_norm(h, gamma, beta, std::move(spec));
        b.bn_nodes.push_back(h);
        break;
      }
      case LayerKind::Relu:
        h = g.relu(h);
        break;
      case LayerKind::MaxPool:
        h = g.max_pool2(h);
        break;
    }
  }
  b.logits = h;
  b.loss = g.softmax_cross_entropy(h, batch.labels, reduction);
  return b;
}

ad::Bindings bind(const Model& m, const LabeledBatch& batch) {
  ad::Bindings bindings;
  bindings.emplace("x", batch.inputs);
  for (const auto& p : m.params.tensors) bindings.emplace(p.name, p.tensor);
  return bindings;
}

void check_batch(const Model& m, const LabeledBatch& batch) {
  if (batch.size() == 0) throw DataError("empty batch");
  batch.validate(m.params.num_classes());
  ad::Shape expect{batch.size()};
  const auto& es = m.params.arch.input_shape;
  expect.insert(expect.end(), es.begin(), es.end());
  if (batch.inputs.shape() != expect) {
    throw DataError("batch shape " + ad::to_string(batch.inputs.shape()) + " does not match model input " +
                    ad::to_string(expect));
  }
}

void update_running(Model& m, const BuiltGraph& b, BnBranch branch) {
  for (std::size_t i = 0; i < b.bn_nodes.size(); ++i) {
    auto& state = m.bn[i];
    auto& stats = state.branch(branch);
    const auto& mean = b.g.batch_mean(b.bn_nodes[i]);
    const auto& var = b.g.batch_var(b.bn_nodes[i]);
    const double cnt = static_cast<double>(b.g.batch_count(b.bn_nodes[i]));
    const double unbias = cnt / (cnt - 1.0);
    for (std::size_t c = 0; c < mean.size(); ++c) {
      stats.mean[c] = state.momentum * stats.mean[c] + (1.0 - state.momentum) * mean[c];
      stats.var[c] = state.momentum * stats.var[c] + (1.0 - state.momentum) * var[c] * unbias;
    }
  }
}

struct BranchResult {
  double loss = 0.0;
  GradientSet grads;
  BuiltGraph graph;
};

BranchResult branch_pass(const Model& m, const LabeledBatch& batch, BnBranch branch, BnMode mode) {
  BranchResult r;
  r.graph = build_graph(m, batch, branch, mode == BnMode::Batch, ad::Reduction::Mean, true, false);
  r.graph.g.forward(bind(m, batch));
  r.loss = r.graph.g.value(r.graph.loss).item();
  auto grads = r.graph.g.backward(r.graph.loss);
  r.grads.reserve(m.params.tensors.size());
  for (const auto& p : m.params.tensors) r.grads.push_back(std::move(grads.at(p.name)));
  return r;
}

void require_train_batch(const LabeledBatch& batch, BnMode mode) {
  if (mode == BnMode::Batch && batch.size() < 2) {
    throw DataError("training forward with batch statistics needs at least 2 examples");
  }
}

}  // namespace

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.tensor.size();
  return n;
}

Architecture make_architecture(const std::string& preset, const ad::Shape& input_shape, std::size_t num_classes,
                               const std::vector<std::size_t>& hidden) {
  if (num_classes < 2) throw std::invalid_argument("need at least two classes");
  if (input_shape.empty()) throw std::invalid_argument("empty input shape");
  Architecture a{preset, input_shape, {}, num_classes};
  if (preset == "mlp") {
    const std::vector<std::size_t> widths = hidden.empty() ? std::vector<std::size_t>{256, 128} : hidden;
    for (auto w : widths) {
      a.layers.push_back({LayerKind::Dense, w});
      a.layers.push_back({LayerKind::BatchNorm});
      a.layers.push_back({LayerKind::Relu});
    }
    a.layers.push_back({LayerKind::Dense, num_classes});
  } else if (preset == "cnn") {
    if (input_shape.size() != 3 || input_shape[1] < 4 || input_shape[2] < 4) {
      throw std::invalid_argument("cnn preset needs [C,H,W] inputs with H,W >= 4, got " + ad::to_string(input_shape));
    }
    const std::vector<std::size_t> channels = hidden.empty() ? std::vector<std::size_t>{8, 16} : hidden;
    for (auto c : channels) {
      a.layers.push_back({LayerKind::Conv, c, 3, ad::Padding::Same});
      a.layers.push_back({LayerKind::BatchNorm});
      a.layers.push_back({LayerKind::Relu});
      a.layers.push_back({LayerKind::MaxPool});
    }
    a.layers.push_back({LayerKind::Dense, num_classes});
  } else if (preset == "linear") {
    a.layers.push_back({LayerKind::Dense, num_classes});
  } else {
    throw std::invalid_argument("unknown model preset '" + preset + "'");
  }
  return a;
}

Model init_model(const Architecture& arch, std::uint64_t seed, double bn_momentum, double bn_eps) {
  if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw std::invalid_argument("BN momentum must lie in (0,1)");
  Model m;
  m.params.arch = arch;
  std::mt19937_64 rng(seed);
  ad::Shape shape = arch.input_shape;  // per example
  for (std::size_t li = 0; li < arch.layers.size(); ++li) {
    const auto& layer = arch.layers[li];
    switch (layer.kind) {
      case LayerKind::Dense: {
        const std::size_t fan_in = ad::numel(shape);
        ad::Tensor w({fan_in, layer.units});
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        for (auto& v : w.values()) v = dist(rng);
        m.params.tensors.push_back({pname(li, "w"), ParamRole::Weight, li, std::move(w)});
        m.params.tensors.push_back({pname(li, "b"), ParamRole::Bias, li, ad::Tensor({layer.units})});
        shape = {layer.units};
        break;
      }
      case LayerKind::Conv: {
        if (shape.size() != 3) throw std::invalid_argument("conv layer needs [C,H,W] activations");
        const std::size_t fan_in = shape[0] * layer.kernel * layer.kernel;
        ad::Tensor w({layer.units, shape[0], layer.kernel, layer.kernel});
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        for (auto& v : w.values()) v = dist(rng);
        m.params.tensors.push_back({pname(li, "w"), ParamRole::Weight, li, std::move(w)});
        m.params.tensors.push_back({pname(li, "b"), ParamRole::Bias, li, ad::Tensor({layer.units})});
        const std::size_t pad = layer.padding == ad::Padding::Same ? layer.kernel / 2 : 0;
        shape = {layer.units, shape[1] + 2 * pad + 1 - layer.kernel, shape[2] + 2 * pad + 1 - layer.kernel};
        break;
      }
      case LayerKind::BatchNorm: {
        const std::size_t c = shape[0];
        m.params.tensors.push_back({pname(li, "gamma"), ParamRole::BnScale, li, ad::Tensor::filled({c}, 1.0)});
        m.params.tensors.push_back({pname(li, "beta"), ParamRole::BnShift, li, ad::Tensor({c})});
        DualBatchNormState s;
        s.momentum = bn_momentum;
        s.eps = bn_eps;
        s.main = {std::vector<double>(c, 0.0), std::vector<double>(c, 1.0)};
        s.aux = s.main;
        m.bn.push_back(std::move(s));
        break;
      }
      case LayerKind::Relu:
        break;
      case LayerKind::MaxPool:
        if (shape.size() != 3 || shape[1] < 2 || shape[2] < 2) throw std::invalid_argument("pool needs H,W >= 2");
        shape = {shape[0], shape[1] / 2, shape[2] / 2};
        break;
    }
  }
  return m;
}

ad::Tensor model_forward(Model& model, const LabeledBatch& batch, BnBranch branch, Phase phase, BnMode bn_mode) {
  if (phase == Phase::Eval) return model_forward(static_cast<const Model&>(model), batch, branch);
  check_batch(model, batch);
  require_train_batch(batch, bn_mode);
  const bool batch_stats = bn_mode == BnMode::Batch;
  auto b = build_graph(model, batch, branch, batch_stats, ad::Reduction::Mean, false, false);
  b.g.forward(bind(model, batch));
  if (batch_stats) update_running(model, b, branch);
  return b.g.value(b.logits);
}

ad::Tensor model_forward(const Model& model, const LabeledBatch& batch, BnBranch branch) {
  check_batch(model, batch);
  auto b = build_graph(model, batch, branch, false, ad::Reduction::Mean, false, false);
  b.g.forward(bind(model, batch));
  return b.g.value(b.logits);
}

LossAndGrads loss_and_grads(Model& model, const LabeledBatch& clean, const LabeledBatch& adv, BnMode bn_mode,
                            bool parallel_branches) {
  check_batch(model, clean);
  check_batch(model, adv);
  if (clean.size() != adv.size()) {
    throw DataError("clean batch has " + std::to_string(clean.size()) + " examples, adversarial batch " +
                    std::to_string(adv.size()));
  }
  require_train_batch(clean, bn_mode);
  const Model& view = model;
  BranchResult c, a;
  if (parallel_branches) {
    auto fut = std::async(std::launch::async, [&] { return branch_pass(view, adv, BnBranch::Aux, bn_mode); });
    c = branch_pass(view, clean, BnBranch::Main, bn_mode);
    a = fut.get();
  } else {
    c = branch_pass(view, clean, BnBranch::Main, bn_mode);
    a = branch_pass(view, adv, BnBranch::Aux, bn_mode);
  }
  if (bn_mode == BnMode::Batch) {
    update_running(model, c.graph, BnBranch::Main);
    update_running(model, a.graph, BnBranch::Aux);
  }
  LossAndGrads out;
  out.clean_loss = c.loss;
  out.adv_loss = a.loss;
  out.loss = 0.5 * (c.loss + a.loss);
  out.grads = std::move(c.grads);
  for (std::size_t i = 0; i < out.grads.size(); ++i) {
    auto dst = out.grads[i].values();
    auto src = a.grads[i].values();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = 0.5 * (dst[j] + src[j]);
  }
  return out;
}

LossAndGrads clean_loss_and_grads(Model& model, const LabeledBatch& clean, BnMode bn_mode) {
  check_batch(model, clean);
  require_train_batch(clean, bn_mode);
  auto c = branch_pass(model, clean, BnBranch::Main, bn_mode);
  if (bn_mode == BnMode::Batch) update_running(model, c.graph, BnBranch::Main);
  LossAndGrads out;
  out.loss = out.clean_loss = c.loss;
  out.grads = std::move(c.grads);
  return out;
}

ad::Tensor input_gradient(const Model& model, const LabeledBatch& batch, BnBranch branch) {
  check_batch(model, batch);
  auto b = build_graph(model, batch, branch, false, ad::Reduction::Sum, false, true);
  b.g.forward(bind(model, batch));
  auto grads = b.g.backward(b.loss);
  return std::move(grads.at("x"));
}

double eval_loss(const Model& model, const LabeledBatch& batch, BnBranch branch) {
  check_batch(model, batch);
  auto b = build_graph(model, batch, branch, false, ad::Reduction::Mean, false, false);
  b.g.forward(bind(model, batch));
  return b.g.value(b.loss).item();
}

double accuracy(const Model& model, const Dataset& data, std::size_t chunk) {
  if (data.size() == 0) throw DataError("accuracy on empty dataset");
  chunk = std::max<std::size_t>(chunk, 1);
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t end = std::min(data.size(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto batch = data.batch(idx);
    const auto logits = model_forward(model, batch, BnBranch::Main);
    const std::size_t z = logits.dim(1);
    for (std::size_t r = 0; r < batch.size(); ++r) {
      auto row = logits.values().subspan(r * z, z);
      const auto pred = std::distance(row.begin(), std::max_element(row.begin(), row.end()));
      if (pred == batch.labels[r]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::uint64_t state_hash(const Model& model) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : model.params.tensors)
    for (double v : p.tensor.values()) mix(v);
  for (const auto& s : model.bn) {
    for (const auto* stats : {&s.main, &s.aux}) {
      for (double v : stats->mean) mix(v);
      for (double v : stats->var) mix(v);
    }
  }
  return h;
}

double global_norm(const GradientSet& grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (double v : g.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace conadv::model
