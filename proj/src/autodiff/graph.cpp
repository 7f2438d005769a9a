// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include "conadv/autodiff/graph.hpp"

#include <algorithm>
#include <cmath>

#include "kernels.hpp"

namespace conadv::ad {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Parameter: return "parameter";
    case OpKind::MatMul: return "matmul";
    case OpKind::Dense: return "dense";
    case OpKind::Conv2D: return "conv2d";
    case OpKind::Relu: return "relu";
    case OpKind::MaxPool2: return "max_pool2";
    case OpKind::BatchNorm: return "batch_norm";
    case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::Add: return "add";
    case OpKind::Scale: return "scale";
    case OpKind::Mul: return "mul";
    case OpKind::Sum: return "sum";
  }
  return "?";
}

namespace {

[[noreturn]] void shape_fail(NodeId id, OpKind kind, const std::string& what) {
  throw ShapeError("node " + std::to_string(id) + " (" + op_name(kind) + "): " + what);
}

std::size_t trailing(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t i = 1; i < s.size(); ++i) n *= s[i];
  return n;
}

struct ConvGeom {
  std::size_t n, c, h, w, oc, kh, kw, pad, oh, ow;
  std::size_t rows() const { return n * oh * ow; }
  std::size_t cols() const { return c * kh * kw; }
};

ConvGeom conv_geom(const Shape& x, const Shape& w, Padding padding) {
  ConvGeom g{};
  g.n = x[0];
  g.c = x[1];
  g.h = x[2];
  g.w = x[3];
  g.oc = w[0];
  g.kh = w[2];
  g.kw = w[3];
  g.pad = padding == Padding::Same ? g.kh / 2 : 0;
  g.oh = g.h + 2 * g.pad + 1 - g.kh;
  g.ow = g.w + 2 * g.pad + 1 - g.kw;
  return g;
}

// Samples per im2col block; keeps the column buffer cache-sized.
constexpr std::size_t kConvBlock = 32;

// cols[k, s * hw + p] for samples [n0, n0 + nb), k = (c * kh + i) * kw + j.
void im2col_block(const ConvGeom& g, const double* x, std::size_t n0, std::size_t nb, double* cols) {
  const std::size_t hw = g.oh * g.ow, width = nb * hw;
  std::size_t k = 0;
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j, ++k) {
        double* row = cols + k * width;
        for (std::size_t s = 0; s < nb; ++s) {
          const double* plane = x + ((n0 + s) * g.c + c) * g.h * g.w;
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const long iy = static_cast<long>(oy + i) - static_cast<long>(g.pad);
            double* dst = row + s * hw + oy * g.ow;
            if (iy < 0 || iy >= static_cast<long>(g.h)) {
              std::fill(dst, dst + g.ow, 0.0);
              continue;
            }
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const long ix = static_cast<long>(ox + j) - static_cast<long>(g.pad);
              dst[ox] = ix < 0 || ix >= static_cast<long>(g.w) ? 0.0 : plane[iy * static_cast<long>(g.w) + ix];
            }
          }
        }
      }
}

void col2im_block_add(const ConvGeom& g, const double* cols, std::size_t n0, std::size_t nb, double* dx) {
  const std::size_t hw = g.oh * g.ow, width = nb * hw;
  std::size_t k = 0;
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j, ++k) {
        const double* row = cols + k * width;
        for (std::size_t s = 0; s < nb; ++s) {
          double* plane = dx + ((n0 + s) * g.c + c) * g.h * g.w;
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const long iy = static_cast<long>(oy + i) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            const double* src = row + s * hw + oy * g.ow;
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const long ix = static_cast<long>(ox + j) - static_cast<long>(g.pad);
              if (ix >= 0 && ix < static_cast<long>(g.w)) plane[iy * static_cast<long>(g.w) + ix] += src[ox];
            }
          }
        }
      }
}

// Row-major [rows, spatial] view helpers for per-channel statistics.
struct ChannelLayout {
  std::size_t n, c, s;
  std::size_t index(std::size_t ni, std::size_t ci, std::size_t si) const { return (ni * c + ci) * s + si; }
};

ChannelLayout channel_layout(const Shape& x) {
  ChannelLayout l{x[0], x[1], 1};
  for (std::size_t i = 2; i < x.size(); ++i) l.s *= x[i];
  return l;
}

std::vector<double>& grad_slot(std::vector<std::vector<double>>& grads, NodeId id, std::size_t size) {
  auto& g = grads[id];
  if (g.empty()) g.assign(size, 0.0);
  return g;
}

}  // namespace

NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  forward_done_ = false;
  return nodes_.size() - 1;
}

Graph::Node& Graph::at(NodeId id) {
  if (id >= nodes_.size()) throw GraphError("unknown node id " + std::to_string(id));
  return nodes_[id];
}

const Graph::Node& Graph::at(NodeId id) const {
  if (id >= nodes_.size()) throw GraphError("unknown node id " + std::to_string(id));
  return nodes_[id];
}

bool Graph::is_leaf(NodeId id) const {
  const auto k = at(id).kind;
  return k == OpKind::Input || k == OpKind::Parameter;
}

NodeId Graph::input(const std::string& name, Shape shape) {
  if (leaves_.count(name)) throw GraphError("duplicate leaf name '" + name + "'");
  Node n{};
  n.kind = OpKind::Input;
  n.name = name;
  n.shape = std::move(shape);
  if (n.shape.empty() || numel(n.shape) == 0) throw ShapeError("leaf '" + name + "' has an empty shape");
  const NodeId id = push(std::move(n));
  leaves_[name] = id;
  return id;
}

NodeId Graph::parameter(const std::string& name, Shape shape) {
  const NodeId id = input(name, std::move(shape));
  nodes_[id].kind = OpKind::Parameter;
  return id;
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Shape& sa = at(a).shape;
  const Shape& sb = at(b).shape;
  const NodeId id = nodes_.size();
  if (sa.size() > 2 || sb.size() > 2) shape_fail(id, OpKind::MatMul, "operands must be 1-D or 2-D");
  const std::size_t ka = sa.back();
  const std::size_t kb = sb.front();
  if (ka != kb) {
    shape_fail(id, OpKind::MatMul, "inner extents differ: " + to_string(sa) + " x " + to_string(sb));
  }
  Shape out;
  if (sa.size() == 2) out.push_back(sa[0]);
  if (sb.size() == 2) out.push_back(sb[1]);
  if (out.empty()) out.push_back(1);
  Node n{};
  n.kind = OpKind::MatMul;
  n.inputs = {a, b};
  n.shape = out;
  return push(std::move(n));
}

NodeId Graph::dense(NodeId x, NodeId w, NodeId b) {
  const Shape& sx = at(x).shape;
  const Shape& sw = at(w).shape;
  const Shape& sb = at(b).shape;
  const NodeId id = nodes_.size();
  if (sx.size() < 2) shape_fail(id, OpKind::Dense, "input must be [N, ...], got " + to_string(sx));
  if (sw.size() != 2 || sw[0] != trailing(sx)) {
    shape_fail(id, OpKind::Dense,
               "weight expected [" + std::to_string(trailing(sx)) + ", out], got " + to_string(sw));
  }
  if (sb != Shape{sw[1]}) {
    shape_fail(id, OpKind::Dense, "bias expected [" + std::to_string(sw[1]) + "], got " + to_string(sb));
  }
  Node n{};
  n.kind = OpKind::Dense;
  n.inputs = {x, w, b};
  n.shape = {sx[0], sw[1]};
  return push(std::move(n));
}

NodeId Graph::conv2d(NodeId x, NodeId w, NodeId b, Padding padding) {
  const Shape& sx = at(x).shape;
  const Shape& sw = at(w).shape;
  const Shape& sb = at(b).shape;
  const NodeId id = nodes_.size();
  if (sx.size() != 4) shape_fail(id, OpKind::Conv2D, "input must be [N,C,H,W], got " + to_string(sx));
  if (sw.size() != 4 || sw[1] != sx[1]) {
    shape_fail(id, OpKind::Conv2D, "weight expected [OC," + std::to_string(sx[1]) + ",kh,kw], got " + to_string(sw));
  }
  if (sb != Shape{sw[0]}) shape_fail(id, OpKind::Conv2D, "bias expected [OC], got " + to_string(sb));
  if (padding == Padding::Same && (sw[2] % 2 == 0 || sw[3] % 2 == 0)) {
    shape_fail(id, OpKind::Conv2D, "same padding needs odd kernel extents");
  }
  const ConvGeom g = conv_geom(sx, sw, padding);
  if (g.h + 2 * g.pad < g.kh || g.w + 2 * g.pad < g.kw) {
    shape_fail(id, OpKind::Conv2D, "kernel larger than input " + to_string(sx));
  }
  Node n{};
  n.kind = OpKind::Conv2D;
  n.inputs = {x, w, b};
  n.padding = padding;
  n.shape = {g.n, g.oc, g.oh, g.ow};
  return push(std::move(n));
}

NodeId Graph::relu(NodeId x) {
  Node n{};
  n.kind = OpKind::Relu;
  n.inputs = {x};
  n.shape = at(x).shape;
  return push(std::move(n));
}

NodeId Graph::max_pool2(NodeId x) {
  const Shape& sx = at(x).shape;
  if (sx.size() != 4 || sx[2] < 2 || sx[3] < 2) {
    shape_fail(nodes_.size(), OpKind::MaxPool2, "input must be [N,C,H>=2,W>=2], got " + to_string(sx));
  }
  Node n{};
  n.kind = OpKind::MaxPool2;
  n.inputs = {x};
  n.shape = {sx[0], sx[1], sx[2] / 2, sx[3] / 2};
  return push(std::move(n));
}

NodeId Graph::batch_norm(NodeId x, NodeId gamma, NodeId beta, BatchNormSpec spec) {
  const Shape& sx = at(x).shape;
  const NodeId id = nodes_.size();
  if (sx.size() != 2 && sx.size() != 4) {
    shape_fail(id, OpKind::BatchNorm, "input must be [N,C] or [N,C,H,W], got " + to_string(sx));
  }
  const Shape ch{sx[1]};
  if (at(gamma).shape != ch || at(beta).shape != ch) {
    shape_fail(id, OpKind::BatchNorm, "gamma/beta must be " + to_string(ch));
  }
  if (spec.mode == NormMode::Running &&
      (spec.running_mean.size() != sx[1] || spec.running_var.size() != sx[1])) {
    shape_fail(id, OpKind::BatchNorm, "running statistics must have one entry per channel");
  }
  if (!(spec.eps > 0.0)) shape_fail(id, OpKind::BatchNorm, "eps must be positive");
  Node n{};
  n.kind = OpKind::BatchNorm;
  n.inputs = {x, gamma, beta};
  n.shape = sx;
  n.bn = std::move(spec);
  return push(std::move(n));
}

NodeId Graph::softmax_cross_entropy(NodeId logits, std::vector<int> labels, Reduction reduction) {
  const Shape& sl = at(logits).shape;
  const NodeId id = nodes_.size();
  if (sl.size() != 2) shape_fail(id, OpKind::SoftmaxCrossEntropy, "logits must be [N,Z], got " + to_string(sl));
  if (labels.size() != sl[0]) {
    shape_fail(id, OpKind::SoftmaxCrossEntropy,
               "expected " + std::to_string(sl[0]) + " labels, got " + std::to_string(labels.size()));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= sl[1]) {
      throw GraphError("node " + std::to_string(id) + " (softmax_cross_entropy): label " + std::to_string(y) +
                       " outside [0, " + std::to_string(sl[1]) + ")");
    }
  }
  Node n{};
  n.kind = OpKind::SoftmaxCrossEntropy;
  n.inputs = {logits};
  n.labels = std::move(labels);
  n.reduction = reduction;
  n.shape = {1};
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  if (at(a).shape != at(b).shape) {
    shape_fail(nodes_.size(), OpKind::Add, to_string(at(a).shape) + " vs " + to_string(at(b).shape));
  }
  Node n{};
  n.kind = OpKind::Add;
  n.inputs = {a, b};
  n.shape = at(a).shape;
  return push(std::move(n));
}

NodeId Graph::scale(NodeId x, double factor) {
  Node n{};
  n.kind = OpKind::Scale;
  n.inputs = {x};
  n.factor = factor;
  n.shape = at(x).shape;
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  if (at(a).shape != at(b).shape) {
    shape_fail(nodes_.size(), OpKind::Mul, to_string(at(a).shape) + " vs " + to_string(at(b).shape));
  }
  Node n{};
  n.kind = OpKind::Mul;
  n.inputs = {a, b};
  n.shape = at(a).shape;
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  Node n{};
  n.kind = OpKind::Sum;
  n.inputs = {x};
  n.shape = {1};
  (void)at(x);
  return push(std::move(n));
}

void Graph::mark_output(const std::string& name, NodeId id) {
  (void)at(id);
  outputs_[name] = id;
}

void Graph::set_requires_grad(NodeId leaf, bool enabled) {
  if (!is_leaf(leaf)) throw GraphError("requires_grad applies to leaves only");
  at(leaf).requires_grad = enabled;
}

const Tensor& Graph::value(NodeId id) const {
  if (!forward_done_) throw GraphError("value requested before forward");
  return at(id).value;
}

const std::vector<double>& Graph::batch_mean(NodeId bn) const {
  if (at(bn).kind != OpKind::BatchNorm || !forward_done_) throw GraphError("no batch statistics for node");
  return at(bn).mean;
}

const std::vector<double>& Graph::batch_var(NodeId bn) const {
  if (at(bn).kind != OpKind::BatchNorm || !forward_done_) throw GraphError("no batch statistics for node");
  return at(bn).var;
}

std::size_t Graph::batch_count(NodeId bn) const {
  const auto l = channel_layout(at(bn).shape);
  return l.n * l.s;
}

const std::vector<double>& Graph::probabilities(NodeId ce) const {
  if (at(ce).kind != OpKind::SoftmaxCrossEntropy || !forward_done_) {
    throw GraphError("no probabilities for node");
  }
  return at(ce).saved;
}

std::map<std::string, Tensor> Graph::forward(const Bindings& bindings) {
  forward_done_ = false;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    if (n.kind == OpKind::Input || n.kind == OpKind::Parameter) {
      auto it = bindings.find(n.name);
      if (it == bindings.end()) throw GraphError("unbound input '" + n.name + "' (node " + std::to_string(id) + ")");
      if (it->second.shape() != n.shape) {
        throw ShapeError("node " + std::to_string(id) + " ('" + n.name + "'): expected " + to_string(n.shape) +
                         ", got " + to_string(it->second.shape()));
      }
      n.value = Tensor(n.shape, it->second.data());
    } else {
      forward_node(n);
    }
  }
  forward_done_ = true;
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : outputs_) out.emplace(name, nodes_[id].value);
  return out;
}

void Graph::forward_node(Node& n) {
  auto in = [&](std::size_t i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
  Tensor y(n.shape);
  double* out = y.values().data();
  switch (n.kind) {
    case OpKind::MatMul: {
      const Shape& sa = in(0).shape();
      const Shape& sb = in(1).shape();
      const std::size_t m = sa.size() == 2 ? sa[0] : 1;
      const std::size_t k = sa.back();
      const std::size_t cols = sb.size() == 2 ? sb[1] : 1;
      kernels::gemm_nn(m, cols, k, in(0).values().data(), in(1).values().data(), out, false);
      break;
    }
    case OpKind::Dense: {
      const std::size_t rows = n.shape[0], cols = n.shape[1];
      const std::size_t k = trailing(in(0).shape());
      const double* bias = in(2).values().data();
      for (std::size_t i = 0; i < rows; ++i) std::copy(bias, bias + cols, out + i * cols);
      kernels::gemm_nn(rows, cols, k, in(0).values().data(), in(1).values().data(), out, true);
      break;
    }
    case OpKind::Conv2D: {
      const ConvGeom g = conv_geom(in(0).shape(), in(1).shape(), n.padding);
      const std::size_t hw = g.oh * g.ow, ck = g.cols();
      const double* x = in(0).values().data();
      const double* w = in(1).values().data();
      const double* bias = in(2).values().data();
      std::vector<double> cols(ck * kConvBlock * hw), res(g.oc * kConvBlock * hw);
      for (std::size_t n0 = 0; n0 < g.n; n0 += kConvBlock) {
        const std::size_t nb = std::min(kConvBlock, g.n - n0), width = nb * hw;
        im2col_block(g, x, n0, nb, cols.data());
        kernels::gemm_nn(g.oc, width, ck, w, cols.data(), res.data(), false);
        for (std::size_t s = 0; s < nb; ++s)
          for (std::size_t oc = 0; oc < g.oc; ++oc) {
            const double* r = res.data() + oc * width + s * hw;
            double* o = out + ((n0 + s) * g.oc + oc) * hw;
            for (std::size_t p = 0; p < hw; ++p) o[p] = r[p] + bias[oc];
          }
      }
      break;
    }
    case OpKind::Relu: {
      auto x = in(0).values();
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    }
    case OpKind::MaxPool2: {
      const Shape& sx = in(0).shape();
      const std::size_t h = sx[2], w = sx[3], oh = n.shape[2], ow = n.shape[3];
      auto x = in(0).values();
      n.argmax.assign(y.size(), 0);
      std::size_t o = 0;
      for (std::size_t plane = 0; plane < sx[0] * sx[1]; ++plane)
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
            std::size_t best = plane * h * w + (2 * oy) * w + 2 * ox;
            for (std::size_t dy = 0; dy < 2; ++dy)
              for (std::size_t dx = 0; dx < 2; ++dx) {
                const std::size_t idx = plane * h * w + (2 * oy + dy) * w + 2 * ox + dx;
                if (x[idx] > x[best]) best = idx;
              }
            n.argmax[o] = best;
            out[o] = x[best];
          }
      break;
    }
    case OpKind::BatchNorm: {
      const auto l = channel_layout(n.shape);
      auto x = in(0).values();
      auto gamma = in(1).values();
      auto beta = in(2).values();
      const double cnt = static_cast<double>(l.n * l.s);
      n.mean.assign(l.c, 0.0);
      n.var.assign(l.c, 0.0);
      n.inv_std.assign(l.c, 0.0);
      if (n.bn.mode == NormMode::Batch) {
        for (std::size_t ni = 0; ni < l.n; ++ni)
          for (std::size_t c = 0; c < l.c; ++c)
            for (std::size_t s = 0; s < l.s; ++s) n.mean[c] += x[l.index(ni, c, s)];
        for (std::size_t c = 0; c < l.c; ++c) n.mean[c] /= cnt;
        for (std::size_t ni = 0; ni < l.n; ++ni)
          for (std::size_t c = 0; c < l.c; ++c)
            for (std::size_t s = 0; s < l.s; ++s) {
              const double d = x[l.index(ni, c, s)] - n.mean[c];
              n.var[c] += d * d;
            }
        for (std::size_t c = 0; c < l.c; ++c) n.var[c] /= cnt;
      } else {
        n.mean = n.bn.running_mean;
        n.var = n.bn.running_var;
      }
      for (std::size_t c = 0; c < l.c; ++c) n.inv_std[c] = 1.0 / std::sqrt(n.var[c] + n.bn.eps);
      n.saved.assign(y.size(), 0.0);
      for (std::size_t ni = 0; ni < l.n; ++ni)
        for (std::size_t c = 0; c < l.c; ++c)
          for (std::size_t s = 0; s < l.s; ++s) {
            const std::size_t i = l.index(ni, c, s);
            const double xhat = (x[i] - n.mean[c]) * n.inv_std[c];
            n.saved[i] = xhat;
            out[i] = gamma[c] * xhat + beta[c];
          }
      break;
    }
    case OpKind::SoftmaxCrossEntropy: {
      const std::size_t rows = in(0).shape()[0], z = in(0).shape()[1];
      auto logits = in(0).values();
      n.saved.assign(rows * z, 0.0);
      double total = 0.0;
      for (std::size_t i = 0; i < rows; ++i) {
        const double* row = logits.data() + i * z;
        const double mx = *std::max_element(row, row + z);
        double se = 0.0;
        for (std::size_t j = 0; j < z; ++j) se += std::exp(row[j] - mx);
        const double lse = mx + std::log(se);
        for (std::size_t j = 0; j < z; ++j) n.saved[i * z + j] = std::exp(row[j] - lse);
        total += lse - row[n.labels[i]];
      }
      out[0] = n.reduction == Reduction::Mean ? total / static_cast<double>(rows) : total;
      break;
    }
    case OpKind::Add: {
      auto a = in(0).values();
      auto b = in(1).values();
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
      break;
    }
    case OpKind::Scale: {
      auto a = in(0).values();
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = n.factor * a[i];
      break;
    }
    case OpKind::Mul: {
      auto a = in(0).values();
      auto b = in(1).values();
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
      break;
    }
    case OpKind::Sum: {
      double s = 0.0;
      for (double v : in(0).values()) s += v;
      out[0] = s;
      break;
    }
    case OpKind::Input:
    case OpKind::Parameter:
      break;
  }
  n.value = std::move(y);
}

Gradients Graph::backward(NodeId loss) {
  if (!forward_done_) throw GraphError("backward called before forward");
  if (numel(at(loss).shape) != 1) {
    throw GraphError("loss node " + std::to_string(loss) + " is not scalar: " + to_string(at(loss).shape));
  }
  std::vector<bool> needs(nodes_.size(), false);
  for (NodeId id = 0; id <= loss; ++id) {
    const Node& n = nodes_[id];
    if (is_leaf(id)) {
      needs[id] = n.requires_grad;
    } else {
      for (NodeId p : n.inputs) needs[id] = needs[id] || needs[p];
    }
  }
  std::vector<std::vector<double>> grads(nodes_.size());
  grads[loss] = {1.0};
  for (NodeId id = loss + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (grads[id].empty() || !needs[id]) continue;
    if (is_leaf(id)) {
      auto acc = n.value.ensure_grad();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += grads[id][i];
    } else {
      backward_node(n, grads[id], grads, needs);
    }
    grads[id].clear();
    grads[id].shrink_to_fit();
  }
  Gradients out;
  for (const auto& [name, id] : leaves_) {
    Node& n = nodes_[id];
    if (!n.requires_grad) continue;
    Tensor g(n.shape);
    if (n.value.has_grad()) std::copy(n.value.grad().begin(), n.value.grad().end(), g.values().begin());
    out.emplace(name, std::move(g));
  }
  return out;
}

void Graph::zero_grad() {
  for (auto& n : nodes_) n.value.drop_grad();
}

void Graph::backward_node(Node& n, const std::vector<double>& dy, std::vector<std::vector<double>>& grads,
                          const std::vector<bool>& needs) {
  auto in = [&](std::size_t i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
  auto want = [&](std::size_t i) { return needs[n.inputs[i]]; };
  auto slot = [&](std::size_t i) -> std::vector<double>& {
    return grad_slot(grads, n.inputs[i], in(i).size());
  };
  switch (n.kind) {
    case OpKind::MatMul: {
      const Shape& sa = in(0).shape();
      const Shape& sb = in(1).shape();
      const std::size_t m = sa.size() == 2 ? sa[0] : 1;
      const std::size_t k = sa.back();
      const std::size_t cols = sb.size() == 2 ? sb[1] : 1;
      if (want(0)) {
        std::vector<double> bt(cols * k);
        kernels::transpose(in(1).values().data(), k, cols, bt.data());
        kernels::gemm_nn(m, k, cols, dy.data(), bt.data(), slot(0).data(), true);
      }
      if (want(1)) kernels::gemm_tn_acc(m, k, cols, in(0).values().data(), dy.data(), slot(1).data());
      break;
    }
    case OpKind::Dense: {
      const std::size_t rows = n.shape[0], cols = n.shape[1];
      const std::size_t k = trailing(in(0).shape());
      if (want(0)) {
        std::vector<double> wt(cols * k);
        kernels::transpose(in(1).values().data(), k, cols, wt.data());
        kernels::gemm_nn(rows, k, cols, dy.data(), wt.data(), slot(0).data(), true);
      }
      if (want(1)) kernels::gemm_tn_acc(rows, k, cols, in(0).values().data(), dy.data(), slot(1).data());
      if (want(2)) {
        auto& db = slot(2);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) db[j] += dy[i * cols + j];
      }
      break;
    }
    case OpKind::Conv2D: {
      const ConvGeom g = conv_geom(in(0).shape(), in(1).shape(), n.padding);
      const std::size_t hw = g.oh * g.ow, ck = g.cols();
      if (want(2)) {
        auto& db = slot(2);
        for (std::size_t ni = 0; ni < g.n; ++ni)
          for (std::size_t oc = 0; oc < g.oc; ++oc) {
            const double* d = dy.data() + (ni * g.oc + oc) * hw;
            double acc = 0.0;
            for (std::size_t p = 0; p < hw; ++p) acc += d[p];
            db[oc] += acc;
          }
      }
      if (!want(0) && !want(1)) break;
      std::vector<double> cols(ck * kConvBlock * hw), dres(g.oc * kConvBlock * hw);
      for (std::size_t n0 = 0; n0 < g.n; n0 += kConvBlock) {
        const std::size_t nb = std::min(kConvBlock, g.n - n0), width = nb * hw;
        for (std::size_t s = 0; s < nb; ++s)
          for (std::size_t oc = 0; oc < g.oc; ++oc) {
            const double* d = dy.data() + ((n0 + s) * g.oc + oc) * hw;
            std::copy(d, d + hw, dres.data() + oc * width + s * hw);
          }
        if (want(1)) {
          im2col_block(g, in(0).values().data(), n0, nb, cols.data());
          kernels::gemm_nt_acc(g.oc, ck, width, dres.data(), cols.data(), slot(1).data());
        }
        if (want(0)) {
          kernels::gemm_tn(ck, width, g.oc, in(1).values().data(), dres.data(), cols.data());
          col2im_block_add(g, cols.data(), n0, nb, slot(0).data());
        }
      }
      break;
    }
    case OpKind::Relu: {
      if (!want(0)) break;
      auto x = in(0).values();
      auto& dx = slot(0);
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0) dx[i] += dy[i];
      break;
    }
    case OpKind::MaxPool2: {
      if (!want(0)) break;
      auto& dx = slot(0);
      for (std::size_t o = 0; o < n.argmax.size(); ++o) dx[n.argmax[o]] += dy[o];
      break;
    }
    case OpKind::BatchNorm: {
      const auto l = channel_layout(n.shape);
      auto gamma = in(1).values();
      const double cnt = static_cast<double>(l.n * l.s);
      std::vector<double> sum_dy(l.c, 0.0), sum_dy_xhat(l.c, 0.0);
      for (std::size_t ni = 0; ni < l.n; ++ni)
        for (std::size_t c = 0; c < l.c; ++c)
          for (std::size_t s = 0; s < l.s; ++s) {
            const std::size_t i = l.index(ni, c, s);
            sum_dy[c] += dy[i];
            sum_dy_xhat[c] += dy[i] * n.saved[i];
          }
      if (want(1)) {
        auto& dg = slot(1);
        for (std::size_t c = 0; c < l.c; ++c) dg[c] += sum_dy_xhat[c];
      }
      if (want(2)) {
        auto& db = slot(2);
        for (std::size_t c = 0; c < l.c; ++c) db[c] += sum_dy[c];
      }
      if (want(0)) {
        auto& dx = slot(0);
        const bool batch = n.bn.mode == NormMode::Batch;
        for (std::size_t ni = 0; ni < l.n; ++ni)
          for (std::size_t c = 0; c < l.c; ++c)
            for (std::size_t s = 0; s < l.s; ++s) {
              const std::size_t i = l.index(ni, c, s);
              const double k = gamma[c] * n.inv_std[c];
              if (batch) {
                dx[i] += k * (dy[i] - sum_dy[c] / cnt - n.saved[i] * sum_dy_xhat[c] / cnt);
              } else {
                dx[i] += k * dy[i];
              }
            }
      }
      break;
    }
    case OpKind::SoftmaxCrossEntropy: {
      if (!want(0)) break;
      const std::size_t rows = in(0).shape()[0], z = in(0).shape()[1];
      const double s = dy[0] * (n.reduction == Reduction::Mean ? 1.0 / static_cast<double>(rows) : 1.0);
      auto& dx = slot(0);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < z; ++j) {
          const double target = static_cast<int>(j) == n.labels[i] ? 1.0 : 0.0;
          dx[i * z + j] += s * (n.saved[i * z + j] - target);
        }
      break;
    }
    case OpKind::Add: {
      for (std::size_t k = 0; k < 2; ++k) {
        if (!want(k)) continue;
        auto& dx = slot(k);
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
      }
      break;
    }
    case OpKind::Scale: {
      if (!want(0)) break;
      auto& dx = slot(0);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += n.factor * dy[i];
      break;
    }
    case OpKind::Mul: {
      auto a = in(0).values();
      auto b = in(1).values();
      if (want(0)) {
        auto& da = slot(0);
        for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * b[i];
      }
      if (want(1)) {
        auto& db = slot(1);
        for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * a[i];
      }
      break;
    }
    case OpKind::Sum: {
      if (!want(0)) break;
      auto& dx = slot(0);
      for (double& v : dx) v += dy[0];
      break;
    }
    case OpKind::Input:
    case OpKind::Parameter:
      break;
  }
}

}  // namespace conadv::ad
