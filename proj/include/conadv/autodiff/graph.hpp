// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Define-then-run computation graph with reverse-mode differentiation.
// Nodes are appended in topological order; the node list is the tape.

#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "conadv/autodiff/tensor.hpp"

namespace conadv::ad {

using NodeId = std::size_t;
using Bindings = std::map<std::string, Tensor>;
using Gradients = std::map<std::string, Tensor>;

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OpKind {
  Input,
  Parameter,
  MatMul,
  Dense,
  Conv2D,
  Relu,
  MaxPool2,
  BatchNorm,
  SoftmaxCrossEntropy,
  Add,
  Scale,
  Mul,
  Sum,
};

const char* op_name(OpKind kind);

enum class Padding { Valid, Same };
enum class Reduction { Mean, Sum };

/// Batch: normalize with the statistics of the current batch.
/// Running: normalize with externally supplied statistics.
enum class NormMode { Batch, Running };

struct BatchNormSpec {
  NormMode mode = NormMode::Batch;
  double eps = 1e-5;
  std::vector<double> running_mean;  // used in Running mode
  std::vector<double> running_var;
};

class Graph {
 public:
  // Leaves. Inputs and parameters differ only in intent; both are bound by
  // name at forward time and both receive gradients.
  NodeId input(const std::string& name, Shape shape);
  NodeId parameter(const std::string& name, Shape shape);

  /// [m,k]x[k,n]; a 1-D left operand acts as a row, a 1-D right operand as a
  /// column, and the corresponding output extent is dropped.
  NodeId matmul(NodeId a, NodeId b);
  /// x:[N, ...] flattened to [N, in], w:[in, out], b:[out].
  NodeId dense(NodeId x, NodeId w, NodeId b);
  /// x:[N,C,H,W], w:[OC,C,kh,kw], b:[OC]; stride 1.
  NodeId conv2d(NodeId x, NodeId w, NodeId b, Padding padding);
  NodeId relu(NodeId x);
  NodeId max_pool2(NodeId x);
  /// Per-channel normalization over the batch (and spatial) axes of
  /// x:[N,C] or x:[N,C,H,W].
  NodeId batch_norm(NodeId x, NodeId gamma, NodeId beta, BatchNormSpec spec);
  NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels,
                               Reduction reduction = Reduction::Mean);
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId x, double factor);
  NodeId mul(NodeId a, NodeId b);
  NodeId sum(NodeId x);

  void mark_output(const std::string& name, NodeId id);

  /// Leaves excluded from differentiation get no gradient and cut off
  /// backward work that only feeds them.
  void set_requires_grad(NodeId leaf, bool enabled);

  std::map<std::string, Tensor> forward(const Bindings& bindings);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Leaf gradients accumulate
  /// across calls until zero_grad().
  Gradients backward(NodeId loss);
  void zero_grad();

  const Tensor& value(NodeId id) const;
  const Shape& shape(NodeId id) const { return at(id).shape; }
  std::size_t size() const { return nodes_.size(); }
  OpKind kind(NodeId id) const { return at(id).kind; }
  const std::vector<NodeId>& inputs_of(NodeId id) const { return at(id).inputs; }

  /// Statistics used by a BatchNorm node on the last forward pass.
  const std::vector<double>& batch_mean(NodeId bn) const;
  const std::vector<double>& batch_var(NodeId bn) const;
  /// Number of values per channel that entered the batch statistics.
  std::size_t batch_count(NodeId bn) const;

  /// Softmax probabilities of a SoftmaxCrossEntropy node after forward.
  const std::vector<double>& probabilities(NodeId ce) const;

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    std::string name;
    Shape shape;
    Tensor value;
    bool requires_grad = true;
    // attributes
    double factor = 1.0;
    Padding padding = Padding::Valid;
    Reduction reduction = Reduction::Mean;
    std::vector<int> labels;
    BatchNormSpec bn;
    // saved by forward
    std::vector<std::size_t> argmax;
    std::vector<double> saved;  // BN x-hat or softmax probabilities
    std::vector<double> mean, var, inv_std;
  };

  NodeId push(Node node);
  Node& at(NodeId id);
  const Node& at(NodeId id) const;
  bool is_leaf(NodeId id) const;

  void forward_node(Node& n);
  void backward_node(Node& n, const std::vector<double>& dy, std::vector<std::vector<double>>& grads,
                     const std::vector<bool>& needs);

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> leaves_;
  std::map<std::string, NodeId> outputs_;
  bool forward_done_ = false;
};

}  // namespace conadv::ad
