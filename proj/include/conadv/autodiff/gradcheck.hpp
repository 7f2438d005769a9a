// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "conadv/autodiff/graph.hpp"
#include "conadv/autodiff/tensor.hpp"

namespace conadv::ad {

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ScalarFn = std::function<double(const Tensor&)>;
using GradFn = std::function<std::vector<double>(const Tensor&)>;

/// Max over coordinates j of |analytic_j - numeric_j| / max(1, |numeric_j|),
/// numeric_j being the central difference (f(p + h e_j) - f(p - h e_j)) / 2h.
double finite_diff_check(const ScalarFn& f, const GradFn& gradient, const Tensor& point, double h = 1e-5);

/// Wraps one leaf of a graph as a scalar function of that leaf, with every
/// other binding held fixed. The graph is re-run for each evaluation.
struct LeafFunction {
  Graph* graph;
  NodeId loss;
  Bindings bindings;
  std::string leaf;

  double value(const Tensor& at) const;
  std::vector<double> gradient(const Tensor& at) const;
};

double check_leaf(Graph& graph, NodeId loss, const Bindings& bindings, const std::string& leaf,
                  double h = 1e-5);

}  // namespace conadv::ad
