// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include "conadv/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace conadv::ad {

double finite_diff_check(const ScalarFn& f, const GradFn& gradient, const Tensor& point, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  const std::vector<double> analytic = gradient(point);
  if (analytic.size() != point.size()) throw ShapeError("finite_diff_check: gradient length mismatch");
  Tensor probe = point;
  double worst = 0.0;
  for (std::size_t j = 0; j < point.size(); ++j) {
    const double x0 = point[j];
    probe[j] = x0 + h;
    const double up = f(probe);
    probe[j] = x0 - h;
    const double down = f(probe);
    probe[j] = x0;
    if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(analytic[j])) {
      throw NonFiniteError("non-finite evaluation at coordinate " + std::to_string(j));
    }
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[j] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

double LeafFunction::value(const Tensor& at) const {
  Bindings b = bindings;
  b[leaf] = at;
  graph->forward(b);
  return graph->value(loss).item();
}

std::vector<double> LeafFunction::gradient(const Tensor& at) const {
  Bindings b = bindings;
  b[leaf] = at;
  graph->forward(b);
  graph->zero_grad();
  auto grads = graph->backward(loss);
  auto it = grads.find(leaf);
  if (it == grads.end()) throw GraphError("leaf '" + leaf + "' does not require gradients");
  return it->second.data();
}

double check_leaf(Graph& graph, NodeId loss, const Bindings& bindings, const std::string& leaf, double h) {
  LeafFunction fn{&graph, loss, bindings, leaf};
  auto it = bindings.find(leaf);
  if (it == bindings.end()) throw GraphError("unbound input '" + leaf + "'");
  return finite_diff_check([&](const Tensor& t) { return fn.value(t); },
                           [&](const Tensor& t) { return fn.gradient(t); }, it->second, h);
}

}  // namespace conadv::ad
