// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include "conadv/theory/quadratic.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace conadv::theory {

void QuadraticMinMax::validate() const {
  if (!(mu > 0.0)) throw std::invalid_argument("inner concavity mu must be > 0");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  if (A.rows() != A.cols() || A.rows() == 0) throw std::invalid_argument("A must be square and nonempty");
  if (b.size() != A.rows() || B.rows() != A.rows() || B.cols() == 0) {
    throw std::invalid_argument("b and B must have p rows and B at least one column");
  }
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + A.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("A must be symmetric");
  }
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (anchors[i].size() != B.cols()) throw std::invalid_argument("anchor " + std::to_string(i) + " has wrong length");
  }
}

double QuadraticMinMax::loss(const Vec& theta, const Vec& x, const Vec& anchor) const {
  return 0.5 * theta.dot(A * theta) + b.dot(theta) + theta.dot(B * x) - 0.5 * mu * (x - anchor).squaredNorm();
}

Vec QuadraticMinMax::grad_theta(const Vec& theta, const Vec& x) const { return A * theta + b + B * x; }

Vec QuadraticMinMax::grad_x(const Vec& theta, const Vec& x, const Vec& anchor) const {
  return B.transpose() * theta - mu * (x - anchor);
}

double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

QuadraticMinMax make_problem(const ProblemSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(rng);
    return m;
  };
  const auto p = static_cast<Eigen::Index>(spec.p);
  const auto q = static_cast<Eigen::Index>(spec.q);
  QuadraticMinMax pr;
  Eigen::HouseholderQR<Mat> qr(gaussian(p, p));
  const Mat Q = qr.householderQ();
  Vec eig(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    eig(i) = p == 1 ? spec.a_max : spec.a_min + (spec.a_max - spec.a_min) * static_cast<double>(i) / (p - 1);
  }
  pr.A = Q * eig.asDiagonal() * Q.transpose();
  pr.A = 0.5 * (pr.A + pr.A.transpose());
  pr.b = spec.b_scale * gaussian(p, 1).col(0);
  pr.B = gaussian(p, q);
  const double s = spectral_norm(pr.B);
  pr.B *= s > 0.0 ? spec.coupling / s : 0.0;
  pr.mu = spec.mu;
  pr.epsilon = spec.epsilon;
  for (std::size_t i = 0; i < spec.n; ++i) pr.anchors.push_back(spec.anchor_scale * gaussian(q, 1).col(0));
  pr.validate();
  return pr;
}

Vec inner_argmax_analytic(const QuadraticMinMax& pr, const Vec& theta, const Vec& anchor) {
  if (!(pr.mu > 0.0)) throw std::invalid_argument("inner concavity mu must be > 0");
  const Vec shift = pr.B.transpose() * theta / pr.mu;
  return anchor + shift.cwiseMax(-pr.epsilon).cwiseMin(pr.epsilon);
}

Vec inner_argmax_bruteforce(const QuadraticMinMax& pr, const Vec& theta, const Vec& anchor, std::size_t grid_n) {
  const auto q = pr.q();
  if (q > 2) throw std::invalid_argument("brute-force argmax supports q <= 2, got q = " + std::to_string(q));
  if (grid_n < 101) throw std::invalid_argument("brute-force grid needs at least 101 points per axis");
  auto coord = [&](std::size_t k, Eigen::Index d) {
    return anchor(d) - pr.epsilon + 2.0 * pr.epsilon * static_cast<double>(k) / static_cast<double>(grid_n - 1);
  };
  Vec best = anchor;
  double best_val = -std::numeric_limits<double>::infinity();
  Vec x(static_cast<Eigen::Index>(q));
  const std::size_t n2 = q == 2 ? grid_n : 1;
  for (std::size_t i = 0; i < grid_n; ++i) {
    x(0) = coord(i, 0);
    for (std::size_t j = 0; j < n2; ++j) {
      if (q == 2) x(1) = coord(j, 1);
      const double v = pr.loss(theta, x, anchor);
      if (v > best_val) {
        best_val = v;
        best = x;
      }
    }
  }
  return best;
}

double measure_lambda(const QuadraticMinMax& pr, const Vec& theta, const Vec& x_hat, const Vec& x_star,
                      const Vec& anchor) {
  return (x_star - x_hat).dot(pr.grad_x(theta, x_hat, anchor));
}

Vec pgd_step(const QuadraticMinMax& pr, const Vec& theta, const Vec& anchor, double alpha, std::mt19937_64* rng) {
  Vec x0 = anchor;
  if (rng != nullptr) {
    std::uniform_real_distribution<double> u(-pr.epsilon, pr.epsilon);
    for (Eigen::Index d = 0; d < x0.size(); ++d) x0(d) += u(*rng);
  }
  const Vec stepped = x0 + alpha * pr.grad_x(theta, x0, anchor);
  return anchor + (stepped - anchor).cwiseMax(-pr.epsilon).cwiseMin(pr.epsilon);
}

double loss_D(const QuadraticMinMax& pr, const Vec& theta) {
  double s = 0.0;
  for (const auto& a : pr.anchors) s += pr.loss(theta, inner_argmax_analytic(pr, theta, a), a) + pr.loss(theta, a, a);
  return s / (2.0 * static_cast<double>(pr.n()));
}

Vec grad_D(const QuadraticMinMax& pr, const Vec& theta) {
  Vec xs = Vec::Zero(static_cast<Eigen::Index>(pr.q()));
  for (const auto& a : pr.anchors) xs += inner_argmax_analytic(pr, theta, a) + a;
  return pr.A * theta + pr.b + pr.B * xs / (2.0 * static_cast<double>(pr.n()));
}

double min_loss_D(const QuadraticMinMax& pr, const Vec& theta0, Vec* argmin) {
  const double L = spectral_norm(pr.A) + spectral_norm(pr.B) * spectral_norm(pr.B) / (2.0 * pr.mu);
  Vec theta = theta0;
  for (int it = 0; it < 200000; ++it) {
    const Vec g = grad_D(pr, theta);
    if (g.norm() < 1e-13) break;
    theta -= g / L;
  }
  if (argmin != nullptr) *argmin = theta;
  return loss_D(pr, theta);
}

}  // namespace conadv::theory
