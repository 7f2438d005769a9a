// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Quadratic min-max testbed
//   L(theta, x; i) = 1/2 theta'A theta + b'theta + theta'B x - mu/2 |x - x_i|^2
// over the boxes |x - x_i|_inf <= epsilon. The inner problem is mu-strongly
// concave and its constrained maximizer has a closed form.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace conadv::theory {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct QuadraticMinMax {
  Mat A;  // p x p, symmetric positive semidefinite
  Vec b;  // p
  Mat B;  // p x q coupling
  double mu = 1.0;
  double epsilon = 0.5;
  std::vector<Vec> anchors;  // x_i, each of length q

  std::size_t p() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t q() const { return static_cast<std::size_t>(B.cols()); }
  std::size_t n() const { return anchors.size(); }

  /// Throws std::invalid_argument on inconsistent shapes, asymmetric A or mu <= 0.
  void validate() const;

  double loss(const Vec& theta, const Vec& x, const Vec& anchor) const;
  Vec grad_theta(const Vec& theta, const Vec& x) const;
  Vec grad_x(const Vec& theta, const Vec& x, const Vec& anchor) const;
};

struct ProblemSpec {
  std::size_t p = 4;
  std::size_t q = 2;
  std::size_t n = 64;
  double mu = 1.0;
  double epsilon = 0.5;
  double a_min = 0.2;       // eigenvalue range of A
  double a_max = 1.0;
  double coupling = 2.0;    // target spectral norm of B
  double anchor_scale = 1.0;
  double b_scale = 1.0;
};

/// Random instance: A = Q diag(a) Q' with a spread over [a_min, a_max], B
/// rescaled to the requested spectral norm, Gaussian anchors and b.
QuadraticMinMax make_problem(const ProblemSpec& spec, std::uint64_t seed);

double spectral_norm(const Mat& m);

/// x* = clamp(x_i + B'theta/mu, x_i -+ epsilon). Exact: the objective is an
/// isotropic quadratic in x, so the box projection of its unconstrained
/// maximizer is the constrained maximizer.
Vec inner_argmax_analytic(const QuadraticMinMax& pr, const Vec& theta, const Vec& anchor);

/// Exhaustive search over a grid_n^q lattice of the box; q <= 2, grid_n >= 101.
Vec inner_argmax_bruteforce(const QuadraticMinMax& pr, const Vec& theta, const Vec& anchor, std::size_t grid_n);

/// <x* - x_hat, grad_x L(theta, x_hat)>, the first-order gap of x_hat.
double measure_lambda(const QuadraticMinMax& pr, const Vec& theta, const Vec& x_hat, const Vec& x_star,
                      const Vec& anchor);

/// One projected gradient ascent step of size alpha from a uniform random
/// start in the box around the anchor (or from the anchor when rng is null).
Vec pgd_step(const QuadraticMinMax& pr, const Vec& theta, const Vec& anchor, double alpha, std::mt19937_64* rng);

/// L_D(theta) = 1/(2n) sum_i [L(theta, x_i*) + L(theta, x_i)].
double loss_D(const QuadraticMinMax& pr, const Vec& theta);

/// Danskin gradient: A theta + b + 1/(2n) sum_i B (x_i* + x_i).
Vec grad_D(const QuadraticMinMax& pr, const Vec& theta);

/// min L_D by full-gradient descent from theta0 (L_D is convex and smooth).
double min_loss_D(const QuadraticMinMax& pr, const Vec& theta0, Vec* argmin = nullptr);

}  // namespace conadv::theory
