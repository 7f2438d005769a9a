// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "conadv/model/model.hpp"
#include "conadv/theory/quadratic.hpp"
#include "json.hpp"

namespace conadv::theory {

struct LipschitzConstants {
  double L_thth = 0.0;  // theta-theta
  double L_xth = 0.0;   // x-theta: |grad_x L(th1,x) - grad_x L(th2,x)| / |th1 - th2|
  double L_thx = 0.0;   // theta-x
  double L_xx = 0.0;
  double mu = 0.0;      // inner strong concavity; negative estimates mean concavity fails
  bool exact = false;   // false: max observed ratios over sampled pairs
  std::size_t samples = 0;

  /// Smoothness of L_D: L_thth + L_xth * L_thx / (2 mu).
  double L() const { return L_thth + L_xth * L_thx / (2.0 * mu); }
  nlohmann::json to_json() const;
};

LipschitzConstants estimate_constants(const QuadraticMinMax& pr);

/// Sampled estimates for a network: ratios over `pairs` random pairs of
/// (parameter, input) perturbations of relative size `radius` around the
/// given model and training examples, per-example loss, BN in running mode.
LipschitzConstants estimate_constants(const model::Model& net, const model::Dataset& data, std::size_t pairs,
                                      std::uint64_t seed, double radius = 1e-2);

/// Outcome of one bound check.
struct CheckResult {
  std::string name;
  double bound = 0.0;         // largest bound value seen
  double measured_max = 0.0;  // largest left-hand side seen
  double max_ratio = 0.0;     // max of lhs / bound over evaluations with bound > 0
  double mean_ratio = 0.0;
  std::size_t evaluations = 0;
  std::size_t violations = 0;
  nlohmann::json detail = nlohmann::json::object();

  bool ok() const { return violations == 0; }
  /// Records lhs <= rhs, allowing for rounding in the last few bits.
  void observe(double lhs, double rhs);
  void finish();
  nlohmann::json to_json() const;

 private:
  double ratio_sum_ = 0.0;
  std::size_t ratio_count_ = 0;
};

struct ProbeReport {
  std::vector<CheckResult> checks;
  nlohmann::json context = nlohmann::json::object();

  bool ok() const;
  nlohmann::json to_json() const;
  std::string summary_table() const;
};

/// Stale-adversary SGD on L_D: every step draws `batch` anchors, uses
/// adversarial points generated tau steps earlier (from theta_0 while the
/// pipeline fills), clips the stochastic gradient to norm M and moves by eta.
struct ProbeRunConfig {
  double eta = 0.1;
  double M = 10.0;
  int tau = 1;
  std::size_t steps = 1000;
  std::size_t batch = 4;
  double alpha = 0.5;           // PGD step; 1/mu makes one step exact in the interior
  bool exact_adversary = false;  // use the analytic maximizer instead of PGD
  bool random_init = true;
  std::uint64_t seed = 0;
  Vec theta0;
  bool record_grad_D = false;
};

struct ProbeTrajectory {
  std::vector<Vec> theta;                 // theta_0 .. theta_T
  std::vector<double> gap_lhs;         // |g(theta_t) - g_hat_t| per step
  std::vector<double> lambda_running;     // running max first-order gap at consumption time
  std::vector<double> grad_D_sq;          // |grad L_D(theta_t)|^2, when recorded
  std::size_t clipped = 0;
  double eta = 0.0;
  double M = 0.0;
  int tau = 0;
};

ProbeTrajectory run_probe(const QuadraticMinMax& pr, const ProbeRunConfig& cfg);

CheckResult check_drift(const QuadraticMinMax& pr, const std::vector<Vec>& theta, double eta, int tau, double M);

/// |grad L_D(th1) - grad L_D(th2)| <= L |th1 - th2| on `pairs` random pairs,
/// drawn at several scales so that both the interior and the clipped regime
/// of the inner maximizer are exercised.
CheckResult check_smoothness(const QuadraticMinMax& pr, std::size_t pairs, std::uint64_t seed);

/// |g(theta_t) - g_hat_t| <= (L_thx / 2) (eta tau M L_xth / mu + sqrt(lambda / mu)).
CheckResult check_gradient_gap(const QuadraticMinMax& pr, const ProbeTrajectory& traj);

struct ConvergenceConfig {
  std::vector<std::size_t> horizons{250, 500, 1000, 2000, 4000};
  std::vector<int> taus{1, 2, 4};
  std::size_t repetitions = 20;
  std::size_t batch = 4;
  double M = 10.0;
  double alpha = 0.5;
  std::uint64_t seed = 1;
  Vec theta0;
  // Stationary-floor study at a fixed step.
  double floor_eta_scale = 1.0;  // eta = scale / L
  std::size_t floor_steps = 4000;
  std::size_t floor_burn_in = 1000;
  // sigma: max over sampled thetas of the exact mini-batch gradient spread
  std::size_t sigma_samples = 2000;
  double sigma_radius = 0.0;  // 0: |theta0 - theta*| + 1
};

struct ConvergenceRow {
  int tau = 0;
  std::size_t T = 0;
  double eta = 0.0;
  double mean = 0.0;  // mean over repetitions of (1/T) sum_t |grad L_D(theta_t)|^2
  double sd = 0.0;
  double lambda = 0.0;
  double rate_term = 0.0;
  double floor_term = 0.0;
  double bound = 0.0;
  std::size_t clipped = 0;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  std::map<int, double> slope;  // log-log slope of mean vs T per tau
  std::map<int, double> floor;  // stationary mean |grad L_D|^2 at the fixed floor step
  double sigma = 0.0;
  double delta = 0.0;
  double L = 0.0;
  std::size_t violations = 0;
  bool slope_in_range = false;
  bool floor_increasing = false;
  nlohmann::json to_json() const;
};

/// Standard deviation bound for the exact-adversary mini-batch gradient,
/// with replacement sampling of `batch` anchors: max over sampled thetas.
double estimate_sigma(const QuadraticMinMax& pr, std::size_t batch, const Vec& center, double radius,
                      std::size_t samples, std::uint64_t seed);

ConvergenceResult check_convergence(const QuadraticMinMax& pr, const ConvergenceConfig& cfg);

struct CertifyConfig {
  ProblemSpec problem;
  std::uint64_t problem_seed = 11;
  double theta0_value = 3.0;  // theta_0 = theta0_value * ones
  std::size_t steps = 10000;   // per tau for the trajectory checks
  std::vector<int> taus{1, 2, 4};
  double M = 10.0;
  double alpha = 0.5;
  std::size_t pairs = 10000;  // smoothness pairs
  std::uint64_t seed = 1;
  bool convergence = false;
  ConvergenceConfig convergence_config;  // theta0 and M are taken from above
};

/// Trajectory bounds at eta = 1/L for every tau (staleness drift), the
/// smoothness of L_D, the gradient-gap bound at tau = 1 with the one-step PGD
/// adversary and, when requested, the convergence study as three checks: bound,
/// decay slope and floor ordering.
ProbeReport certify(const CertifyConfig& cfg);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace conadv::theory
