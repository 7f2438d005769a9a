// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "../support/toy_data.hpp"
#include "conadv/theory/probe.hpp"

using namespace conadv::theory;

namespace {

QuadraticMinMax identity_problem() {
  QuadraticMinMax pr;
  pr.A = Mat::Identity(2, 2);
  pr.b = Vec::Zero(2);
  pr.B = Mat::Identity(2, 2);
  pr.mu = 1.0;
  pr.epsilon = 0.1;
  pr.anchors = {Vec::Zero(2)};
  return pr;
}

Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

}  // namespace

TEST(InnerArgmax, ClosedFormExamples) {
  const auto pr = identity_problem();
  const Vec a = Vec::Zero(2);
  EXPECT_EQ(inner_argmax_analytic(pr, Vec::Zero(2), a), a);
  const Vec x = inner_argmax_analytic(pr, Vec{{0.05, 0.0}}, a);
  EXPECT_DOUBLE_EQ(x(0), 0.05);
  EXPECT_DOUBLE_EQ(x(1), 0.0);
  auto bad = pr;
  bad.mu = 0.0;
  EXPECT_THROW(inner_argmax_analytic(bad, Vec::Zero(2), a), std::invalid_argument);
}

TEST(InnerArgmax, BruteForceAgreesWithinGridResolution) {
  const auto pr = make_problem({}, 3);
  std::mt19937_64 rng(5);
  const std::size_t grid = 201;
  for (int i = 0; i < 1000; ++i) {
    const Vec theta = random_vec(rng, 4, 1.0);
    const Vec a = random_vec(rng, 2, 1.0);
    const Vec d = inner_argmax_analytic(pr, theta, a) - inner_argmax_bruteforce(pr, theta, a, grid);
    EXPECT_LE(d.cwiseAbs().maxCoeff(), 2.0 * pr.epsilon / grid);
  }
}

TEST(InnerArgmax, BruteForceAtZeroThetaPicksGridPointNearestAnchor) {
  const auto pr = make_problem({}, 3);
  const Vec a{{0.3, -0.2}};
  const Vec x = inner_argmax_bruteforce(pr, Vec::Zero(4), a, 101);
  EXPECT_LE((x - a).cwiseAbs().maxCoeff(), 1e-12);  // odd grid contains the center
}

TEST(InnerArgmax, RefiningTheGridShrinksDisagreement) {
  const auto pr = make_problem({}, 4);
  std::mt19937_64 rng(8);
  std::vector<double> err(3, 0.0);
  const std::size_t grids[] = {101, 201, 401};
  for (int i = 0; i < 200; ++i) {
    const Vec theta = random_vec(rng, 4, 0.3);
    const Vec a = random_vec(rng, 2, 1.0);
    for (int g = 0; g < 3; ++g)
      err[g] += (inner_argmax_analytic(pr, theta, a) - inner_argmax_bruteforce(pr, theta, a, grids[g])).norm();
  }
  EXPECT_GT(err[0], err[1]);
  EXPECT_GT(err[1], err[2]);
}

TEST(InnerArgmax, BruteForceErrors) {
  auto pr = make_problem({4, 3, 8}, 1);
  EXPECT_THROW(inner_argmax_bruteforce(pr, Vec::Zero(4), Vec::Zero(3), 101), std::invalid_argument);
  pr = make_problem({}, 1);
  EXPECT_THROW(inner_argmax_bruteforce(pr, Vec::Zero(4), Vec::Zero(2), 50), std::invalid_argument);
}

TEST(Lambda, ExactSolutionAndZeroGradient) {
  const auto pr = make_problem({}, 6);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const Vec theta = random_vec(rng, 4, 2.0);
    const Vec& a = pr.anchors[static_cast<std::size_t>(i) % pr.n()];
    const Vec xs = inner_argmax_analytic(pr, theta, a);
    EXPECT_LE(measure_lambda(pr, theta, xs, xs, a), 1e-10);
    const Vec xh = pgd_step(pr, theta, a, 0.5 / pr.mu, &rng);
    EXPECT_GE(measure_lambda(pr, theta, xh, xs, a), -1e-12);
  }
  const Vec& a = pr.anchors[0];
  EXPECT_EQ(measure_lambda(pr, Vec::Zero(4), a, inner_argmax_analytic(pr, Vec::Zero(4), a), a), 0.0);
}

TEST(Lambda, UnitPgdStepIsExactInTheInterior) {
  const auto pr = identity_problem();
  const Vec theta{{0.03, -0.04}};
  std::mt19937_64 rng(1);
  const Vec xh = pgd_step(pr, theta, pr.anchors[0], 1.0 / pr.mu, &rng);
  EXPECT_LE((xh - inner_argmax_analytic(pr, theta, pr.anchors[0])).norm(), 1e-15);
}

TEST(Constants, ExactForQuadratic) {
  auto pr = make_problem({}, 2);
  auto c = estimate_constants(pr);
  EXPECT_TRUE(c.exact);
  EXPECT_NEAR(c.L_xth, 2.0, 1e-12);
  EXPECT_NEAR(c.L_thth, 1.0, 1e-12);
  EXPECT_NEAR(c.L(), 1.0 + 4.0 / 2.0, 1e-12);
  pr.B.setZero();
  EXPECT_EQ(estimate_constants(pr).L_xth, 0.0);
}

TEST(Constants, SampledForNetwork) {
  const auto data = conadv::testing::toy_dataset(32, {6}, 3, 1);
  const auto net = conadv::model::init_model(conadv::model::make_architecture("mlp", {6}, 3, {8}), 2);
  const auto c = estimate_constants(net, data, 50, 3);
  EXPECT_FALSE(c.exact);
  EXPECT_EQ(c.samples, 50u);
  for (double v : {c.L_thth, c.L_xth, c.L_thx, c.L_xx}) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, 0.0);
  }
  EXPECT_EQ(c.to_json()["provenance"], "sampled");
}

TEST(StalenessDrift, DegenerateCases) {
  const auto pr = make_problem({}, 1);
  ProbeRunConfig rc;
  rc.eta = 0.2;
  rc.steps = 50;
  rc.theta0 = Vec::Constant(4, 2.0);
  const auto traj = run_probe(pr, rc);
  const auto r0 = check_drift(pr, traj.theta, rc.eta, 0, rc.M);
  EXPECT_EQ(r0.measured_max, 0.0);
  EXPECT_EQ(r0.bound, 0.0);
  EXPECT_TRUE(r0.ok());
  rc.eta = 0.0;
  const auto frozen = run_probe(pr, rc);
  const auto rf = check_drift(pr, frozen.theta, 0.0, 2, rc.M);
  EXPECT_EQ(rf.measured_max, 0.0);
  EXPECT_TRUE(rf.ok());
  EXPECT_THROW(check_drift(pr, std::vector<Vec>(2, Vec::Zero(4)), 0.1, 2, 1.0), std::invalid_argument);
}

TEST(StalenessDrift, HoldsWithMarginOnProbeRun) {
  const auto pr = make_problem({}, 1);
  ProbeRunConfig rc;
  rc.eta = 1.0 / estimate_constants(pr).L();
  rc.steps = 2000;
  rc.theta0 = Vec::Constant(4, 3.0);
  const auto traj = run_probe(pr, rc);
  const auto r = check_drift(pr, traj.theta, rc.eta, 1, rc.M);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_LT(r.max_ratio, 1.0);
  EXPECT_GT(r.max_ratio, 0.0);
}

TEST(Smoothness, SmoothnessCases) {
  auto pr = make_problem({}, 1);
  const Vec t = Vec::Constant(4, 0.7);
  EXPECT_EQ((grad_D(pr, t) - grad_D(pr, t)).norm(), 0.0);
  EXPECT_TRUE(check_smoothness(pr, 2000, 4).ok());
  pr.B.setZero();
  const auto r = check_smoothness(pr, 500, 4);
  EXPECT_TRUE(r.ok());
  // L collapses to L_thth and A-differences attain it up to direction.
  EXPECT_LE(r.max_ratio, 1.0 + 1e-12);
}

TEST(GradientGap, ExactAdversaryWithoutStalenessHasNoGap) {
  const auto pr = make_problem({}, 1);
  ProbeRunConfig rc;
  rc.tau = 0;
  rc.exact_adversary = true;
  rc.steps = 100;
  rc.theta0 = Vec::Constant(4, 3.0);
  const auto traj = run_probe(pr, rc);
  for (double v : traj.gap_lhs) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(check_gradient_gap(pr, traj).ok());
}

TEST(GradientGap, ZeroLambdaBoundIsStalenessTerm) {
  const auto pr = make_problem({}, 1);
  ProbeRunConfig rc;
  rc.tau = 2;
  rc.exact_adversary = true;
  rc.eta = 0.1;
  rc.M = 10.0;
  rc.steps = 300;
  rc.theta0 = Vec::Constant(4, 3.0);
  const auto traj = run_probe(pr, rc);
  const auto r = check_gradient_gap(pr, traj);
  const auto c = estimate_constants(pr);
  EXPECT_NEAR(r.bound, 0.5 * c.L_thx * (0.1 * 2 * 10.0 * c.L_xth / c.mu), 1e-12);
  EXPECT_TRUE(r.ok());
}

TEST(GradientGap, PgdAdversaryWithStaleness) {
  const auto pr = make_problem({}, 1);
  ProbeRunConfig rc;
  rc.tau = 1;
  rc.eta = 1.0 / estimate_constants(pr).L();
  rc.steps = 2000;
  rc.theta0 = Vec::Constant(4, 3.0);
  const auto r = check_gradient_gap(pr, run_probe(pr, rc));
  EXPECT_TRUE(r.ok());
  EXPECT_GT(r.detail["lambda_max"].get<double>(), 0.0);
}

TEST(Convergence, ExactAdversaryWithoutStalenessHasNoFloor) {
  const auto pr = make_problem({}, 1);
  ConvergenceConfig c;
  c.horizons = {100, 400};
  c.taus = {0};
  c.repetitions = 3;
  c.theta0 = Vec::Constant(4, 3.0);
  c.alpha = 1.0;  // one PGD step of size 1/mu lands on the maximizer in the interior
  c.floor_steps = 200;
  c.floor_burn_in = 100;
  c.sigma_samples = 100;
  const auto r = check_convergence(pr, c);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_GT(r.rows[0].mean, r.rows[1].mean);
  EXPECT_LT(r.rows[1].floor_term, r.rows[1].rate_term);
}

TEST(Convergence, SlopeFit) {
  EXPECT_NEAR(loglog_slope({1, 10, 100}, {1, 0.1, 0.01}), -1.0, 1e-12);
  EXPECT_THROW(loglog_slope({1}, {1}), std::invalid_argument);
}

TEST(ProbeReportTest, JsonAndTable) {
  ProbeReport rep;
  CheckResult c;
  c.name = "demo";
  c.observe(1.0, 2.0);
  c.observe(3.0, 2.0);
  c.finish();
  rep.checks.push_back(c);
  EXPECT_FALSE(rep.ok());
  EXPECT_EQ(rep.to_json()["checks"][0]["violations"], 1);
  EXPECT_NE(rep.summary_table().find("demo"), std::string::npos);
}
