// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include "conadv/theory/probe.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "conadv/common/rng.hpp"

namespace conadv::theory {

namespace {

// Bounds are compared with a relative slack of a few ulps so that an exact
// equality evaluated in floating point does not count as a violation.
constexpr double kSlack = 1e-12;

Vec default_theta0(const QuadraticMinMax& pr, const Vec& theta0) {
  return theta0.size() ? theta0 : Vec::Zero(static_cast<Eigen::Index>(pr.p()));
}

std::vector<std::size_t> draw_batch(const QuadraticMinMax& pr, std::uint64_t seed, std::uint64_t step,
                                    std::size_t m) {
  std::mt19937_64 rng(mix_seed({seed, 0xba7c, step}));
  std::uniform_int_distribution<std::size_t> pick(0, pr.n() - 1);
  std::vector<std::size_t> idx(m);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

}  // namespace

nlohmann::json LipschitzConstants::to_json() const {
  return {{"L_thth", L_thth}, {"L_xth", L_xth},   {"L_thx", L_thx},     {"L_xx", L_xx},
          {"mu", mu},         {"L", L()},         {"provenance", exact ? "exact" : "sampled"},
          {"samples", samples}};
}

LipschitzConstants estimate_constants(const QuadraticMinMax& pr) {
  pr.validate();
  LipschitzConstants c;
  c.L_thth = spectral_norm(pr.A);
  c.L_xth = c.L_thx = spectral_norm(pr.B);
  c.L_xx = c.mu = pr.mu;
  c.exact = true;
  return c;
}

LipschitzConstants estimate_constants(const model::Model& net, const model::Dataset& data, std::size_t pairs,
                                      std::uint64_t seed, double radius) {
  if (data.size() == 0) throw std::invalid_argument("constant estimation needs data");
  LipschitzConstants c;
  c.exact = false;
  c.samples = pairs;
  c.mu = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);

  auto flat = [](const model::GradientSet& g) {
    std::vector<double> v;
    for (const auto& t : g) v.insert(v.end(), t.values().begin(), t.values().end());
    return v;
  };
  auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  auto theta_grad = [](const model::Model& m, const model::LabeledBatch& b) {
    auto copy = m;
    return model::clean_loss_and_grads(copy, b, model::BnMode::Frozen).grads;
  };
  auto x_grad = [](const model::Model& m, const model::LabeledBatch& b) {
    return model::input_gradient(m, b, model::BnBranch::Main).data();
  };

  for (std::size_t s = 0; s < pairs; ++s) {
    const std::size_t i = pick(rng);
    const std::size_t idx[1] = {i};
    const auto x1 = data.batch(idx);
    auto x2 = x1;
    double dx = 0.0;
    for (auto& v : x2.inputs.values()) {
      const double d = radius * normal(rng);
      v += d;
      dx += d * d;
    }
    dx = std::sqrt(dx);

    auto net2 = net;
    double dth = 0.0;
    for (auto& p : net2.params.tensors) {
      std::vector<double> u(p.tensor.size());
      double un = 0.0;
      for (auto& v : u) {
        v = normal(rng);
        un += v * v;
      }
      un = std::sqrt(un);
      const double wn = ad::l2_norm(p.tensor.values());
      const double scale = radius * (wn > 0.0 ? wn : 1.0) / un;
      auto w = p.tensor.values();
      for (std::size_t j = 0; j < w.size(); ++j) {
        w[j] += scale * u[j];
        dth += scale * u[j] * scale * u[j];
      }
    }
    dth = std::sqrt(dth);

    const auto gt_11 = flat(theta_grad(net, x1));
    const auto gt_21 = flat(theta_grad(net2, x1));
    const auto gt_12 = flat(theta_grad(net, x2));
    const auto gx_11 = x_grad(net, x1);
    const auto gx_21 = x_grad(net2, x1);
    const auto gx_12 = x_grad(net, x2);

    c.L_thth = std::max(c.L_thth, dist(gt_21, gt_11) / dth);
    c.L_xth = std::max(c.L_xth, dist(gx_21, gx_11) / dth);
    c.L_thx = std::max(c.L_thx, dist(gt_12, gt_11) / dx);
    c.L_xx = std::max(c.L_xx, dist(gx_12, gx_11) / dx);
    double inner = 0.0;
    auto xv1 = x1.inputs.values();
    auto xv2 = x2.inputs.values();
    for (std::size_t j = 0; j < gx_11.size(); ++j) inner += (gx_12[j] - gx_11[j]) * (xv2[j] - xv1[j]);
    c.mu = std::min(c.mu, -inner / (dx * dx));
  }
  return c;
}

void CheckResult::observe(double lhs, double rhs) {
  ++evaluations;
  measured_max = std::max(measured_max, lhs);
  bound = std::max(bound, rhs);
  if (lhs > rhs + kSlack * std::max(std::abs(lhs), std::abs(rhs))) ++violations;
  if (rhs > 0.0) {
    const double r = lhs / rhs;
    max_ratio = std::max(max_ratio, r);
    ratio_sum_ += r;
    ++ratio_count_;
  }
}

void CheckResult::finish() { mean_ratio = ratio_count_ ? ratio_sum_ / static_cast<double>(ratio_count_) : 0.0; }

nlohmann::json CheckResult::to_json() const {
  return {{"name", name},
          {"bound", bound},
          {"measured_max", measured_max},
          {"max_ratio", max_ratio},
          {"mean_ratio", mean_ratio},
          {"evaluations", evaluations},
          {"violations", violations},
          {"detail", detail}};
}

bool ProbeReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.ok(); });
}

nlohmann::json ProbeReport::to_json() const {
  nlohmann::json j = {{"context", context}, {"checks", nlohmann::json::array()}, {"ok", ok()}};
  for (const auto& c : checks) j["checks"].push_back(c.to_json());
  return j;
}

std::string ProbeReport::summary_table() const {
  std::ostringstream os;
  os << std::left << std::setw(28) << "check" << std::right << std::setw(14) << "bound" << std::setw(14)
     << "measured max" << std::setw(11) << "max ratio" << std::setw(12) << "evals" << std::setw(11) << "violations"
     << '\n';
  for (const auto& c : checks) {
    os << std::left << std::setw(28) << c.name << std::right << std::scientific << std::setprecision(4)
       << std::setw(14) << c.bound << std::setw(14) << c.measured_max << std::fixed << std::setprecision(4)
       << std::setw(11) << c.max_ratio << std::setw(12) << c.evaluations << std::setw(11) << c.violations << '\n';
  }
  return os.str();
}

ProbeTrajectory run_probe(const QuadraticMinMax& pr, const ProbeRunConfig& cfg) {
  pr.validate();
  if (cfg.tau < 0) throw std::invalid_argument("staleness must be >= 0");
  if (cfg.batch == 0 || pr.n() == 0) throw std::invalid_argument("probe needs anchors and a positive batch");
  if (!(cfg.M > 0.0)) throw std::invalid_argument("clipping level M must be > 0");

  struct Pending {
    std::uint64_t target;
    std::vector<std::size_t> idx;
    std::vector<Vec> x_hat;
    double lambda;
  };
  auto produce = [&](std::uint64_t target, const Vec& theta_gen) {
    Pending p{target, draw_batch(pr, cfg.seed, target, cfg.batch), {}, -std::numeric_limits<double>::infinity()};
    for (std::size_t s = 0; s < p.idx.size(); ++s) {
      const Vec& a = pr.anchors[p.idx[s]];
      const Vec xs = inner_argmax_analytic(pr, theta_gen, a);
      Vec xh;
      if (cfg.exact_adversary) {
        xh = xs;
      } else {
        std::mt19937_64 rng(mix_seed({cfg.seed, 0xa77a, target, s}));
        xh = pgd_step(pr, theta_gen, a, cfg.alpha, cfg.random_init ? &rng : nullptr);
      }
      p.lambda = std::max(p.lambda, measure_lambda(pr, theta_gen, xh, xs, a));
      p.x_hat.push_back(std::move(xh));
    }
    return p;
  };

  ProbeTrajectory out;
  out.eta = cfg.eta;
  out.M = cfg.M;
  out.tau = cfg.tau;
  Vec theta = default_theta0(pr, cfg.theta0);
  out.theta.reserve(cfg.steps + 1);
  out.theta.push_back(theta);
  const auto tau = static_cast<std::uint64_t>(cfg.tau);
  std::deque<Pending> buffer;
  for (std::uint64_t j = 0; j < tau; ++j) buffer.push_back(produce(j, theta));

  double lambda_run = -std::numeric_limits<double>::infinity();
  const double half_m = 0.5 / static_cast<double>(cfg.batch);
  for (std::uint64_t t = 0; t < cfg.steps; ++t) {
    if (tau == 0) buffer.push_back(produce(t, theta));
    Pending cur = std::move(buffer.front());
    buffer.pop_front();
    if (cur.target != t) throw std::logic_error("probe buffer out of order");
    lambda_run = std::max(lambda_run, cur.lambda);

    Vec exact_sum = Vec::Zero(static_cast<Eigen::Index>(pr.q()));
    Vec stale_sum = exact_sum;
    for (std::size_t s = 0; s < cur.idx.size(); ++s) {
      const Vec& a = pr.anchors[cur.idx[s]];
      exact_sum += inner_argmax_analytic(pr, theta, a) + a;
      stale_sum += cur.x_hat[s] + a;
    }
    const Vec base = pr.A * theta + pr.b;
    const Vec g = base + pr.B * exact_sum * half_m;
    Vec g_hat = base + pr.B * stale_sum * half_m;
    out.gap_lhs.push_back((g - g_hat).norm());
    out.lambda_running.push_back(lambda_run);
    if (cfg.record_grad_D) out.grad_D_sq.push_back(grad_D(pr, theta).squaredNorm());

    if (tau > 0) buffer.push_back(produce(t + tau, theta));
    const double gn = g_hat.norm();
    if (gn > cfg.M) {
      g_hat *= cfg.M / gn;
      ++out.clipped;
    }
    theta = theta - cfg.eta * g_hat;
    out.theta.push_back(theta);
  }
  return out;
}

CheckResult check_drift(const QuadraticMinMax& pr, const std::vector<Vec>& theta, double eta, int tau, double M) {
  if (tau < 0) throw std::invalid_argument("staleness must be >= 0");
  if (theta.size() <= static_cast<std::size_t>(tau)) {
    throw std::invalid_argument("trajectory of " + std::to_string(theta.size()) + " points is shorter than tau = " +
                                std::to_string(tau));
  }
  const auto c = estimate_constants(pr);
  const double k = c.L_xth / c.mu;
  const double bound = k * eta * static_cast<double>(tau) * M;
  CheckResult r;
  r.name = "drift_tau" + std::to_string(tau);
  std::size_t intermediate_violations = 0;
  double intermediate_max_ratio = 0.0;
  const auto ut = static_cast<std::size_t>(tau);
  for (std::size_t t = ut; t < theta.size(); ++t) {
    const double mid = k * (theta[t] - theta[t - ut]).norm();
    for (const auto& a : pr.anchors) {
      const double lhs = (inner_argmax_analytic(pr, theta[t], a) - inner_argmax_analytic(pr, theta[t - ut], a)).norm();
      if (lhs > mid + kSlack * std::max(lhs, mid)) ++intermediate_violations;
      if (mid > 0.0) intermediate_max_ratio = std::max(intermediate_max_ratio, lhs / mid);
      r.observe(lhs, bound);
    }
    if (mid > bound + kSlack * std::max(mid, bound)) ++intermediate_violations;
  }
  r.violations += intermediate_violations;
  r.finish();
  r.detail = {{"eta", eta},
              {"tau", tau},
              {"M", M},
              {"intermediate_violations", intermediate_violations},
              {"intermediate_max_ratio", intermediate_max_ratio}};
  return r;
}

CheckResult check_smoothness(const QuadraticMinMax& pr, std::size_t pairs, std::uint64_t seed) {
  const auto c = estimate_constants(pr);
  const double L = c.L();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scales[] = {0.1, 1.0, 5.0};
  const double gaps[] = {1e-3, 0.1, 1.0, 5.0};
  CheckResult r;
  r.name = "smoothness";
  const auto p = static_cast<Eigen::Index>(pr.p());
  for (std::size_t s = 0; s < pairs; ++s) {
    Vec t1(p), d(p);
    for (Eigen::Index i = 0; i < p; ++i) {
      t1(i) = scales[s % 3] * normal(rng);
      d(i) = gaps[(s / 3) % 4] * normal(rng);
    }
    const Vec t2 = t1 + d;
    r.observe((grad_D(pr, t1) - grad_D(pr, t2)).norm(), L * (t1 - t2).norm());
  }
  r.finish();
  r.detail = {{"L", L}, {"pairs", pairs}};
  return r;
}

CheckResult check_gradient_gap(const QuadraticMinMax& pr, const ProbeTrajectory& traj) {
  const auto c = estimate_constants(pr);
  const double stale = traj.eta * traj.tau * traj.M * c.L_xth / c.mu;
  CheckResult r;
  r.name = "gradient_gap_tau" + std::to_string(traj.tau);
  double lambda_max = 0.0;
  for (std::size_t t = 0; t < traj.gap_lhs.size(); ++t) {
    const double lambda = std::max(0.0, traj.lambda_running[t]);
    lambda_max = std::max(lambda_max, lambda);
    r.observe(traj.gap_lhs[t], 0.5 * c.L_thx * (stale + std::sqrt(lambda / c.mu)));
  }
  r.finish();
  r.detail = {{"eta", traj.eta}, {"tau", traj.tau}, {"M", traj.M}, {"lambda_max", lambda_max},
              {"clipped_steps", traj.clipped}};
  return r;
}

double estimate_sigma(const QuadraticMinMax& pr, std::size_t batch, const Vec& center, double radius,
                      std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto p = static_cast<Eigen::Index>(pr.p());
  double worst = 0.0;
  std::vector<Vec> h(pr.n());
  for (std::size_t s = 0; s <= samples; ++s) {
    Vec theta = center;
    if (s > 0) {
      Vec dir(p);
      for (Eigen::Index i = 0; i < p; ++i) dir(i) = normal(rng);
      theta += dir.normalized() * radius * std::pow(u(rng), 1.0 / static_cast<double>(p));
    }
    Vec mean = Vec::Zero(p);
    for (std::size_t i = 0; i < pr.n(); ++i) {
      const Vec& a = pr.anchors[i];
      h[i] = pr.A * theta + pr.b + 0.5 * pr.B * (inner_argmax_analytic(pr, theta, a) + a);
      mean += h[i];
    }
    mean /= static_cast<double>(pr.n());
    double var = 0.0;
    for (const auto& hi : h) var += (hi - mean).squaredNorm();
    worst = std::max(worst, var / static_cast<double>(pr.n()));
  }
  return std::sqrt(worst / static_cast<double>(batch));
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

ConvergenceResult check_convergence(const QuadraticMinMax& pr, const ConvergenceConfig& cfg) {
  const auto c = estimate_constants(pr);
  ConvergenceResult res;
  res.L = c.L();
  const Vec theta0 = default_theta0(pr, cfg.theta0);
  Vec theta_star;
  const double min_val = min_loss_D(pr, theta0, &theta_star);
  res.delta = loss_D(pr, theta0) - min_val;
  const double radius = cfg.sigma_radius > 0.0 ? cfg.sigma_radius : (theta0 - theta_star).norm() + 1.0;
  res.sigma = estimate_sigma(pr, cfg.batch, theta_star, radius, cfg.sigma_samples, mix_seed({cfg.seed, 0x5167}));

  for (int tau : cfg.taus) {
    std::vector<double> Ts, means;
    for (std::size_t T : cfg.horizons) {
      ConvergenceRow row;
      row.tau = tau;
      row.T = T;
      row.eta = std::min(1.0 / res.L, std::sqrt(res.delta / (res.L * res.sigma * res.sigma * static_cast<double>(T))));
      std::vector<double> v;
      for (std::size_t r = 0; r < cfg.repetitions; ++r) {
        ProbeRunConfig rc;
        rc.eta = row.eta;
        rc.M = cfg.M;
        rc.tau = tau;
        rc.steps = T;
        rc.batch = cfg.batch;
        rc.alpha = cfg.alpha;
        rc.seed = mix_seed({cfg.seed, static_cast<std::uint64_t>(tau), T, r});
        rc.theta0 = theta0;
        rc.record_grad_D = true;
        const auto traj = run_probe(pr, rc);
        double s = 0.0;
        for (double g : traj.grad_D_sq) s += g;
        v.push_back(s / static_cast<double>(T));
        row.lambda = std::max(row.lambda, traj.lambda_running.back());
        row.clipped += traj.clipped;
      }
      for (double x : v) row.mean += x;
      row.mean /= static_cast<double>(v.size());
      for (double x : v) row.sd += (x - row.mean) * (x - row.mean);
      row.sd = std::sqrt(row.sd / static_cast<double>(std::max<std::size_t>(v.size() - 1, 1)));
      row.rate_term = 2.0 * res.sigma * std::sqrt(res.L * res.delta / static_cast<double>(T));
      const double inner = tau * cfg.M * c.L_xth / (res.L * c.mu) + std::sqrt(std::max(0.0, row.lambda) / c.mu);
      row.floor_term = 0.5 * c.L_thx * c.L_thx * inner * inner;
      row.bound = row.rate_term + row.floor_term;
      if (row.mean > row.bound) ++res.violations;
      Ts.push_back(static_cast<double>(T));
      means.push_back(row.mean);
      res.rows.push_back(row);
    }
    res.slope[tau] = loglog_slope(Ts, means);
  }
  res.slope_in_range = !res.slope.empty() && std::all_of(res.slope.begin(), res.slope.end(), [](const auto& kv) {
    return kv.second >= -0.7 && kv.second <= -0.3;
  });

  for (int tau : cfg.taus) {
    double total = 0.0;
    for (std::size_t r = 0; r < cfg.repetitions; ++r) {
      ProbeRunConfig rc;
      rc.eta = cfg.floor_eta_scale / res.L;
      rc.M = cfg.M;
      rc.tau = tau;
      rc.steps = cfg.floor_steps;
      rc.batch = cfg.batch;
      rc.alpha = cfg.alpha;
      rc.seed = mix_seed({cfg.seed, 0xf1004, r});
      rc.theta0 = theta0;
      rc.record_grad_D = true;
      const auto traj = run_probe(pr, rc);
      double s = 0.0;
      for (std::size_t t = cfg.floor_burn_in; t < traj.grad_D_sq.size(); ++t) s += traj.grad_D_sq[t];
      total += s / static_cast<double>(traj.grad_D_sq.size() - cfg.floor_burn_in);
    }
    res.floor[tau] = total / static_cast<double>(cfg.repetitions);
  }
  res.floor_increasing = true;
  for (std::size_t i = 1; i < cfg.taus.size(); ++i) {
    if (!(res.floor[cfg.taus[i]] > res.floor[cfg.taus[i - 1]])) res.floor_increasing = false;
  }
  return res;
}

nlohmann::json ConvergenceResult::to_json() const {
  nlohmann::json j = {{"sigma", sigma},
                      {"delta", delta},
                      {"L", L},
                      {"violations", violations},
                      {"slope_in_range", slope_in_range},
                      {"floor_increasing", floor_increasing},
                      {"rows", nlohmann::json::array()},
                      {"slope", nlohmann::json::object()},
                      {"floor", nlohmann::json::object()}};
  for (const auto& r : rows) {
    j["rows"].push_back({{"tau", r.tau},
                         {"T", r.T},
                         {"eta", r.eta},
                         {"mean_sq_grad", r.mean},
                         {"sd", r.sd},
                         {"lambda", r.lambda},
                         {"rate_term", r.rate_term},
                         {"floor_term", r.floor_term},
                         {"bound", r.bound},
                         {"clipped_steps", r.clipped}});
  }
  for (const auto& [tau, s] : slope) j["slope"][std::to_string(tau)] = s;
  for (const auto& [tau, f] : floor) j["floor"][std::to_string(tau)] = f;
  return j;
}

ProbeReport certify(const CertifyConfig& cfg) {
  const auto pr = make_problem(cfg.problem, cfg.problem_seed);
  const auto c = estimate_constants(pr);
  const Vec theta0 = Vec::Constant(static_cast<Eigen::Index>(pr.p()), cfg.theta0_value);
  ProbeReport rep;
  rep.context = {{"problem_seed", cfg.problem_seed}, {"p", pr.p()},         {"q", pr.q()},
                 {"n", pr.n()},                      {"mu", pr.mu},          {"epsilon", pr.epsilon},
                 {"constants", c.to_json()},          {"L", c.L()},           {"eta", 1.0 / c.L()},
                 {"M", cfg.M},                        {"steps", cfg.steps},   {"theta0", cfg.theta0_value}};

  ProbeRunConfig rc;
  rc.eta = 1.0 / c.L();
  rc.M = cfg.M;
  rc.steps = cfg.steps;
  rc.alpha = cfg.alpha;
  rc.theta0 = theta0;
  std::size_t clipped = 0;
  for (int tau : cfg.taus) {
    rc.tau = tau;
    rc.seed = mix_seed({cfg.seed, 0x1e1, static_cast<std::uint64_t>(tau)});
    const auto traj = run_probe(pr, rc);
    clipped += traj.clipped;
    auto r = check_drift(pr, traj.theta, rc.eta, tau, cfg.M);
    r.name = "drift_tau" + std::to_string(tau);
    rep.checks.push_back(r);
  }

  auto smooth = check_smoothness(pr, cfg.pairs, mix_seed({cfg.seed, 0x1e2}));
  smooth.name = "smoothness";
  rep.checks.push_back(smooth);

  rc.tau = 1;
  rc.seed = mix_seed({cfg.seed, 0x1e3});
  const auto traj = run_probe(pr, rc);
  clipped += traj.clipped;
  auto gap = check_gradient_gap(pr, traj);
  gap.name = "gradient_gap_tau1_pgd";
  rep.checks.push_back(gap);
  rep.context["clipped_steps"] = clipped;

  if (cfg.convergence) {
    auto tc = cfg.convergence_config;
    tc.theta0 = theta0;
    tc.M = cfg.M;
    const auto t1 = check_convergence(pr, tc);
    CheckResult bound;
    bound.name = "convergence_bound";
    for (const auto& row : t1.rows) bound.observe(row.mean, row.bound);
    bound.finish();
    bound.detail = t1.to_json();
    rep.checks.push_back(bound);

    CheckResult slope;
    slope.name = "convergence_slope";
    slope.evaluations = t1.slope.size();
    slope.measured_max = -std::numeric_limits<double>::infinity();
    for (const auto& [tau, s] : t1.slope) {
      if (s < -0.7 || s > -0.3) ++slope.violations;
      slope.measured_max = std::max(slope.measured_max, s);
      slope.detail["tau" + std::to_string(tau)] = s;
    }
    slope.bound = -0.3;
    rep.checks.push_back(slope);

    CheckResult floor;
    floor.name = "convergence_floor_order";
    floor.evaluations = t1.floor.size() > 1 ? t1.floor.size() - 1 : 0;
    floor.violations = t1.floor_increasing ? 0 : 1;
    for (const auto& [tau, f] : t1.floor) floor.detail["tau" + std::to_string(tau)] = f;
    rep.checks.push_back(floor);
  }
  return rep;
}

}  // namespace conadv::theory
