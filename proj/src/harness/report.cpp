// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include "conadv/harness/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "conadv/harness/experiments.hpp"
#include "json.hpp"

namespace conadv::harness {

using nlohmann::json;

namespace {

// Throws on anything but a complete metrics file.
RunRow parse_metrics(const std::string& path, std::istream& in) {
  RunRow r;
  r.file = path;
  std::string line;
  bool head = false, final = false;
  double step_ms = 0.0;
  std::size_t n_steps = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    const auto type = j.at("type").get<std::string>();
    if (type == "run") {
      head = true;
      r.protocol = j.at("protocol").get<std::string>();
      r.tau = j.at("tau").get<int>();
      r.workers = j.at("workers").get<std::size_t>();
      r.global_batch = j.at("global_batch").get<std::size_t>();
      r.epsilon = j.at("epsilon").get<double>();
      r.augmentation = j.at("augmentation").get<std::string>();
      r.seed = j.at("init_seed").get<std::uint64_t>();
    } else if (type == "step") {
      step_ms += j.at("t_step_ms").get<double>();
      ++n_steps;
    } else if (type == "final") {
      final = true;
      r.steps = j.at("steps").get<std::size_t>();
      r.test_acc = j.at("test_acc").is_null() ? std::nan("") : j.at("test_acc").get<double>();
    }
  }
  if (!head) throw std::runtime_error("no run header");
  if (!final) throw std::runtime_error("no final record (truncated run?)");
  if (n_steps != r.steps) throw std::runtime_error("step count does not match final record");
  r.mean_step_ms = n_steps ? step_ms / static_cast<double>(n_steps) : 0.0;
  r.images_per_ms = r.mean_step_ms > 0.0 ? static_cast<double>(r.global_batch) / r.mean_step_ms : 0.0;
  return r;
}

std::vector<ProbeRow> parse_probe(const std::string& path, const json& j) {
  std::vector<ProbeRow> rows;
  for (const auto& c : j.at("checks")) {
    rows.push_back({path, c.at("name").get<std::string>(), c.at("evaluations").get<std::size_t>(),
                    c.at("violations").get<std::size_t>(), c.at("max_ratio").get<double>()});
  }
  return rows;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

Report build_report(const std::vector<std::string>& files) {
  Report rep;
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) {
      rep.warnings.push_back(path + ": cannot open");
      continue;
    }
    try {
      std::stringstream ss;
      ss << in.rdbuf();
      const std::string body = ss.str();
      const auto first = body.substr(0, body.find('\n'));
      const auto j = json::parse(first, nullptr, false);
      if (!j.is_discarded() && j.is_object() && j.value("type", "") == "run") {
        std::istringstream lines(body);
        rep.runs.push_back(parse_metrics(path, lines));
      } else {
        const auto whole = json::parse(body);
        if (!whole.is_object() || !whole.contains("checks")) throw std::runtime_error("neither metrics nor probe report");
        auto rows = parse_probe(path, whole);
        rep.probes.insert(rep.probes.end(), rows.begin(), rows.end());
      }
    } catch (const std::exception& e) {
      rep.warnings.push_back(path + ": skipped, " + e.what());
    }
  }
  if (rep.runs.empty() && rep.probes.empty()) {
    throw std::runtime_error("no usable metrics or probe files among " + std::to_string(files.size()));
  }

  using Key = std::tuple<std::size_t, std::string, double, std::string>;
  std::map<Key, std::vector<const RunRow*>> groups;
  for (const auto& r : rep.runs) groups[{r.global_batch, r.protocol, r.epsilon, r.augmentation}].push_back(&r);
  for (const auto& [key, members] : groups) {
    GroupRow g;
    std::tie(g.global_batch, g.protocol, g.epsilon, g.augmentation) = key;
    std::vector<double> acc;
    double ipm = 0.0;
    for (const auto* r : members) {
      acc.push_back(r->test_acc);
      ipm += r->images_per_ms;
    }
    const auto ms = mean_sd(acc);
    g.runs = members.size();
    g.acc_mean = ms.mean;
    g.acc_sd = ms.sd;
    g.images_per_ms = ipm / static_cast<double>(members.size());
    rep.groups.push_back(g);
  }
  return rep;
}

std::string Report::text() const {
  std::ostringstream o;
  if (!groups.empty()) {
    o << "Accuracy and throughput by batch size\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%8s  %-8s %9s  %-9s %5s  %-19s %12s\n", "batch", "protocol", "epsilon", "augment",
                  "runs", "test_acc mean +- sd", "images/ms");
    o << buf;
    for (const auto& g : groups) {
      std::snprintf(buf, sizeof buf, "%8zu  %-8s %9.5f  %-9s %5zu  %8.4f +- %-7.4f %12.3f\n", g.global_batch,
                    g.protocol.c_str(), g.epsilon, g.augmentation.c_str(), g.runs, g.acc_mean, g.acc_sd,
                    g.images_per_ms);
      o << buf;
    }
  }
  if (!probes.empty()) {
    o << (groups.empty() ? "" : "\n") << "Bound checks\n";
    for (const auto& p : probes) {
      o << "  " << p.check << ": " << p.violations << " violations / " << p.evaluations
        << " evaluations, max measured/bound " << fmt("%.4g", p.max_ratio) << "  (" << p.file << ")\n";
    }
  }
  o << "\n" << warnings.size() << " file(s) skipped\n";
  for (const auto& w : warnings) o << "  warning: " << w << "\n";
  return o.str();
}

std::string Report::runs_csv() const {
  std::string s = "file,protocol,tau,workers,global_batch,epsilon,augmentation,seed,steps,test_acc,mean_step_ms,images_per_ms\n";
  for (const auto& r : runs) {
    s += r.file + "," + r.protocol + "," + std::to_string(r.tau) + "," + std::to_string(r.workers) + "," +
         std::to_string(r.global_batch) + "," + fmt("%.17g", r.epsilon) + "," + r.augmentation + "," +
         std::to_string(r.seed) + "," + std::to_string(r.steps) + "," + fmt("%.17g", r.test_acc) + "," +
         fmt("%.17g", r.mean_step_ms) + "," + fmt("%.17g", r.images_per_ms) + "\n";
  }
  return s;
}

std::string Report::groups_csv() const {
  std::string s = "global_batch,protocol,epsilon,augmentation,runs,acc_mean,acc_sd,images_per_ms\n";
  for (const auto& g : groups) {
    s += std::to_string(g.global_batch) + "," + g.protocol + "," + fmt("%.17g", g.epsilon) + "," + g.augmentation +
         "," + std::to_string(g.runs) + "," + fmt("%.17g", g.acc_mean) + "," + fmt("%.17g", g.acc_sd) + "," +
         fmt("%.17g", g.images_per_ms) + "\n";
  }
  return s;
}

std::string Report::probes_csv() const {
  std::string s = "file,check,evaluations,violations,max_ratio\n";
  for (const auto& p : probes) {
    s += p.file + "," + p.check + "," + std::to_string(p.evaluations) + "," + std::to_string(p.violations) + "," +
         fmt("%.17g", p.max_ratio) + "\n";
  }
  return s;
}

Report emit_report(const std::vector<std::string>& files, const std::string& out_dir) {
  auto rep = build_report(files);
  std::filesystem::create_directories(out_dir);
  auto write = [&](const char* name, const std::string& body) {
    const auto path = std::filesystem::path(out_dir) / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << body;
  };
  write("report.txt", rep.text());
  write("runs.csv", rep.runs_csv());
  write("summary.csv", rep.groups_csv());
  write("probes.csv", rep.probes_csv());
  return rep;
}

}  // namespace conadv::harness
