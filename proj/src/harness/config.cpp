// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0

#include "conadv/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace conadv::harness {

using dist::TrainConfig;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& what) {
  throw ConfigError(key + ": cannot use '" + value + "', expected " + what);
}

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad(key, v, "a number");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad(key, v, "a non-negative integer");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad(key, v, "an integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(key, v, "true or false");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <class T>
T pick(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, T>> options) {
  std::string names;
  for (const auto& [name, val] : options) {
    if (v == name) return val;
    names += names.empty() ? name : std::string(" | ") + name;
  }
  bad(key, v, names);
}

struct Field {
  ConfigKey key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

const std::vector<Field>& fields() {
  using dist::Augmentation;
  using dist::ExecMode;
  using dist::Protocol;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto add = [&](std::string name, std::string help, auto get, auto set) {
      f.push_back({{std::move(name), std::move(help)}, get, set});
    };
    add("protocol", "vanilla | disadv | conadv", [](const TrainConfig& c) { return dist::protocol_name(c.protocol); },
        [](TrainConfig& c, const std::string& v) {
          c.protocol = pick<Protocol>("protocol", v,
                                      {{"vanilla", Protocol::Vanilla}, {"disadv", Protocol::DisAdv}, {"conadv", Protocol::ConAdv}});
        });
    add("tau", "staleness in steps (conadv)", [](const TrainConfig& c) { return std::to_string(c.tau); },
        [](TrainConfig& c, const std::string& v) { c.tau = to_int("tau", v); });
    add("exec", "sequential | overlap",
        [](const TrainConfig& c) { return std::string(c.exec == ExecMode::Overlap ? "overlap" : "sequential"); },
        [](TrainConfig& c, const std::string& v) {
          c.exec = pick<ExecMode>("exec", v, {{"sequential", ExecMode::Sequential}, {"overlap", ExecMode::Overlap}});
        });
    add("workers", "simulated workers K", [](const TrainConfig& c) { return std::to_string(c.workers); },
        [](TrainConfig& c, const std::string& v) { c.workers = to_int("workers", v); });
    add("global_batch", "examples per step over all workers",
        [](const TrainConfig& c) { return std::to_string(c.global_batch); },
        [](TrainConfig& c, const std::string& v) { c.global_batch = to_u64("global_batch", v); });
    add("epochs", "training epochs", [](const TrainConfig& c) { return std::to_string(c.epochs); },
        [](TrainConfig& c, const std::string& v) { c.epochs = to_u64("epochs", v); });
    add("max_steps", "step budget, 0 for epochs x steps per epoch",
        [](const TrainConfig& c) { return std::to_string(c.max_steps); },
        [](TrainConfig& c, const std::string& v) { c.max_steps = to_u64("max_steps", v); });
    add("model", "mlp | cnn | linear", [](const TrainConfig& c) { return c.model_preset; },
        [](TrainConfig& c, const std::string& v) {
          if (v != "mlp" && v != "cnn" && v != "linear") bad("model", v, "mlp | cnn | linear");
          c.model_preset = v;
        });
    add("hidden", "comma-separated widths or channels, empty for preset defaults",
        [](const TrainConfig& c) {
          std::string s;
          for (auto h : c.hidden) s += (s.empty() ? "" : ",") + std::to_string(h);
          return s;
        },
        [](TrainConfig& c, const std::string& v) {
          c.hidden.clear();
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) c.hidden.push_back(to_u64("hidden", trim(item)));
        });
    add("bn_mode", "batch | frozen",
        [](const TrainConfig& c) { return std::string(c.bn_mode == model::BnMode::Frozen ? "frozen" : "batch"); },
        [](TrainConfig& c, const std::string& v) {
          c.bn_mode = pick<model::BnMode>("bn_mode", v, {{"batch", model::BnMode::Batch}, {"frozen", model::BnMode::Frozen}});
        });
    add("bn_momentum", "running-statistics momentum", [](const TrainConfig& c) { return fmt(c.bn_momentum); },
        [](TrainConfig& c, const std::string& v) { c.bn_momentum = to_double("bn_momentum", v); });
    add("bn_eps", "normalization epsilon", [](const TrainConfig& c) { return fmt(c.bn_eps); },
        [](TrainConfig& c, const std::string& v) { c.bn_eps = to_double("bn_eps", v); });
    add("parallel_branches", "run clean and adversarial passes on two threads",
        [](const TrainConfig& c) { return fmt_bool(c.parallel_branches); },
        [](TrainConfig& c, const std::string& v) { c.parallel_branches = to_bool("parallel_branches", v); });
    add("optimizer", "lars | sgd", [](const TrainConfig& c) { return optim::optimizer_name(c.optimizer); },
        [](TrainConfig& c, const std::string& v) {
          try {
            c.optimizer = optim::parse_optimizer(v);
          } catch (const std::invalid_argument&) {
            bad("optimizer", v, "lars | sgd");
          }
        });
    add("schedule", "warmup-poly | constant", [](const TrainConfig& c) { return optim::schedule_mode_name(c.schedule); },
        [](TrainConfig& c, const std::string& v) {
          try {
            c.schedule = optim::parse_schedule_mode(v);
          } catch (const std::invalid_argument&) {
            bad("schedule", v, "warmup-poly | constant");
          }
        });
    add("base_lr", "learning rate at batch 256", [](const TrainConfig& c) { return fmt(c.base_lr); },
        [](TrainConfig& c, const std::string& v) { c.base_lr = to_double("base_lr", v); });
    add("linear_scaling", "peak rate = base_lr * global_batch / 256",
        [](const TrainConfig& c) { return fmt_bool(c.linear_scaling); },
        [](TrainConfig& c, const std::string& v) { c.linear_scaling = to_bool("linear_scaling", v); });
    add("warmup_epochs", "linear warmup length", [](const TrainConfig& c) { return fmt(c.warmup_epochs); },
        [](TrainConfig& c, const std::string& v) { c.warmup_epochs = to_double("warmup_epochs", v); });
    add("momentum", "optimizer momentum", [](const TrainConfig& c) { return fmt(c.momentum); },
        [](TrainConfig& c, const std::string& v) { c.momentum = to_double("momentum", v); });
    add("weight_decay", "decay on weight tensors", [](const TrainConfig& c) { return fmt(c.weight_decay); },
        [](TrainConfig& c, const std::string& v) { c.weight_decay = to_double("weight_decay", v); });
    add("trust_coef", "LARS trust coefficient", [](const TrainConfig& c) { return fmt(c.trust_coef); },
        [](TrainConfig& c, const std::string& v) { c.trust_coef = to_double("trust_coef", v); });
    add("lars_eps", "LARS denominator guard", [](const TrainConfig& c) { return fmt(c.lars_eps); },
        [](TrainConfig& c, const std::string& v) { c.lars_eps = to_double("lars_eps", v); });
    add("epsilon", "perturbation radius (L-inf)", [](const TrainConfig& c) { return fmt(c.attack.epsilon); },
        [](TrainConfig& c, const std::string& v) { c.attack.epsilon = to_double("epsilon", v); });
    add("alpha", "attack step size", [](const TrainConfig& c) { return fmt(c.attack.alpha); },
        [](TrainConfig& c, const std::string& v) { c.attack.alpha = to_double("alpha", v); });
    add("random_init", "uniform random start inside the ball",
        [](const TrainConfig& c) { return fmt_bool(c.attack.random_init); },
        [](TrainConfig& c, const std::string& v) { c.attack.random_init = to_bool("random_init", v); });
    add("step_mode", "raw | sign",
        [](const TrainConfig& c) {
          return std::string(c.attack.step_mode == adversary::StepMode::SignGradient ? "sign" : "raw");
        },
        [](TrainConfig& c, const std::string& v) {
          c.attack.step_mode = pick<adversary::StepMode>(
              "step_mode", v, {{"raw", adversary::StepMode::RawGradient}, {"sign", adversary::StepMode::SignGradient}});
        });
    add("clamp", "input domain lo,hi or none",
        [](const TrainConfig& c) {
          if (!c.attack.clamp_domain) return std::string("none");
          return fmt(c.attack.clamp_domain->first) + "," + fmt(c.attack.clamp_domain->second);
        },
        [](TrainConfig& c, const std::string& v) {
          if (v == "none") {
            c.attack.clamp_domain.reset();
            return;
          }
          const auto comma = v.find(',');
          if (comma == std::string::npos) bad("clamp", v, "lo,hi or none");
          c.attack.clamp_domain = std::pair{to_double("clamp", trim(v.substr(0, comma))),
                                            to_double("clamp", trim(v.substr(comma + 1)))};
        });
    add("augmentation", "none | flip-crop",
        [](const TrainConfig& c) {
          return std::string(c.augmentation == Augmentation::FlipCrop ? "flip-crop" : "none");
        },
        [](TrainConfig& c, const std::string& v) {
          c.augmentation = pick<Augmentation>("augmentation", v,
                                              {{"none", Augmentation::None}, {"flip-crop", Augmentation::FlipCrop}});
        });
    add("data_seed", "sharding, shuffling and augmentation", [](const TrainConfig& c) { return std::to_string(c.data_seed); },
        [](TrainConfig& c, const std::string& v) { c.data_seed = to_u64("data_seed", v); });
    add("init_seed", "parameter initialization", [](const TrainConfig& c) { return std::to_string(c.init_seed); },
        [](TrainConfig& c, const std::string& v) { c.init_seed = to_u64("init_seed", v); });
    add("attack_seed", "attack random starts", [](const TrainConfig& c) { return std::to_string(c.attack_seed); },
        [](TrainConfig& c, const std::string& v) { c.attack_seed = to_u64("attack_seed", v); });
    add("dataset", "dataset spec, e.g. glyphs:n_train=16384,n_test=2048,seed=1",
        [](const TrainConfig& c) { return c.dataset; }, [](TrainConfig& c, const std::string& v) { c.dataset = v; });
    add("metrics_path", "JSON-lines output, empty to skip", [](const TrainConfig& c) { return c.metrics_path; },
        [](TrainConfig& c, const std::string& v) { c.metrics_path = v; });
    add("eval_each_epoch", "test accuracy after every epoch, not only the last",
        [](const TrainConfig& c) { return fmt_bool(c.eval_each_epoch); },
        [](TrainConfig& c, const std::string& v) { c.eval_each_epoch = to_bool("eval_each_epoch", v); });
    return f;
  }();
  return table;
}

const Field& field(const std::string& key) {
  static const auto index = [] {
    std::map<std::string, const Field*> m;
    for (const auto& f : fields()) m[f.key.name] = &f;
    return m;
  }();
  auto it = index.find(key);
  if (it == index.end()) throw ConfigError("unknown config key '" + key + "'");
  return *it->second;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const auto keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, trim(value));
}

std::string get_setting(const TrainConfig& cfg, const std::string& key) { return field(key).get(cfg); }

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      apply_setting(base, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return base;
}

std::string serialize_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key.name + " = " + f.get(cfg) + "\n";
  return out;
}

TrainConfig load_config_file(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void save_config_file(const std::string& path, const TrainConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path);
  out << serialize_config(cfg);
}

}  // namespace conadv::harness
