#include "setpred/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include "setpred/io.hpp"

namespace setpred {

namespace {

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for " + key + ": " + value);
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    throw ConfigError("config: bad integer value for " + key + ": " + value);
  return out;
}

std::vector<std::size_t> parse_uint_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(static_cast<std::size_t>(parse_uint(key, item)));
  if (out.empty()) throw ConfigError("config: empty list for " + key);
  return out;
}

std::string join_uint_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
  using Setter = std::function<void(RunConfig&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"task", [](RunConfig& c, const std::string& v) { c.task = v; }},
      {"scenario",
       [](RunConfig& c, const std::string& v) {
         c.scenario = static_cast<int>(parse_uint("scenario", v));
       }},
      {"max_card",
       [](RunConfig& c, const std::string& v) {
         c.max_card = static_cast<std::size_t>(parse_uint("max_card", v));
       }},
      {"hidden",
       [](RunConfig& c, const std::string& v) { c.hidden = parse_uint_list("hidden", v); }},
      {"card", [](RunConfig& c, const std::string& v) { c.card = v; }},
      {"lr", [](RunConfig& c, const std::string& v) { c.lr = parse_double("lr", v); }},
      {"momentum",
       [](RunConfig& c, const std::string& v) { c.momentum = parse_double("momentum", v); }},
      {"weight_decay",
       [](RunConfig& c, const std::string& v) {
         c.weight_decay = parse_double("weight_decay", v);
       }},
      {"lr_decay",
       [](RunConfig& c, const std::string& v) { c.lr_decay = parse_double("lr_decay", v); }},
      {"dropout",
       [](RunConfig& c, const std::string& v) { c.dropout = parse_double("dropout", v); }},
      {"epochs",
       [](RunConfig& c, const std::string& v) {
         c.epochs = static_cast<std::size_t>(parse_uint("epochs", v));
       }},
      {"batch",
       [](RunConfig& c, const std::string& v) {
         c.batch = static_cast<std::size_t>(parse_uint("batch", v));
       }},
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_uint("seed", v); }},
      {"checkpoint_every",
       [](RunConfig& c, const std::string& v) {
         c.checkpoint_every = static_cast<std::size_t>(parse_uint("checkpoint_every", v));
       }},
      {"w1", [](RunConfig& c, const std::string& v) { c.w1 = parse_double("w1", v); }},
      {"w2", [](RunConfig& c, const std::string& v) { c.w2 = parse_double("w2", v); }},
      {"lambda_noobj",
       [](RunConfig& c, const std::string& v) {
         c.lambda_noobj = parse_double("lambda_noobj", v);
       }},
      {"w_state",
       [](RunConfig& c, const std::string& v) { c.w_state = parse_double("w_state", v); }},
      {"u", [](RunConfig& c, const std::string& v) { c.u = parse_double("u", v); }},
      {"mode", [](RunConfig& c, const std::string& v) { c.mode = v; }},
      {"iou_thresh",
       [](RunConfig& c, const std::string& v) {
         c.iou_thresh = parse_double("iou_thresh", v);
       }},
      {"n",
       [](RunConfig& c, const std::string& v) {
         c.n = static_cast<std::size_t>(parse_uint("n", v));
       }},
      {"num_labels",
       [](RunConfig& c, const std::string& v) {
         c.num_labels = static_cast<std::size_t>(parse_uint("num_labels", v));
       }},
      {"max_objects",
       [](RunConfig& c, const std::string& v) {
         c.max_objects = static_cast<std::size_t>(parse_uint("max_objects", v));
       }},
      {"min_objects",
       [](RunConfig& c, const std::string& v) {
         c.min_objects = static_cast<std::size_t>(parse_uint("min_objects", v));
       }},
      {"overlap",
       [](RunConfig& c, const std::string& v) { c.overlap = parse_double("overlap", v); }},
      {"order", [](RunConfig& c, const std::string& v) { c.order = v; }},
      {"scene_digits",
       [](RunConfig& c, const std::string& v) {
         c.scene_digits = static_cast<std::size_t>(parse_uint("scene_digits", v));
       }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("config: unknown key: " + key);
  it->second(cfg, value);
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    apply_kv(cfg, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

std::map<std::string, std::string> config_kv(const RunConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["task"] = cfg.task;
  kv["scenario"] = std::to_string(cfg.scenario);
  kv["max_card"] = std::to_string(cfg.max_card);
  kv["hidden"] = join_uint_list(cfg.hidden);
  kv["card"] = cfg.card;
  kv["lr"] = fmt_double(cfg.lr);
  kv["momentum"] = fmt_double(cfg.momentum);
  kv["weight_decay"] = fmt_double(cfg.weight_decay);
  kv["lr_decay"] = fmt_double(cfg.lr_decay);
  kv["dropout"] = fmt_double(cfg.dropout);
  kv["epochs"] = std::to_string(cfg.epochs);
  kv["batch"] = std::to_string(cfg.batch);
  kv["seed"] = std::to_string(cfg.seed);
  kv["checkpoint_every"] = std::to_string(cfg.checkpoint_every);
  kv["w1"] = fmt_double(cfg.w1);
  kv["w2"] = fmt_double(cfg.w2);
  kv["lambda_noobj"] = fmt_double(cfg.lambda_noobj);
  kv["w_state"] = fmt_double(cfg.w_state);
  kv["u"] = fmt_double(cfg.u);
  kv["mode"] = cfg.mode;
  kv["iou_thresh"] = fmt_double(cfg.iou_thresh);
  kv["n"] = std::to_string(cfg.n);
  kv["num_labels"] = std::to_string(cfg.num_labels);
  kv["max_objects"] = std::to_string(cfg.max_objects);
  kv["min_objects"] = std::to_string(cfg.min_objects);
  kv["overlap"] = fmt_double(cfg.overlap);
  kv["order"] = cfg.order;
  kv["scene_digits"] = std::to_string(cfg.scene_digits);
  return kv;
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_kv(cfg)) out += k + "=" + v + "\n";
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  return to_hex(fnv1a64(serialize_config(cfg)));
}

Task config_task(const RunConfig& cfg) { return task_from_string(cfg.task); }

Scenario config_scenario(const RunConfig& cfg) {
  if (cfg.scenario < 1 || cfg.scenario > 3)
    throw ConfigError("config: scenario must be 1, 2 or 3");
  return static_cast<Scenario>(cfg.scenario);
}

CardKind config_card_kind(const RunConfig& cfg) {
  if (cfg.card == "categorical") return CardKind::categorical;
  if (cfg.card == "poisson") return CardKind::poisson;
  if (cfg.card == "negbin") return CardKind::negative_binomial;
  throw ConfigError("config: card must be categorical, poisson or negbin");
}

void validate_config(const RunConfig& cfg) {
  const Task task = config_task(cfg);
  const Scenario scenario = config_scenario(cfg);
  config_card_kind(cfg);
  if (!(cfg.lr > 0.0)) throw ConfigError("config: lr must be positive");
  if (cfg.weight_decay < 0.0) throw ConfigError("config: weight_decay must be >= 0");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw ConfigError("config: momentum must be in [0,1)");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw ConfigError("config: dropout must be in [0,1)");
  if (cfg.batch == 0) throw ConfigError("config: batch must be positive");
  if (cfg.max_card == 0) throw ConfigError("config: max_card must be positive");
  if (!(cfg.u > 0.0)) throw ConfigError("config: u must be positive");
  if (cfg.mode != "exact" && cfg.mode != "approx")
    throw ConfigError("config: mode must be exact or approx");
  if (cfg.order != "placement" && cfg.order != "sorted_x" && cfg.order != "shuffled")
    throw ConfigError("config: order must be placement, sorted_x or shuffled");
  if (task == Task::tagging && scenario != Scenario::fixed_order)
    throw ConfigError("config: tagging supports scenario 1 only");
  if (scenario == Scenario::learned_perm) {
    if (task == Task::tagging)
      throw ConfigError("config: scenario 2 needs box targets");
    if (cfg.max_card > 6)
      throw ConfigError("config: scenario 2 supports max_card <= 6");
  }
  if (task == Task::tagging && cfg.max_card != cfg.num_labels)
    throw ConfigError("config: tagging requires max_card == num_labels");
}

HeadLayout config_layout(const RunConfig& cfg) {
  validate_config(cfg);
  const Task task = config_task(cfg);
  const std::size_t state_dim = task == Task::tagging ? 0 : 4;
  return HeadLayout::make(task, config_scenario(cfg), config_card_kind(cfg), cfg.max_card,
                          state_dim);
}

TrainConfig config_train(const RunConfig& cfg) {
  TrainConfig t;
  t.lr = cfg.lr;
  t.momentum = cfg.momentum;
  t.weight_decay = cfg.weight_decay;
  t.batch = cfg.batch;
  t.epochs = cfg.epochs;
  t.lr_decay = cfg.lr_decay;
  t.dropout = cfg.dropout;
  t.seed = cfg.seed;
  return t;
}

LossCfg config_loss(const RunConfig& cfg) {
  LossCfg l;
  l.w1 = cfg.w1;
  l.w2 = cfg.w2;
  l.lambda_noobj = cfg.lambda_noobj;
  l.w_state = cfg.w_state;
  return l;
}

InferenceConfig config_inference(const RunConfig& cfg) {
  InferenceConfig i;
  i.U = cfg.u;
  i.mode = cfg.mode == "exact" ? InferMode::exact : InferMode::approximate;
  return i;
}

}  // namespace setpred
