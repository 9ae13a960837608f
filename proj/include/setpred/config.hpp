#pragma once

#include <map>
#include <string>
#include <vector>

#include "setpred/infer.hpp"
#include "setpred/net.hpp"
#include "setpred/set_loss.hpp"

namespace setpred {

// Flat run configuration shared by all commands. Parsed from key=value lines
// (# starts a comment); command-line flags override file values; unknown keys
// are rejected.
struct RunConfig {
  std::string task = "detect";
  int scenario = 3;
  std::size_t max_card = 5;
  std::vector<std::size_t> hidden = {64, 64};
  std::string card = "categorical";

  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lr_decay = 0.95;
  double dropout = 0.0;
  std::size_t epochs = 10;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0 = final checkpoint only

  double w1 = 1.0;
  double w2 = 1.0;
  double lambda_noobj = 0.5;
  double w_state = 1.0;

  double u = 1.0;
  std::string mode = "exact";
  double iou_thresh = 0.5;

  // generator knobs
  std::size_t n = 1000;
  std::size_t num_labels = 8;
  std::size_t max_objects = 5;
  std::size_t min_objects = 0;
  double overlap = 0.0;
  std::string order = "placement";
  std::size_t scene_digits = 4;
};

// Throws ConfigError on unknown keys or unparsable values.
void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Canonical serialization: every key, sorted, one per line. parse of the
// output reproduces the config exactly.
std::string serialize_config(const RunConfig& cfg);
std::map<std::string, std::string> config_kv(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

// Cross-field checks (task/scenario combinations, ranges).
void validate_config(const RunConfig& cfg);

Task config_task(const RunConfig& cfg);
Scenario config_scenario(const RunConfig& cfg);
CardKind config_card_kind(const RunConfig& cfg);
HeadLayout config_layout(const RunConfig& cfg);
TrainConfig config_train(const RunConfig& cfg);
LossCfg config_loss(const RunConfig& cfg);
InferenceConfig config_inference(const RunConfig& cfg);

}  // namespace setpred
