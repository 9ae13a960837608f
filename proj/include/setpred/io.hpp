#pragma once

#include <map>
#include <string>
#include <vector>

#include "setpred/datagen.hpp"
#include "setpred/metrics.hpp"
#include "setpred/net.hpp"

namespace setpred {

// Shortest round-trip decimal representation.
std::string fmt_double(double v);

// JSON Lines, one instance per line:
//   {"id", "w", "h", "input": [...], "elements": [{"box": [x1,y1,x2,y2], "class": c}]}
// tagging instances carry {"labels": [...]} instead of "elements".
void write_jsonl(const Dataset& data, const std::string& path);

// Validates the schema; zero-area ground-truth boxes are rejected here.
// Malformed input raises FormatError.
Dataset read_jsonl(const std::string& path);

struct Checkpoint {
  HeadLayout layout;
  Mlp net;
  std::map<std::string, std::string> config;
  std::string config_hash;
};

// JSON object {version: 1, scenario, layer_widths, weights, biases, config, ...};
// loaders reject unknown versions.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// CSV, one metric per row (name,value); the config hash rides in the first row.
void write_report_csv(const EvalReport& report, const std::string& config_hash,
                      const std::string& path);
void write_report_json(const EvalReport& report, const std::string& config_hash,
                       const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace setpred
