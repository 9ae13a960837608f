#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "setpred/datagen.hpp"
#include "setpred/infer.hpp"
#include "setpred/metrics.hpp"
#include "setpred/set_loss.hpp"

namespace setpred {

struct TrainInstance {
  std::uint64_t id = 0;
  std::vector<double> input;
  GroundTruthSet gt;
  std::size_t canvas_w = 0, canvas_h = 0;
};

// Converts raw instances to training form (normalized box states for the box
// tasks). Validates gt cardinalities against the layout.
std::vector<TrainInstance> prepare_instances(const Dataset& data, const HeadLayout& layout);

struct RunLogRow {
  std::size_t iter = 0;
  double total = 0.0, card = 0.0, state = 0.0, perm = 0.0;
  // Scenario 3: total loss re-evaluated at the identity assignment; equals
  // `total` otherwise.
  double identity_total = 0.0;
  double assign_ms = 0.0;
};

struct EpochRow {
  std::size_t epoch = 0;
  double mean_total = 0.0;
  double lr = 0.0;
};

struct RunLog {
  std::vector<RunLogRow> rows;
  std::vector<EpochRow> epochs;
  double wall_seconds = 0.0;
  std::string to_csv(const std::string& config_hash) const;
};

struct TrainResult {
  RunLog log;
  PermutationHistogram hist;  // populated for scenario 2
};

using EpochCallback = std::function<void(std::size_t epoch, const Mlp& net)>;

// One SGD pass per epoch in seeded shuffled order; batches average
// per-instance gradients; scenario 2/3 re-derive the permutation sample every
// iteration. Aborts with DivergenceError on non-finite loss or loss > 1e6.
// Deterministic given (seed, config, data).
TrainResult train(Scenario scenario, const std::vector<TrainInstance>& data, Mlp& net,
                  const HeadLayout& layout, const TrainConfig& tcfg, const LossCfg& lcfg,
                  const EpochCallback& per_epoch = nullptr);

// Pure evaluation sweep: inference per instance, aggregated per-task metrics.
EvalReport evaluate(const Mlp& net, const std::vector<TrainInstance>& data,
                    const HeadLayout& layout, const InferenceConfig& icfg,
                    double iou_thresh = 0.5);

// Predicted set with boxes mapped back to canvas units (box tasks).
struct InferredSet {
  std::size_t m_star = 0;
  std::vector<std::size_t> labels;  // tagging: chosen label ids
  std::vector<AABox> boxes;         // box tasks: canvas units
  std::vector<double> scores;
};

InferredSet infer_instance(const Mlp& net, const TrainInstance& inst,
                           const HeadLayout& layout, const InferenceConfig& icfg);

}  // namespace setpred
