#pragma once

#include <string>
#include <utility>
#include <vector>

#include "setpred/geometry.hpp"
#include "setpred/net.hpp"

namespace setpred {

struct PrfTriple {
  double p = 0.0, r = 0.0, f1 = 0.0;
};

// Nine tagging rates: per-class (macro over classes present in any gt),
// overall (micro over all decisions), per-instance (averaged over images).
// Each F1 is the harmonic mean of its own P and R; 0/0 rates are 0.
struct MultilabelPrf {
  PrfTriple c, o, i;
};

MultilabelPrf prf_multilabel(const std::vector<std::vector<std::size_t>>& preds,
                             const std::vector<std::vector<std::size_t>>& gts,
                             std::size_t num_labels);

// Mean and population standard deviation of |pred - gt|.
std::pair<double, double> cardinality_mae(const std::vector<std::size_t>& pred,
                                          const std::vector<std::size_t>& gt);

struct ScoredBox {
  AABox box;
  double score = 0.0;
};

struct DetectionScores {
  double ap = 0.0;
  double best_f1 = 0.0;
  double mr = 0.0;  // log-average miss rate over 9 FPPI points in [1e-2, 1]
};

// Greedy score-descending matching at the given IoU threshold; AP uses the
// all-point monotone envelope; miss rates are clamped to [1e-4, 1] before the
// geometric mean.
DetectionScores detection_pr(const std::vector<std::vector<ScoredBox>>& preds,
                             const std::vector<std::vector<AABox>>& gts,
                             double iou_thresh = 0.5);

// Micro P/R/F1 of inferred box sets: within each image, a predicted box is a
// true positive if an optimal one-to-one matching pairs it with a gt box at
// IoU above the threshold.
PrfTriple detection_set_prf(const std::vector<std::vector<AABox>>& preds,
                            const std::vector<std::vector<AABox>>& gts,
                            double iou_thresh = 0.5);

// An instance is correct iff |pred| == |gt| and a perfect matching exists with
// all pairwise IoU > 0.5; empty vs empty is correct.
double captcha_accuracy(const std::vector<std::vector<AABox>>& preds,
                        const std::vector<std::vector<AABox>>& gts);

struct EvalReport {
  Task task = Task::tagging;
  MultilabelPrf tagging;                        // tagging
  DetectionScores detection;                    // detect
  PrfTriple set_level;                          // detect: inferred-set P/R/F1
  double accuracy = 0.0;                        // captcha
  double mae_mean = 0.0, mae_std = 0.0;         // all tasks

  std::vector<std::pair<std::string, double>> rows() const;
};

}  // namespace setpred
