#pragma once

#include <vector>

#include "setpred/net.hpp"

namespace setpred {

enum class InferMode { exact, approximate };

struct InferenceConfig {
  double U = 1.0;  // unit of hyper-volume; per-element log-bonus at inference
  InferMode mode = InferMode::exact;
};

struct PredictedElement {
  std::vector<double> state;  // raw slot state (decode at the task boundary)
  double score = 0.0;         // sigmoid of the existence logit
  std::size_t slot = 0;
};

// Elements sorted by non-increasing score.
struct PredictedSet {
  std::size_t m_star = 0;
  std::vector<PredictedElement> elements;
};

// Minimize J(m) = -log p(m) - m*log U - sum of the top-m log scores over
// m in [0, M], scores sorted descending; ties toward smaller m. Scores are
// handled in the logit domain, so zero scores cannot occur.
PredictedSet exact_map(const NetworkOutput& out, const InferenceConfig& cfg);

// m* = cardinality mode; top-m* slots by score.
PredictedSet approx_map(const NetworkOutput& out);

// Direct minimization over all (m, m-subset) pairs; M <= 12. Test oracle for
// exact_map.
PredictedSet brute_force_map(const NetworkOutput& out, const InferenceConfig& cfg);

PredictedSet run_inference(const NetworkOutput& out, const InferenceConfig& cfg);

}  // namespace setpred
