#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "setpred/assignment.hpp"
#include "setpred/net.hpp"

namespace setpred {

// Training target for one instance. Unordered semantics: the stored order of
// elements is non-contractual for scenarios 2 and 3; scenario 1 reads it as
// the fixed target order.
//   tagging: labels holds the label ids, states is empty.
//   detect/captcha: states holds one (cx, cy, w, h) vector per element in
//   normalized coordinates; labels holds the class ids (all 0 single-class).
struct GroundTruthSet {
  std::vector<std::vector<double>> states;
  std::vector<std::size_t> labels;

  std::size_t m() const { return states.empty() ? labels.size() : states.size(); }
};

struct LossCfg {
  double w1 = 1.0;            // smooth-L1 weight
  double w2 = 1.0;            // (1 - GIoU) weight
  double lambda_noobj = 0.5;  // unmatched-slot existence weight
  double w_state = 1.0;       // scales all state/existence terms (0 = cardinality only)
  double smooth_l1_delta = 1.0;
};

struct LossResult {
  double total = 0.0;
  double card = 0.0;
  double state = 0.0;
  double perm = 0.0;
  std::vector<double> d_out;  // gradient w.r.t. the flat network output
};

// Slot states are stored raw as (cx, cy, log w, log h); decoding applies exp
// to the size entries so width and height are unconditionally positive.
CenterBox decode_slot_box(const std::vector<double>& raw_state);

// entry (j, s) = L_state(gt element j, slot s): for boxes w1*smoothL1 +
// w2*(1-GIoU) + existence BCE toward 1; for tagging existence BCE only.
CostMatrix build_cost_matrix(const NetworkOutput& out, const GroundTruthSet& gt,
                             const LossCfg& cfg);

// Optimal assignment under the summed state loss (delegates to hungarian).
AssignmentResult sample_permutation_s3(const CostMatrix& cost);

// Exact argmin over all full permutations of M of
//   cross_entropy(perm_logits, lehmer(pi)) + sum_{j<m} cost(j, pi[j]).
// Ties toward the smallest Lehmer index. Returned perm has length M and the
// cost is the full objective value. M <= 8.
AssignmentResult sample_permutation_s2(const CostMatrix& cost,
                                       const std::vector<double>& perm_logits,
                                       std::size_t m);

// Scenario 1 (Eq. of fixed target order): cardinality NLL plus state terms at
// the identity assignment; for tagging, existence BCE against the
// label-presence indicator over all M slots.
LossResult scenario1_loss(const NetworkOutput& out, const GroundTruthSet& gt,
                          const LossCfg& cfg);

// Scenario 3: cardinality NLL + matched state losses + lambda_noobj *
// unmatched existence BCE toward 0. pi has length gt.m().
LossResult scenario3_loss(const NetworkOutput& out, const GroundTruthSet& gt,
                          const std::vector<std::size_t>& pi, const LossCfg& cfg);

// Scenario 2: scenario-3 terms at the first-m prefix of the full permutation
// pi_full, plus cross-entropy of the permutation logits at lehmer(pi_full).
// pi_full is treated as a constant (no gradient through the argmin).
LossResult scenario2_loss(const NetworkOutput& out, const GroundTruthSet& gt,
                          const std::vector<std::size_t>& pi_full, const LossCfg& cfg);

// Per-instance frequency weights over sampled permutations across SGD
// iterations.
struct PermutationHistogram {
  struct Entry {
    std::map<std::uint64_t, std::uint64_t> counts;  // lehmer index -> count
    std::uint64_t total = 0;
  };
  std::map<std::uint64_t, Entry> per_instance;
};

void update_histogram(PermutationHistogram& hist, std::uint64_t instance_id,
                      const std::vector<std::size_t>& pi_full);

struct DominantPerm {
  std::uint64_t instance_id = 0;
  std::uint64_t lehmer = 0;
  std::vector<std::size_t> perm;
  double weight = 0.0;
};

// Top-k permutations per instance by weight (ties toward the smaller Lehmer
// index). M is needed to decode the permutation vectors.
std::vector<DominantPerm> dominant_permutations(const PermutationHistogram& hist,
                                                std::size_t k, std::size_t M);

// Counts merged across instances, weights normalized by the grand total.
std::vector<DominantPerm> global_dominant_permutations(const PermutationHistogram& hist,
                                                       std::size_t k, std::size_t M);

}  // namespace setpred
