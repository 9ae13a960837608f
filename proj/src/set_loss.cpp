#include "setpred/set_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace setpred {

namespace {

void check_gt(const NetworkOutput& out, const GroundTruthSet& gt) {
  const HeadLayout& l = *out.layout;
  if (gt.m() > l.M) throw std::invalid_argument("set_loss: gt cardinality exceeds M");
  if (l.state_dim == 0) {
    std::vector<char> seen(l.M, 0);
    for (std::size_t lab : gt.labels) {
      if (lab >= l.M) throw std::invalid_argument("set_loss: label id out of range");
      if (seen[lab]) throw std::invalid_argument("set_loss: duplicate label");
      seen[lab] = 1;
    }
  } else {
    for (const auto& s : gt.states)
      if (s.size() != l.state_dim)
        throw std::invalid_argument("set_loss: gt state dimension mismatch");
  }
}

void check_pi(const std::vector<std::size_t>& pi, std::size_t m, std::size_t M) {
  if (pi.size() != m) throw std::invalid_argument("set_loss: pi length mismatch");
  std::vector<char> seen(M, 0);
  for (std::size_t s : pi) {
    if (s >= M) throw std::invalid_argument("set_loss: pi index out of range");
    if (seen[s]) throw std::invalid_argument("set_loss: pi not injective");
    seen[s] = 1;
  }
}

double log_sum_exp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

// State loss of one (gt element, slot) pair; if d_out is non-null, accumulates
// the gradient (scaled by `scale`) into the slot's slice of the flat output.
double pair_state_loss(const NetworkOutput& out, const GroundTruthSet& gt, std::size_t j,
                       std::size_t s, const LossCfg& cfg, double scale,
                       std::vector<double>* d_out) {
  const HeadLayout& l = *out.layout;
  const double logit = out.slot_logit(s);
  double loss = softplus(-logit);  // existence BCE toward 1
  if (d_out) (*d_out)[l.logit_offset(s)] += scale * (sigmoid(logit) - 1.0);

  if (l.state_dim == 0) return loss;

  const std::vector<double> raw = out.slot_state(s);
  const CenterBox pred = decode_slot_box(raw);
  const std::vector<double>& target = gt.states[j];
  const AABox target_box =
      CenterBox{target[0], target[1], target[2], target[3]}.to_corners();

  const ScalarGrad l1 =
      smooth_l1({pred.cx, pred.cy, pred.w, pred.h}, target, cfg.smooth_l1_delta);
  const ScalarGrad gl = giou_loss_grad(pred, target_box);
  loss += cfg.w1 * l1.value + cfg.w2 * gl.value;
  if (d_out) {
    const std::size_t off = l.slot_offset(s);
    // Chain through the decode: d/d(log w) = w * d/dw, d/d(log h) = h * d/dh.
    const double chain[4] = {1.0, 1.0, pred.w, pred.h};
    for (std::size_t k = 0; k < 4; ++k)
      (*d_out)[off + k] += scale * (cfg.w1 * l1.grad[k] + cfg.w2 * gl.grad[k]) * chain[k];
  }
  return loss;
}

void add_card_terms(const NetworkOutput& out, std::size_t m, LossResult& res) {
  const HeadLayout& l = *out.layout;
  const ScalarGrad nll = card_nll(out.card_head(), m);
  res.card = nll.value;
  for (std::size_t i = 0; i < nll.grad.size(); ++i)
    res.d_out[l.alpha_offset() + i] += nll.grad[i];
}

}  // namespace

CenterBox decode_slot_box(const std::vector<double>& raw_state) {
  if (raw_state.size() != 4)
    throw std::invalid_argument("decode_slot_box: expected 4 values");
  return {raw_state[0], raw_state[1], std::exp(raw_state[2]), std::exp(raw_state[3])};
}

CostMatrix build_cost_matrix(const NetworkOutput& out, const GroundTruthSet& gt,
                             const LossCfg& cfg) {
  check_gt(out, gt);
  const HeadLayout& l = *out.layout;
  CostMatrix cost(gt.m(), l.M);
  for (std::size_t j = 0; j < gt.m(); ++j)
    for (std::size_t s = 0; s < l.M; ++s)
      cost.at(j, s) = pair_state_loss(out, gt, j, s, cfg, 0.0, nullptr);
  return cost;
}

AssignmentResult sample_permutation_s3(const CostMatrix& cost) { return hungarian(cost); }

AssignmentResult sample_permutation_s2(const CostMatrix& cost,
                                       const std::vector<double>& perm_logits,
                                       std::size_t m) {
  const std::size_t M = cost.cols;
  if (M == 0 || M > 8)
    throw std::invalid_argument("sample_permutation_s2: M must be in [1,8]");
  if (perm_logits.size() != factorial(M))
    throw std::invalid_argument("sample_permutation_s2: perm_logits length must be M!");
  if (m != cost.rows)
    throw std::invalid_argument("sample_permutation_s2: m does not match cost rows");
  for (double v : cost.data)
    if (!std::isfinite(v))
      throw std::invalid_argument("sample_permutation_s2: non-finite entry");

  const double lse = log_sum_exp(perm_logits);
  std::vector<std::size_t> p(M);
  std::iota(p.begin(), p.end(), 0);
  AssignmentResult best;
  best.cost = std::numeric_limits<double>::infinity();
  std::uint64_t idx = 0;
  // std::next_permutation from the identity enumerates permutations in
  // lexicographic order, so idx is the Lehmer index and strict improvement
  // keeps the smallest tie.
  do {
    double score = lse - perm_logits[idx];
    for (std::size_t j = 0; j < m; ++j) score += cost.at(j, p[j]);
    if (score < best.cost) {
      best.cost = score;
      best.perm = p;
    }
    ++idx;
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

LossResult scenario1_loss(const NetworkOutput& out, const GroundTruthSet& gt,
                          const LossCfg& cfg) {
  check_gt(out, gt);
  const HeadLayout& l = *out.layout;
  if (l.state_dim == 0) {
    LossResult res;
    res.d_out.assign(out.flat.size(), 0.0);
    add_card_terms(out, gt.m(), res);
    std::vector<char> present(l.M, 0);
    for (std::size_t lab : gt.labels) present[lab] = 1;
    double state = 0.0;
    for (std::size_t s = 0; s < l.M; ++s) {
      const double z = out.slot_logit(s);
      if (present[s]) {
        state += softplus(-z);
        res.d_out[l.logit_offset(s)] += cfg.w_state * (sigmoid(z) - 1.0);
      } else {
        state += softplus(z);
        res.d_out[l.logit_offset(s)] += cfg.w_state * sigmoid(z);
      }
    }
    res.state = cfg.w_state * state;
    res.total = res.card + res.state;
    return res;
  }
  // Boxes: the stored element order is the target order; identity assignment.
  std::vector<std::size_t> identity(gt.m());
  std::iota(identity.begin(), identity.end(), 0);
  return scenario3_loss(out, gt, identity, cfg);
}

LossResult scenario3_loss(const NetworkOutput& out, const GroundTruthSet& gt,
                          const std::vector<std::size_t>& pi, const LossCfg& cfg) {
  check_gt(out, gt);
  const HeadLayout& l = *out.layout;
  check_pi(pi, gt.m(), l.M);

  LossResult res;
  res.d_out.assign(out.flat.size(), 0.0);
  add_card_terms(out, gt.m(), res);

  std::vector<char> matched(l.M, 0);
  double state = 0.0;
  for (std::size_t j = 0; j < gt.m(); ++j) {
    matched[pi[j]] = 1;
    state += pair_state_loss(out, gt, j, pi[j], cfg, cfg.w_state, &res.d_out);
  }
  for (std::size_t s = 0; s < l.M; ++s) {
    if (matched[s]) continue;
    const double z = out.slot_logit(s);
    state += cfg.lambda_noobj * softplus(z);
    res.d_out[l.logit_offset(s)] += cfg.w_state * cfg.lambda_noobj * sigmoid(z);
  }
  res.state = cfg.w_state * state;
  res.total = res.card + res.state;
  return res;
}

LossResult scenario2_loss(const NetworkOutput& out, const GroundTruthSet& gt,
                          const std::vector<std::size_t>& pi_full, const LossCfg& cfg) {
  const HeadLayout& l = *out.layout;
  if (l.scenario != Scenario::learned_perm)
    throw std::invalid_argument("scenario2_loss: layout lacks permutation logits");
  check_pi(pi_full, l.M, l.M);
  std::vector<std::size_t> prefix(pi_full.begin(),
                                  pi_full.begin() + static_cast<long>(gt.m()));
  LossResult res = scenario3_loss(out, gt, prefix, cfg);

  const std::vector<double> logits = out.perm_logits();
  const std::uint64_t target = lehmer_encode(pi_full);
  const double lse = log_sum_exp(logits);
  res.perm = lse - logits[target];
  const std::size_t off = l.perm_offset();
  for (std::size_t i = 0; i < logits.size(); ++i)
    res.d_out[off + i] += std::exp(logits[i] - lse);
  res.d_out[off + target] -= 1.0;
  res.total += res.perm;
  return res;
}

void update_histogram(PermutationHistogram& hist, std::uint64_t instance_id,
                      const std::vector<std::size_t>& pi_full) {
  const std::uint64_t idx = lehmer_encode(pi_full);  // validates the permutation
  PermutationHistogram::Entry& e = hist.per_instance[instance_id];
  ++e.counts[idx];
  ++e.total;
}

namespace {

std::vector<DominantPerm> top_k_of(std::uint64_t instance_id,
                                   const PermutationHistogram::Entry& e, std::size_t k,
                                   std::size_t M, std::uint64_t denom) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> items(e.counts.begin(),
                                                             e.counts.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<DominantPerm> out;
  for (std::size_t i = 0; i < items.size() && i < k; ++i) {
    DominantPerm d;
    d.instance_id = instance_id;
    d.lehmer = items[i].first;
    d.perm = lehmer_decode(items[i].first, M);
    d.weight = static_cast<double>(items[i].second) / static_cast<double>(denom);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

std::vector<DominantPerm> dominant_permutations(const PermutationHistogram& hist,
                                                std::size_t k, std::size_t M) {
  std::vector<DominantPerm> out;
  for (const auto& [id, entry] : hist.per_instance) {
    auto rows = top_k_of(id, entry, k, M, entry.total);
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

std::vector<DominantPerm> global_dominant_permutations(const PermutationHistogram& hist,
                                                       std::size_t k, std::size_t M) {
  PermutationHistogram::Entry merged;
  for (const auto& [id, entry] : hist.per_instance) {
    for (const auto& [idx, n] : entry.counts) merged.counts[idx] += n;
    merged.total += entry.total;
  }
  if (merged.total == 0) return {};
  return top_k_of(0, merged, k, M, merged.total);
}

}  // namespace setpred
