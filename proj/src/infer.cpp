#include "setpred/infer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace setpred {

namespace {

struct ScoredSlot {
  std::size_t slot;
  double log_score;
};

// Slots by descending score; ties by slot index for determinism.
std::vector<ScoredSlot> ranked_slots(const NetworkOutput& out) {
  const std::size_t M = out.layout->M;
  std::vector<ScoredSlot> v(M);
  for (std::size_t s = 0; s < M; ++s) v[s] = {s, log_sigmoid(out.slot_logit(s))};
  std::stable_sort(v.begin(), v.end(), [](const ScoredSlot& a, const ScoredSlot& b) {
    return a.log_score > b.log_score;
  });
  return v;
}

PredictedSet take_slots(const NetworkOutput& out, const std::vector<ScoredSlot>& ranked,
                        std::size_t m) {
  PredictedSet ps;
  ps.m_star = m;
  for (std::size_t i = 0; i < m; ++i) {
    PredictedElement e;
    e.slot = ranked[i].slot;
    e.state = out.slot_state(e.slot);
    e.score = std::exp(ranked[i].log_score);
    ps.elements.push_back(std::move(e));
  }
  return ps;
}

}  // namespace

PredictedSet exact_map(const NetworkOutput& out, const InferenceConfig& cfg) {
  if (!(cfg.U > 0.0)) throw std::invalid_argument("exact_map: U must be positive");
  const std::size_t M = out.layout->M;
  const std::vector<double> log_pmf = card_log_pmf(out.card_head(), M);
  const std::vector<ScoredSlot> ranked = ranked_slots(out);
  const double log_u = std::log(cfg.U);

  std::size_t best_m = 0;
  double best_j = std::numeric_limits<double>::infinity();
  double prefix = 0.0;
  for (std::size_t m = 0; m <= M; ++m) {
    if (m > 0) prefix += ranked[m - 1].log_score;
    const double j = -log_pmf[m] - static_cast<double>(m) * log_u - prefix;
    if (j < best_j) {  // strict: ties stay at the smaller m
      best_j = j;
      best_m = m;
    }
  }
  return take_slots(out, ranked, best_m);
}

PredictedSet approx_map(const NetworkOutput& out) {
  const std::size_t M = out.layout->M;
  const std::size_t m_star = card_map(out.card_head(), M);
  return take_slots(out, ranked_slots(out), m_star);
}

PredictedSet brute_force_map(const NetworkOutput& out, const InferenceConfig& cfg) {
  if (!(cfg.U > 0.0)) throw std::invalid_argument("brute_force_map: U must be positive");
  const std::size_t M = out.layout->M;
  if (M > 12) throw std::invalid_argument("brute_force_map: M > 12");
  const std::vector<double> log_pmf = card_log_pmf(out.card_head(), M);
  std::vector<double> log_score(M);
  for (std::size_t s = 0; s < M; ++s) log_score[s] = log_sigmoid(out.slot_logit(s));
  const double log_u = std::log(cfg.U);

  double best_j = std::numeric_limits<double>::infinity();
  std::uint32_t best_mask = 0;
  std::size_t best_m = M + 1;
  for (std::uint32_t mask = 0; mask < (1u << M); ++mask) {
    const std::size_t m = static_cast<std::size_t>(__builtin_popcount(mask));
    double j = -log_pmf[m] - static_cast<double>(m) * log_u;
    for (std::size_t s = 0; s < M; ++s)
      if (mask & (1u << s)) j -= log_score[s];
    if (j < best_j || (j == best_j && m < best_m)) {
      best_j = j;
      best_mask = mask;
      best_m = m;
    }
  }

  PredictedSet ps;
  ps.m_star = best_m;
  for (std::size_t s = 0; s < M; ++s) {
    if (!(best_mask & (1u << s))) continue;
    PredictedElement e;
    e.slot = s;
    e.state = out.slot_state(s);
    e.score = std::exp(log_score[s]);
    ps.elements.push_back(std::move(e));
  }
  std::stable_sort(ps.elements.begin(), ps.elements.end(),
                   [](const PredictedElement& a, const PredictedElement& b) {
                     return a.score > b.score;
                   });
  return ps;
}

PredictedSet run_inference(const NetworkOutput& out, const InferenceConfig& cfg) {
  return cfg.mode == InferMode::exact ? exact_map(out, cfg) : approx_map(out);
}

}  // namespace setpred
