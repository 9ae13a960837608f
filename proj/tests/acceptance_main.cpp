// Acceptance gate. Runs every criterion (or the subset named on the command
// line), prints one [PASS]/[FAIL] line per criterion, and exits non-zero if
// any selected criterion fails. Training-based criteria use the settings
// pinned in docs/pilots.md; changing them invalidates the recorded thresholds.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "setpred/assignment.hpp"
#include "setpred/common.hpp"
#include "setpred/config.hpp"
#include "setpred/datagen.hpp"
#include "setpred/geometry.hpp"
#include "setpred/gradcheck.hpp"
#include "setpred/infer.hpp"
#include "setpred/io.hpp"
#include "setpred/metrics.hpp"
#include "setpred/net.hpp"
#include "setpred/set_loss.hpp"
#include "setpred/trainer.hpp"

namespace {

using namespace setpred;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) { return fmt_double(v); }

// ---------------------------------------------------------------------------
// Criterion 1: hungarian cost equals the brute-force cost on random matrices.

Outcome criterion_assignment_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double max_diff = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t M = static_cast<std::size_t>(rng.uniform_int(1, 7));
    const std::size_t m = static_cast<std::size_t>(rng.uniform_int(1, static_cast<long long>(M)));
    CostMatrix cost(m, M);
    for (double& v : cost.data) v = rng.uniform(-10.0, 10.0);
    const AssignmentResult fast = hungarian(cost);
    const AssignmentResult slow = brute_force_assignment(cost);
    max_diff = std::max(max_diff, std::fabs(fast.cost - slow.cost));
  }
  const double secs = seconds_since(t0);
  const bool pass = max_diff <= 1e-9 && secs < 5.0;
  return {pass, "1000 matrices m,M<=7, max cost gap " + fmt(max_diff) + ", " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 2: exact MAP equals subset enumeration, same slot set.

Outcome criterion_inference_oracle() {
  const auto t0 = Clock::now();
  const double units[4] = {0.5, 1.0, 2.36, 100.0};
  Rng rng(202);
  int mism = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t M = static_cast<std::size_t>(rng.uniform_int(1, 10));
    const HeadLayout layout =
        HeadLayout::make(Task::tagging, Scenario::fixed_order, CardKind::categorical, M, 0);
    NetworkOutput out;
    out.layout = &layout;
    out.flat.resize(layout.output_dim());
    for (std::size_t k = 0; k < layout.card_dim(); ++k) out.flat[k] = rng.uniform(-3.0, 3.0);
    for (std::size_t s = 0; s < M; ++s) out.flat[layout.logit_offset(s)] = rng.uniform(-4.0, 4.0);
    InferenceConfig icfg;
    icfg.U = units[i % 4];
    const PredictedSet a = exact_map(out, icfg);
    const PredictedSet b = brute_force_map(out, icfg);
    std::set<std::size_t> sa, sb;
    for (const auto& e : a.elements) sa.insert(e.slot);
    for (const auto& e : b.elements) sb.insert(e.slot);
    if (a.m_star != b.m_star || sa != sb) ++mism;
  }
  const double secs = seconds_since(t0);
  const bool pass = mism == 0 && secs < 5.0;
  return {pass, "1000 draws M<=10, U in {0.5,1,2.36,100}, " + std::to_string(mism) +
                    " mismatches, " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 3: finite-difference gradient suite over every loss head.

Outcome criterion_gradient_suite() {
  const auto t0 = Clock::now();
  const std::vector<GradCheckResult> results = run_gradcheck_suite(303, 100);
  double worst = 0.0;
  std::string worst_name;
  for (const GradCheckResult& r : results)
    if (r.max_rel_err >= worst) {
      worst = r.max_rel_err;
      worst_name = r.name;
    }
  const double secs = seconds_since(t0);
  const bool pass = worst < 1e-4 && secs < 60.0;
  return {pass, std::to_string(results.size()) + " heads x 100 configs, worst rel err " +
                    fmt(worst) + " (" + worst_name + "), " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 4: losses and metrics are set-functions of the ground truth;
// inference is a set-function of the slots.

GroundTruthSet random_boxes_gt(Rng& rng, std::size_t m) {
  GroundTruthSet gt;
  for (std::size_t j = 0; j < m; ++j) {
    const double w = rng.uniform(0.08, 0.3), h = rng.uniform(0.08, 0.3);
    gt.states.push_back({rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), w, h});
    gt.labels.push_back(0);
  }
  return gt;
}

GroundTruthSet shuffled_gt(const GroundTruthSet& gt, Rng& rng) {
  std::vector<std::size_t> order(gt.states.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  rng.shuffle(order);
  GroundTruthSet out;
  for (std::size_t j : order) {
    out.states.push_back(gt.states[j]);
    out.labels.push_back(gt.labels[j]);
  }
  return out;
}

std::vector<double> random_slot_flat(const HeadLayout& layout, Rng& rng) {
  std::vector<double> flat(layout.output_dim(), 0.0);
  for (std::size_t k = 0; k < layout.card_dim(); ++k) flat[k] = rng.uniform(-2.0, 2.0);
  for (std::size_t s = 0; s < layout.M; ++s) {
    double* slot = flat.data() + layout.slot_offset(s);
    slot[0] = rng.uniform(0.1, 0.9);
    slot[1] = rng.uniform(0.1, 0.9);
    slot[2] = rng.uniform(-2.5, -0.9);
    slot[3] = rng.uniform(-2.5, -0.9);
    flat[layout.logit_offset(s)] = rng.uniform(-3.0, 3.0);
  }
  return flat;
}

double s3_total(const HeadLayout& layout, const std::vector<double>& flat,
                const GroundTruthSet& gt, const LossCfg& lcfg) {
  NetworkOutput out;
  out.layout = &layout;
  out.flat = flat;
  const CostMatrix cost = build_cost_matrix(out, gt, lcfg);
  const std::vector<std::size_t> pi =
      gt.m() == 0 ? std::vector<std::size_t>{} : sample_permutation_s3(cost).perm;
  return scenario3_loss(out, gt, pi, lcfg).total;
}

// The permutation head is held uniform (zero logits): the cross-entropy term
// is then the same constant for every permutation class, so the argmin and
// the total depend only on the matched state costs.
double s2_total(const HeadLayout& layout, const std::vector<double>& flat,
                const GroundTruthSet& gt, const LossCfg& lcfg) {
  NetworkOutput out;
  out.layout = &layout;
  out.flat = flat;
  const CostMatrix cost = build_cost_matrix(out, gt, lcfg);
  const std::vector<double> logits(factorial(layout.M), 0.0);
  const AssignmentResult pick = sample_permutation_s2(cost, logits, gt.m());
  return scenario2_loss(out, gt, pick.perm, lcfg).total;
}

std::vector<AABox> random_box_list(Rng& rng, std::size_t count) {
  std::vector<AABox> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double x1 = rng.uniform(0.0, 20.0), y1 = rng.uniform(0.0, 20.0);
    out.push_back({x1, y1, x1 + rng.uniform(2.0, 8.0), y1 + rng.uniform(2.0, 8.0)});
  }
  return out;
}

Outcome criterion_set_invariance() {
  const auto t0 = Clock::now();
  Rng rng(404);
  double worst = 0.0;
  int fails = 0;
  const LossCfg lcfg;
  for (int i = 0; i < 500; ++i) {
    // scenario 3 loss under a ground-truth shuffle
    {
      const std::size_t M = static_cast<std::size_t>(rng.uniform_int(1, 5));
      const std::size_t m = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(M)));
      const HeadLayout layout =
          HeadLayout::make(Task::detect, Scenario::uniform_perm, CardKind::categorical, M, 4);
      const std::vector<double> flat = random_slot_flat(layout, rng);
      const GroundTruthSet gt = random_boxes_gt(rng, m);
      const double a = s3_total(layout, flat, gt, lcfg);
      const double b = s3_total(layout, flat, shuffled_gt(gt, rng), lcfg);
      worst = std::max(worst, std::fabs(a - b));
    }
    // scenario 2 loss under a ground-truth shuffle (uniform permutation head)
    {
      const std::size_t M = static_cast<std::size_t>(rng.uniform_int(1, 4));
      const std::size_t m = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(M)));
      const HeadLayout layout =
          HeadLayout::make(Task::detect, Scenario::learned_perm, CardKind::categorical, M, 4);
      std::vector<double> flat = random_slot_flat(layout, rng);
      std::fill(flat.begin() + static_cast<std::ptrdiff_t>(layout.perm_offset()), flat.end(), 0.0);
      const GroundTruthSet gt = random_boxes_gt(rng, m);
      const double a = s2_total(layout, flat, gt, lcfg);
      const double b = s2_total(layout, flat, shuffled_gt(gt, rng), lcfg);
      worst = std::max(worst, std::fabs(a - b));
    }
    // inference under a slot shuffle
    {
      const std::size_t M = static_cast<std::size_t>(rng.uniform_int(1, 6));
      const HeadLayout layout =
          HeadLayout::make(Task::detect, Scenario::uniform_perm, CardKind::categorical, M, 4);
      const std::vector<double> flat = random_slot_flat(layout, rng);
      std::vector<std::size_t> order(M);
      for (std::size_t s = 0; s < M; ++s) order[s] = s;
      rng.shuffle(order);
      std::vector<double> shuffled = flat;
      for (std::size_t s = 0; s < M; ++s)
        for (std::size_t k = 0; k < layout.slot_dim(); ++k)
          shuffled[layout.slot_offset(s) + k] = flat[layout.slot_offset(order[s]) + k];
      NetworkOutput a, b;
      a.layout = b.layout = &layout;
      a.flat = flat;
      b.flat = shuffled;
      InferenceConfig icfg;
      icfg.U = (i % 2) ? 1.0 : 2.36;
      const PredictedSet pa = exact_map(a, icfg);
      const PredictedSet pb = exact_map(b, icfg);
      if (pa.m_star != pb.m_star) ++fails;
      std::multiset<double> sa, sb;
      for (const auto& e : pa.elements) sa.insert(e.score);
      for (const auto& e : pb.elements) sb.insert(e.score);
      if (sa != sb) ++fails;
    }
    // metrics under element-order and instance-order shuffles
    {
      std::vector<std::vector<ScoredBox>> ranked;
      std::vector<std::vector<AABox>> pred_boxes, gt_boxes;
      std::vector<std::vector<std::size_t>> pred_labels, gt_labels;
      std::vector<std::size_t> pred_m, gt_m;
      for (int inst = 0; inst < 3; ++inst) {
        const std::size_t np = static_cast<std::size_t>(rng.uniform_int(0, 4));
        const std::size_t ng = static_cast<std::size_t>(rng.uniform_int(0, 4));
        std::vector<AABox> pb = random_box_list(rng, np);
        std::vector<ScoredBox> rb;
        for (const AABox& box : pb) rb.push_back({box, rng.uniform(0.0, 1.0)});
        ranked.push_back(rb);
        pred_boxes.push_back(pb);
        gt_boxes.push_back(random_box_list(rng, ng));
        std::vector<std::size_t> pl(np), gl(ng);
        for (auto& v : pl) v = static_cast<std::size_t>(rng.uniform_int(0, 7));
        for (auto& v : gl) v = static_cast<std::size_t>(rng.uniform_int(0, 7));
        pred_labels.push_back(pl);
        gt_labels.push_back(gl);
        pred_m.push_back(np);
        gt_m.push_back(ng);
      }
      auto shuffled_copy = [&](auto lists) {
        for (auto& l : lists) rng.shuffle(l);
        return lists;
      };
      std::vector<std::size_t> inst_order = {0, 1, 2};
      rng.shuffle(inst_order);
      auto reorder = [&](const auto& lists) {
        auto out = lists;
        for (std::size_t k = 0; k < inst_order.size(); ++k) out[k] = lists[inst_order[k]];
        return out;
      };

      const DetectionScores d1 = detection_pr(ranked, gt_boxes, 0.5);
      const DetectionScores d2 =
          detection_pr(reorder(shuffled_copy(ranked)), reorder(shuffled_copy(gt_boxes)), 0.5);
      worst = std::max({worst, std::fabs(d1.ap - d2.ap), std::fabs(d1.best_f1 - d2.best_f1),
                        std::fabs(d1.mr - d2.mr)});

      const PrfTriple e1 = detection_set_prf(pred_boxes, gt_boxes, 0.5);
      const PrfTriple e2 = detection_set_prf(reorder(shuffled_copy(pred_boxes)),
                                             reorder(shuffled_copy(gt_boxes)), 0.5);
      worst = std::max({worst, std::fabs(e1.p - e2.p), std::fabs(e1.r - e2.r),
                        std::fabs(e1.f1 - e2.f1)});

      const double c1 = captcha_accuracy(pred_boxes, gt_boxes);
      const double c2 =
          captcha_accuracy(reorder(shuffled_copy(pred_boxes)), reorder(shuffled_copy(gt_boxes)));
      worst = std::max(worst, std::fabs(c1 - c2));

      const MultilabelPrf t1 = prf_multilabel(pred_labels, gt_labels, 8);
      const MultilabelPrf t2 =
          prf_multilabel(reorder(shuffled_copy(pred_labels)), reorder(shuffled_copy(gt_labels)), 8);
      worst = std::max({worst, std::fabs(t1.o.f1 - t2.o.f1), std::fabs(t1.c.f1 - t2.c.f1),
                        std::fabs(t1.i.f1 - t2.i.f1)});

      const auto m1 = cardinality_mae(pred_m, gt_m);
      const auto m2 = cardinality_mae(reorder(pred_m), reorder(gt_m));
      worst = std::max({worst, std::fabs(m1.first - m2.first), std::fabs(m1.second - m2.second)});
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst < 1e-9 && fails == 0 && secs < 120.0;
  return {pass, "500 cases, worst drift " + fmt(worst) + ", " + std::to_string(fails) +
                    " inference mismatches, " + fmt(secs) + " s"};
}

}  // namespace

// Pinned by the pilot runs recorded in docs/pilots.md.
namespace pilot {

const std::vector<std::size_t> kDetectHidden = {256, 256};
constexpr double kDetectLr = 0.005;
constexpr double kDetectLrDecay = 0.97;
constexpr std::size_t kDetectEpochs = 40;
constexpr std::size_t kOcclusionEpochs = 120;
constexpr double kOcclusionLrDecay = 0.98;

const std::vector<std::size_t> kCaptchaHidden = {128, 128};
constexpr double kCaptchaLr = 0.005;
constexpr std::size_t kCaptchaEpochs = 15;
constexpr double kCaptchaU = 2.0;

const std::vector<std::size_t> kTagHidden = {64, 64};
constexpr double kTagLr = 0.01;
constexpr std::size_t kTagEpochs = 15;
constexpr double kTagU = 2.36;

const std::vector<std::size_t> kPermHidden = {64, 64};
constexpr double kPermLr = 0.002;
constexpr double kPermWeightDecay = 0.003;
constexpr double kPermStateWeight = 3.0;
constexpr std::size_t kPermEpochs = 30;

}  // namespace pilot

namespace {

using namespace setpred;

TrainConfig base_tcfg(double lr, double lr_decay, std::size_t epochs, std::uint64_t seed) {
  TrainConfig t;
  t.lr = lr;
  t.momentum = 0.9;
  t.weight_decay = 5e-4;
  t.lr_decay = lr_decay;
  t.batch = 8;
  t.epochs = epochs;
  t.seed = seed;
  return t;
}

Mlp make_net(std::size_t in_dim, const std::vector<std::size_t>& hidden, std::size_t out_dim,
             std::uint64_t seed) {
  std::vector<std::size_t> widths;
  widths.push_back(in_dim);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out_dim);
  return Mlp(widths, seed);
}

struct TrainedEval {
  EvalReport report;
  TrainResult result;
};

TrainedEval train_and_eval(Scenario sc, const std::vector<TrainInstance>& train_set,
                           const std::vector<TrainInstance>& test_set, const HeadLayout& layout,
                           const std::vector<std::size_t>& hidden, const TrainConfig& tcfg,
                           const LossCfg& lcfg, const InferenceConfig& icfg) {
  Mlp net = make_net(train_set.front().input.size(), hidden, layout.output_dim(), tcfg.seed);
  TrainedEval out;
  out.result = train(sc, train_set, net, layout, tcfg, lcfg);
  out.report = evaluate(net, test_set, layout, icfg);
  return out;
}

std::vector<TrainInstance> prepared_detect(const DetectCfg& gen, const HeadLayout& layout) {
  return prepare_instances(gen_toy_detection(gen), layout);
}

// ---------------------------------------------------------------------------
// Criterion 5: matching-based training beats storage-order targets.

Outcome criterion_orderless_training() {
  const auto t0 = Clock::now();
  const HeadLayout layout3 =
      HeadLayout::make(Task::detect, Scenario::uniform_perm, CardKind::categorical, 5, 4);
  const HeadLayout layout1 =
      HeadLayout::make(Task::detect, Scenario::fixed_order, CardKind::categorical, 5, 4);
  DetectCfg gen;
  gen.n = 5000;
  gen.max_objects = 5;
  gen.overlap_level = 0.4;
  gen.seed = 1001;
  const std::vector<TrainInstance> train_set = prepared_detect(gen, layout3);
  gen.n = 500;
  gen.seed = 1002;
  const std::vector<TrainInstance> test_set = prepared_detect(gen, layout3);

  double s3_sum = 0.0, s1_sum = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const TrainConfig tcfg =
        base_tcfg(pilot::kDetectLr, pilot::kDetectLrDecay, pilot::kDetectEpochs, seed);
    const double f3 = train_and_eval(Scenario::uniform_perm, train_set, test_set, layout3,
                                     pilot::kDetectHidden, tcfg, LossCfg{}, InferenceConfig{})
                          .report.detection.best_f1;
    const double f1 = train_and_eval(Scenario::fixed_order, train_set, test_set, layout1,
                                     pilot::kDetectHidden, tcfg, LossCfg{}, InferenceConfig{})
                          .report.detection.best_f1;
    s3_sum += f3;
    s1_sum += f1;
    per_seed += " seed" + std::to_string(seed) + " " + fmt(f3) + " vs " + fmt(f1);
  }
  const double gap = (s3_sum - s1_sum) / 3.0;
  const double secs = seconds_since(t0);
  const bool pass = gap >= 0.15 && secs < 900.0;
  return {pass,
          "mean F1 gap " + fmt(gap) + " (need >= 0.15)," + per_seed + ", " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 6: high absolute F1 on the heavier-overlap split.

Outcome criterion_occlusion() {
  const auto t0 = Clock::now();
  const HeadLayout layout =
      HeadLayout::make(Task::detect, Scenario::uniform_perm, CardKind::categorical, 5, 4);
  DetectCfg gen;
  gen.n = 5000;
  gen.max_objects = 5;
  gen.overlap_level = 0.6;
  gen.seed = 2001;
  const std::vector<TrainInstance> train_set = prepared_detect(gen, layout);
  gen.n = 500;
  gen.seed = 2002;
  const std::vector<TrainInstance> test_set = prepared_detect(gen, layout);
  const TrainConfig tcfg =
      base_tcfg(pilot::kDetectLr, pilot::kOcclusionLrDecay, pilot::kOcclusionEpochs, 0);
  const double f1 = train_and_eval(Scenario::uniform_perm, train_set, test_set, layout,
                                   pilot::kDetectHidden, tcfg, LossCfg{}, InferenceConfig{})
                        .report.detection.best_f1;
  const double secs = seconds_since(t0);
  const bool pass = f1 >= 0.80;
  return {pass, "overlap-0.6 best F1 " + fmt(f1) + " (need >= 0.8), " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 7: the subset-sum task needs the query; the set model clears 0.70
// and beats a query-blind twin by 0.30.

std::vector<TrainInstance> query_blind(std::vector<TrainInstance> data) {
  const std::size_t tile = kCaptchaQuerySide * kCaptchaQuerySide;
  for (TrainInstance& inst : data)
    std::fill(inst.input.end() - static_cast<std::ptrdiff_t>(tile), inst.input.end(), 0.0);
  return data;
}

Outcome criterion_captcha() {
  const auto t0 = Clock::now();
  const HeadLayout layout =
      HeadLayout::make(Task::captcha, Scenario::uniform_perm, CardKind::categorical, 4, 4);
  const Dataset train_raw = gen_captcha(20000, 4, 3001);
  const Dataset test_raw = gen_captcha(2000, 4, 3002);
  std::size_t unique_ok = 0;
  for (const Instance& inst : train_raw) unique_ok += verify_unique_solution(inst);
  for (const Instance& inst : test_raw) unique_ok += verify_unique_solution(inst);
  const bool all_unique = unique_ok == train_raw.size() + test_raw.size();

  const std::vector<TrainInstance> train_set = prepare_instances(train_raw, layout);
  const std::vector<TrainInstance> test_set = prepare_instances(test_raw, layout);
  const TrainConfig tcfg = base_tcfg(pilot::kCaptchaLr, 0.95, pilot::kCaptchaEpochs, 0);
  InferenceConfig icfg;
  icfg.U = pilot::kCaptchaU;
  const double acc = train_and_eval(Scenario::uniform_perm, train_set, test_set, layout,
                                    pilot::kCaptchaHidden, tcfg, LossCfg{}, icfg)
                         .report.accuracy;
  const double blind_acc =
      train_and_eval(Scenario::uniform_perm, query_blind(train_set), query_blind(test_set), layout,
                     pilot::kCaptchaHidden, tcfg, LossCfg{}, icfg)
          .report.accuracy;
  const double secs = seconds_since(t0);
  const bool pass = all_unique && acc >= 0.70 && acc - blind_acc >= 0.30 && secs < 1800.0;
  return {pass, "accuracy " + fmt(acc) + " vs query-blind " + fmt(blind_acc) + ", unique " +
                    std::to_string(unique_ok) + "/" +
                    std::to_string(train_raw.size() + test_raw.size()) + ", " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 8: tagging cardinality error, joint head vs cardinality-only.

Outcome criterion_tagging_mae() {
  const auto t0 = Clock::now();
  const HeadLayout layout =
      HeadLayout::make(Task::tagging, Scenario::fixed_order, CardKind::categorical, 8, 0);
  const std::vector<TrainInstance> train_set =
      prepare_instances(gen_multilabel(4000, 8, 4001), layout);
  const std::vector<TrainInstance> test_set =
      prepare_instances(gen_multilabel(1000, 8, 4002), layout);
  const TrainConfig tcfg = base_tcfg(pilot::kTagLr, 0.95, pilot::kTagEpochs, 0);
  InferenceConfig icfg;
  icfg.U = pilot::kTagU;
  const EvalReport joint = train_and_eval(Scenario::fixed_order, train_set, test_set, layout,
                                          pilot::kTagHidden, tcfg, LossCfg{}, icfg)
                               .report;
  LossCfg card_only;
  card_only.w_state = 0.0;
  const EvalReport head_only = train_and_eval(Scenario::fixed_order, train_set, test_set, layout,
                                              pilot::kTagHidden, tcfg, card_only, icfg)
                                   .report;
  const double secs = seconds_since(t0);
  const bool pass = joint.mae_mean < 0.5 && joint.mae_mean <= head_only.mae_mean;
  return {pass, "joint MAE " + fmt(joint.mae_mean) + " +- " + fmt(joint.mae_std) +
                    ", cardinality-only MAE " + fmt(head_only.mae_mean) + ", " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 9: the learned permutation head concentrates on a planted order
// and stays spread on an orderless one.

double top1_weight(Scenario sc, DetectOrder order, const HeadLayout& layout) {
  DetectCfg gen;
  gen.n = 600;
  gen.min_objects = 4;
  gen.max_objects = 4;
  gen.overlap_level = 0.0;
  gen.order = order;
  gen.seed = 6001;
  const std::vector<TrainInstance> train_set = prepared_detect(gen, layout);
  TrainConfig tcfg = base_tcfg(pilot::kPermLr, 0.97, pilot::kPermEpochs, 0);
  tcfg.weight_decay = pilot::kPermWeightDecay;
  // The state-cost weights decide whether the sampled permutation tracks the
  // instance geometry or the permutation head's own cross-entropy term. At
  // w1 = w2 = 3 the geometry can veto a spurious head preference on orderless
  // data while a data-supported order still locks in; by w1 = w2 = 4 even a
  // planted order is overridden per instance and both histograms spread.
  LossCfg lcfg;
  lcfg.w1 = pilot::kPermStateWeight;
  lcfg.w2 = pilot::kPermStateWeight;
  Mlp net =
      make_net(train_set.front().input.size(), pilot::kPermHidden, layout.output_dim(), tcfg.seed);
  const TrainResult result = train(sc, train_set, net, layout, tcfg, lcfg);
  const std::vector<DominantPerm> top = global_dominant_permutations(result.hist, 1, layout.M);
  return top.empty() ? 0.0 : top.front().weight;
}

Outcome criterion_perm_discovery() {
  const auto t0 = Clock::now();
  const HeadLayout layout =
      HeadLayout::make(Task::detect, Scenario::learned_perm, CardKind::categorical, 4, 4);
  const double planted = top1_weight(Scenario::learned_perm, DetectOrder::sorted_x, layout);
  const double orderless = top1_weight(Scenario::learned_perm, DetectOrder::shuffled, layout);
  const double secs = seconds_since(t0);
  const bool pass = planted > 0.5 && orderless < 0.5;
  return {pass, "planted top-1 weight " + fmt(planted) + " (need > 0.5), orderless " +
                    fmt(orderless) + " (need < 0.5), " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 10: bit-identical checkpoints and reports across repeat runs.

Outcome criterion_determinism() {
  const auto t0 = Clock::now();
  RunConfig cfg;
  cfg.task = "detect";
  cfg.scenario = 3;
  cfg.max_card = 5;
  cfg.hidden = {32};
  cfg.lr = 0.01;
  cfg.epochs = 3;
  cfg.n = 200;
  validate_config(cfg);
  const HeadLayout layout = config_layout(cfg);
  DetectCfg gen;
  gen.n = cfg.n;
  gen.max_objects = cfg.max_objects;
  gen.overlap_level = 0.3;
  gen.seed = 5001;
  const std::vector<TrainInstance> train_set = prepared_detect(gen, layout);
  const std::vector<TrainInstance> test_set = prepared_detect(gen, layout);

  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "setpred_acceptance";
  std::filesystem::create_directories(dir);

  std::string ckpt_bytes[2], report_bytes[2];
  std::vector<RunLogRow> rows[2];
  for (int round = 0; round < 2; ++round) {
    Mlp net = make_net(train_set.front().input.size(), cfg.hidden, layout.output_dim(), cfg.seed);
    const TrainResult result =
        train(config_scenario(cfg), train_set, net, layout, config_train(cfg), config_loss(cfg));
    rows[round] = result.log.rows;
    Checkpoint ckpt{layout, net, config_kv(cfg), config_hash(cfg)};
    const std::string ckpt_path = (dir / ("determinism" + std::to_string(round) + ".json")).string();
    save_checkpoint(ckpt, ckpt_path);
    ckpt_bytes[round] = read_text_file(ckpt_path);
    const EvalReport rep = evaluate(net, test_set, layout, config_inference(cfg));
    const std::string rep_path = (dir / ("determinism" + std::to_string(round) + ".csv")).string();
    write_report_csv(rep, config_hash(cfg), rep_path);
    report_bytes[round] = read_text_file(rep_path);
  }
  bool rows_equal = rows[0].size() == rows[1].size();
  if (rows_equal)
    for (std::size_t r = 0; r < rows[0].size(); ++r) {
      // assign_ms is wall-clock timing and legitimately differs between runs.
      rows_equal = rows_equal && rows[0][r].total == rows[1][r].total &&
                   rows[0][r].card == rows[1][r].card && rows[0][r].state == rows[1][r].state &&
                   rows[0][r].perm == rows[1][r].perm &&
                   rows[0][r].identity_total == rows[1][r].identity_total;
    }
  const bool ckpt_equal = !ckpt_bytes[0].empty() && ckpt_bytes[0] == ckpt_bytes[1];
  const bool report_equal = !report_bytes[0].empty() && report_bytes[0] == report_bytes[1];
  const double secs = seconds_since(t0);
  const bool pass = ckpt_equal && report_equal && rows_equal;
  return {pass, std::string("checkpoint bytes ") + (ckpt_equal ? "identical" : "differ") +
                    ", report bytes " + (report_equal ? "identical" : "differ") +
                    ", loss trace " + (rows_equal ? "identical" : "differs") + ", " + fmt(secs) +
                    " s"};
}

}  // namespace

int main(int argc, char** argv) {
  using Criterion = Outcome (*)();
  const std::vector<std::pair<std::string, Criterion>> criteria = {
      {"assignment oracle", criterion_assignment_oracle},
      {"inference oracle", criterion_inference_oracle},
      {"gradient suite", criterion_gradient_suite},
      {"set invariance", criterion_set_invariance},
      {"orderless training", criterion_orderless_training},
      {"occlusion robustness", criterion_occlusion},
      {"subset-sum captcha", criterion_captcha},
      {"tagging cardinality error", criterion_tagging_mae},
      {"permutation discovery", criterion_perm_discovery},
      {"determinism", criterion_determinism},
  };
  std::set<std::size_t> selected;
  for (int a = 1; a < argc; ++a) selected.insert(static_cast<std::size_t>(std::atoi(argv[a])));
  bool all_pass = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!selected.empty() && !selected.count(k + 1)) continue;
    const Outcome o = criteria[k].second();
    all_pass = all_pass && o.pass;
    std::printf("[%s] criterion %zu: %s (%s)\n", o.pass ? "PASS" : "FAIL", k + 1,
                criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
