#include "setpred/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "setpred/assignment.hpp"

namespace setpred {

namespace {

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double f1_of(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

// Maximum one-to-one matching count between pred and gt boxes with IoU above
// the threshold, via min-cost assignment with inadmissible pairs at sentinel
// cost.
std::size_t matched_count(const std::vector<AABox>& pred, const std::vector<AABox>& gt,
                          double thresh) {
  if (pred.empty() || gt.empty()) return 0;
  const bool pred_rows = pred.size() <= gt.size();
  const std::vector<AABox>& rows = pred_rows ? pred : gt;
  const std::vector<AABox>& cols = pred_rows ? gt : pred;
  const double kMiss = 10.0;
  CostMatrix cost(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double v = iou(rows[r], cols[c]);
      cost.at(r, c) = v > thresh ? 1.0 - v : kMiss;
    }
  const AssignmentResult res = hungarian(cost);
  std::size_t matched = 0;
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (cost.at(r, res.perm[r]) < kMiss) ++matched;
  return matched;
}

}  // namespace

MultilabelPrf prf_multilabel(const std::vector<std::vector<std::size_t>>& preds,
                             const std::vector<std::vector<std::size_t>>& gts,
                             std::size_t num_labels) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("prf_multilabel: list length mismatch");
  const std::size_t n = preds.size();
  std::vector<double> tp(num_labels, 0.0), fp(num_labels, 0.0), fn(num_labels, 0.0);
  double i_p_sum = 0.0, i_r_sum = 0.0;

  for (std::size_t img = 0; img < n; ++img) {
    std::vector<char> in_pred(num_labels, 0), in_gt(num_labels, 0);
    for (std::size_t lab : preds[img]) {
      if (lab >= num_labels) throw std::invalid_argument("prf_multilabel: label out of range");
      in_pred[lab] = 1;
    }
    for (std::size_t lab : gts[img]) {
      if (lab >= num_labels) throw std::invalid_argument("prf_multilabel: label out of range");
      in_gt[lab] = 1;
    }
    double inter = 0.0;
    for (std::size_t c = 0; c < num_labels; ++c) {
      if (in_pred[c] && in_gt[c]) {
        tp[c] += 1.0;
        inter += 1.0;
      } else if (in_pred[c]) {
        fp[c] += 1.0;
      } else if (in_gt[c]) {
        fn[c] += 1.0;
      }
    }
    i_p_sum += safe_div(inter, static_cast<double>(preds[img].size()));
    i_r_sum += safe_div(inter, static_cast<double>(gts[img].size()));
  }

  MultilabelPrf out;
  double cp_sum = 0.0, cr_sum = 0.0;
  std::size_t present = 0;
  double tp_all = 0.0, fp_all = 0.0, fn_all = 0.0;
  for (std::size_t c = 0; c < num_labels; ++c) {
    tp_all += tp[c];
    fp_all += fp[c];
    fn_all += fn[c];
    if (tp[c] + fn[c] == 0.0) continue;  // class absent from every gt
    ++present;
    cp_sum += safe_div(tp[c], tp[c] + fp[c]);
    cr_sum += safe_div(tp[c], tp[c] + fn[c]);
  }
  out.c.p = safe_div(cp_sum, static_cast<double>(present));
  out.c.r = safe_div(cr_sum, static_cast<double>(present));
  out.c.f1 = f1_of(out.c.p, out.c.r);
  out.o.p = safe_div(tp_all, tp_all + fp_all);
  out.o.r = safe_div(tp_all, tp_all + fn_all);
  out.o.f1 = f1_of(out.o.p, out.o.r);
  out.i.p = safe_div(i_p_sum, static_cast<double>(n));
  out.i.r = safe_div(i_r_sum, static_cast<double>(n));
  out.i.f1 = f1_of(out.i.p, out.i.r);
  return out;
}

std::pair<double, double> cardinality_mae(const std::vector<std::size_t>& pred,
                                          const std::vector<std::size_t>& gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("cardinality_mae: length mismatch");
  if (pred.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(pred.size());
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = std::fabs(static_cast<double>(pred[i]) - static_cast<double>(gt[i]));
    sum += d;
    sq += d * d;
  }
  const double mean = sum / n;
  const double var = std::max(0.0, sq / n - mean * mean);
  return {mean, std::sqrt(var)};
}

DetectionScores detection_pr(const std::vector<std::vector<ScoredBox>>& preds,
                             const std::vector<std::vector<AABox>>& gts,
                             double iou_thresh) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("detection_pr: list length mismatch");
  const std::size_t n_img = preds.size();
  double total_gt = 0.0;
  for (const auto& g : gts) total_gt += static_cast<double>(g.size());

  struct Flat {
    std::size_t img;
    std::size_t idx;
    double score;
  };
  std::vector<Flat> flat;
  for (std::size_t img = 0; img < n_img; ++img)
    for (std::size_t idx = 0; idx < preds[img].size(); ++idx)
      flat.push_back({img, idx, preds[img][idx].score});
  std::stable_sort(flat.begin(), flat.end(),
                   [](const Flat& a, const Flat& b) { return a.score > b.score; });

  DetectionScores out;
  if (total_gt == 0.0) {
    out.ap = flat.empty() ? 1.0 : 0.0;
    out.best_f1 = flat.empty() ? 1.0 : 0.0;
    out.mr = flat.empty() ? 1e-4 : 1.0;
    return out;
  }

  std::vector<std::vector<char>> gt_used(n_img);
  for (std::size_t img = 0; img < n_img; ++img) gt_used[img].assign(gts[img].size(), 0);

  std::vector<double> recall, precision, fppi, miss;
  double tp = 0.0, fp = 0.0;
  for (const Flat& f : flat) {
    const AABox& pb = preds[f.img][f.idx].box;
    double best = 0.0;
    std::size_t best_g = 0;
    bool found = false;
    for (std::size_t g = 0; g < gts[f.img].size(); ++g) {
      if (gt_used[f.img][g]) continue;
      const double v = iou(pb, gts[f.img][g]);
      if (v >= iou_thresh && v > best) {
        best = v;
        best_g = g;
        found = true;
      }
    }
    if (found) {
      gt_used[f.img][best_g] = 1;
      tp += 1.0;
    } else {
      fp += 1.0;
    }
    recall.push_back(tp / total_gt);
    precision.push_back(tp / (tp + fp));
    fppi.push_back(fp / static_cast<double>(n_img));
    miss.push_back(1.0 - tp / total_gt);
  }

  // All-point interpolated AP via the monotone precision envelope.
  double ap = 0.0, env = 0.0, prev_r = 0.0;
  std::vector<double> envp(precision.size(), 0.0);
  for (std::size_t k = precision.size(); k-- > 0;) {
    env = std::max(env, precision[k]);
    envp[k] = env;
  }
  for (std::size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - prev_r) * envp[k];
    prev_r = recall[k];
  }
  out.ap = ap;

  double best_f1 = 0.0;
  for (std::size_t k = 0; k < precision.size(); ++k)
    best_f1 = std::max(best_f1, f1_of(precision[k], recall[k]));
  out.best_f1 = best_f1;

  double log_sum = 0.0;
  for (int p = 0; p < 9; ++p) {
    const double ref = std::pow(10.0, -2.0 + 2.0 * p / 8.0);
    double m = 1.0;  // no detections fall below every FPPI bound
    for (std::size_t k = 0; k < fppi.size(); ++k)
      if (fppi[k] <= ref) m = std::min(m, miss[k]);
    m = std::min(1.0, std::max(1e-4, m));
    log_sum += std::log(m);
  }
  out.mr = std::exp(log_sum / 9.0);
  return out;
}

PrfTriple detection_set_prf(const std::vector<std::vector<AABox>>& preds,
                            const std::vector<std::vector<AABox>>& gts,
                            double iou_thresh) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("detection_set_prf: list length mismatch");
  double tp = 0.0, n_pred = 0.0, n_gt = 0.0;
  for (std::size_t img = 0; img < preds.size(); ++img) {
    tp += static_cast<double>(matched_count(preds[img], gts[img], iou_thresh));
    n_pred += static_cast<double>(preds[img].size());
    n_gt += static_cast<double>(gts[img].size());
  }
  PrfTriple out;
  out.p = safe_div(tp, n_pred);
  out.r = safe_div(tp, n_gt);
  out.f1 = f1_of(out.p, out.r);
  return out;
}

double captcha_accuracy(const std::vector<std::vector<AABox>>& preds,
                        const std::vector<std::vector<AABox>>& gts) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("captcha_accuracy: list length mismatch");
  if (preds.empty()) return 0.0;
  double correct = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].size() != gts[i].size()) continue;
    if (preds[i].empty() ||
        matched_count(preds[i], gts[i], 0.5) == preds[i].size())
      correct += 1.0;
  }
  return correct / static_cast<double>(preds.size());
}

std::vector<std::pair<std::string, double>> EvalReport::rows() const {
  std::vector<std::pair<std::string, double>> r;
  switch (task) {
    case Task::tagging:
      r = {{"C-P", tagging.c.p},   {"C-R", tagging.c.r},   {"C-F1", tagging.c.f1},
           {"O-P", tagging.o.p},   {"O-R", tagging.o.r},   {"O-F1", tagging.o.f1},
           {"I-P", tagging.i.p},   {"I-R", tagging.i.r},   {"I-F1", tagging.i.f1}};
      break;
    case Task::detect:
      r = {{"AP", detection.ap},
           {"best-F1", detection.best_f1},
           {"MR", detection.mr},
           {"set-P", set_level.p},
           {"set-R", set_level.r},
           {"set-F1", set_level.f1}};
      break;
    case Task::captcha:
      r = {{"accuracy", accuracy}};
      break;
  }
  r.emplace_back("card-MAE", mae_mean);
  r.emplace_back("card-MAE-std", mae_std);
  return r;
}

}  // namespace setpred
