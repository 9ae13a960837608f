#include "setpred/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "setpred/io.hpp"

namespace setpred {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<std::size_t> identity_perm(std::size_t m) {
  std::vector<std::size_t> pi(m);
  std::iota(pi.begin(), pi.end(), 0);
  return pi;
}

void check_task_shape(const Dataset& data, const HeadLayout& layout) {
  for (const Instance& inst : data) {
    const bool tagging_row = inst.elements.empty() && !inst.labels.empty();
    if (layout.task == Task::tagging) {
      if (!tagging_row && !(inst.labels.empty() && inst.elements.empty()))
        throw ConfigError("dataset rows carry boxes but the head expects labels");
    } else if (tagging_row) {
      throw ConfigError("dataset rows carry labels but the head expects boxes");
    }
  }
}

}  // namespace

std::vector<TrainInstance> prepare_instances(const Dataset& data, const HeadLayout& layout) {
  check_task_shape(data, layout);
  std::vector<TrainInstance> out;
  out.reserve(data.size());
  for (const Instance& inst : data) {
    TrainInstance t;
    t.id = inst.id;
    t.input = inst.input;
    t.canvas_w = inst.w;
    t.canvas_h = inst.h;
    t.gt = instance_ground_truth(inst, layout.task);
    if (t.gt.m() > layout.M)
      throw ConfigError("instance " + std::to_string(inst.id) +
                        " has cardinality above the head's M");
    out.push_back(std::move(t));
  }
  return out;
}

TrainResult train(Scenario scenario, const std::vector<TrainInstance>& data, Mlp& net,
                  const HeadLayout& layout, const TrainConfig& tcfg, const LossCfg& lcfg,
                  const EpochCallback& per_epoch) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (layout.scenario != scenario)
    throw ConfigError("train: layout scenario does not match requested scenario");
  if (scenario == Scenario::learned_perm && layout.M > 6)
    throw ConfigError("train: scenario 2 supports M <= 6");
  for (const TrainInstance& t : data)
    if (t.input.size() != net.widths().front())
      throw ConfigError("train: input width does not match the network");
  if (net.widths().back() != layout.output_dim())
    throw ConfigError("train: network output width does not match the head layout");

  const auto t_start = Clock::now();
  TrainResult result;
  Rng rng(splitmix64(tcfg.seed ^ 0x7261696eULL));
  SgdState sgd = SgdState::zeros_like(net);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  std::size_t iter = 0;
  double lr = tcfg.lr;
  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_total = 0.0;
    std::size_t epoch_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch) {
      const std::size_t stop = std::min(order.size(), start + tcfg.batch);
      const double inv = 1.0 / static_cast<double>(stop - start);
      MlpGrads grads = net.zero_grads();
      RunLogRow row;
      row.iter = iter;
      for (std::size_t k = start; k < stop; ++k) {
        const TrainInstance& inst = data[order[k]];
        const ForwardTrace trace = tcfg.dropout > 0.0
                                       ? net.forward_dropout(inst.input, tcfg.dropout, rng)
                                       : net.forward(inst.input);
        // Catches runaway weights before the loss heads hit exp overflow or
        // degenerate decoded boxes.
        for (double v : trace.acts.back())
          if (!std::isfinite(v) || std::fabs(v) > 1e6)
            throw DivergenceError("network output diverged", static_cast<long long>(iter));
        NetworkOutput out{&layout, trace.acts.back()};
        LossResult loss;
        if (scenario == Scenario::fixed_order) {
          loss = scenario1_loss(out, inst.gt, lcfg);
          row.identity_total += loss.total;
        } else if (scenario == Scenario::uniform_perm) {
          std::vector<std::size_t> pi;
          if (inst.gt.m() > 0) {
            const auto t_assign = Clock::now();
            const CostMatrix cost = build_cost_matrix(out, inst.gt, lcfg);
            pi = sample_permutation_s3(cost).perm;
            row.assign_ms += ms_since(t_assign);
          }
          loss = scenario3_loss(out, inst.gt, pi, lcfg);
          row.identity_total +=
              scenario3_loss(out, inst.gt, identity_perm(inst.gt.m()), lcfg).total;
        } else {
          const auto t_assign = Clock::now();
          const CostMatrix cost = build_cost_matrix(out, inst.gt, lcfg);
          const AssignmentResult pick =
              sample_permutation_s2(cost, out.perm_logits(), inst.gt.m());
          row.assign_ms += ms_since(t_assign);
          loss = scenario2_loss(out, inst.gt, pick.perm, lcfg);
          update_histogram(result.hist, inst.id, pick.perm);
          row.identity_total += loss.total;
        }
        row.total += loss.total;
        row.card += loss.card;
        row.state += loss.state;
        row.perm += loss.perm;
        grads.add_scaled(net.backward(trace, loss.d_out), inv);
      }
      row.total *= inv;
      row.card *= inv;
      row.state *= inv;
      row.perm *= inv;
      row.identity_total *= inv;
      if (!std::isfinite(row.total) || row.total > 1e6)
        throw DivergenceError("training loss diverged", static_cast<long long>(iter));
      sgd_step(net, grads, sgd, lr, tcfg.momentum, tcfg.weight_decay);
      epoch_total += row.total;
      ++epoch_batches;
      result.log.rows.push_back(row);
      ++iter;
    }
    result.log.epochs.push_back(
        {epoch, epoch_total / static_cast<double>(epoch_batches), lr});
    if (per_epoch) per_epoch(epoch, net);
    lr *= tcfg.lr_decay;
  }
  result.log.wall_seconds =
      std::chrono::duration<double>(Clock::now() - t_start).count();
  return result;
}

InferredSet infer_instance(const Mlp& net, const TrainInstance& inst,
                           const HeadLayout& layout, const InferenceConfig& icfg) {
  const ForwardTrace trace = net.forward(inst.input);
  const NetworkOutput out{&layout, trace.acts.back()};
  const PredictedSet ps = run_inference(out, icfg);
  InferredSet inf;
  inf.m_star = ps.m_star;
  for (const PredictedElement& e : ps.elements) {
    inf.scores.push_back(e.score);
    if (layout.state_dim == 0) {
      inf.labels.push_back(e.slot);
    } else {
      inf.boxes.push_back(
          denormalize_box(decode_slot_box(e.state), inst.canvas_w, inst.canvas_h));
    }
  }
  return inf;
}

EvalReport evaluate(const Mlp& net, const std::vector<TrainInstance>& data,
                    const HeadLayout& layout, const InferenceConfig& icfg,
                    double iou_thresh) {
  EvalReport report;
  report.task = layout.task;
  std::vector<std::size_t> pred_m, gt_m;
  std::vector<std::vector<std::size_t>> pred_labels, gt_labels;
  std::vector<std::vector<AABox>> pred_boxes, gt_boxes;
  std::vector<std::vector<ScoredBox>> ranked;

  for (const TrainInstance& inst : data) {
    if (inst.input.size() != net.widths().front())
      throw ConfigError("evaluate: input width does not match the network");
    const InferredSet inf = infer_instance(net, inst, layout, icfg);
    pred_m.push_back(inf.m_star);
    gt_m.push_back(inst.gt.m());
    if (layout.task == Task::tagging) {
      pred_labels.push_back(inf.labels);
      gt_labels.push_back(inst.gt.labels);
      continue;
    }
    pred_boxes.push_back(inf.boxes);
    std::vector<AABox> g;
    for (const auto& s : inst.gt.states)
      g.push_back(denormalize_box({s[0], s[1], s[2], s[3]}, inst.canvas_w, inst.canvas_h));
    gt_boxes.push_back(std::move(g));
    if (layout.task == Task::detect) {
      const ForwardTrace trace = net.forward(inst.input);
      const NetworkOutput out{&layout, trace.acts.back()};
      std::vector<ScoredBox> r;
      for (std::size_t s = 0; s < layout.M; ++s)
        r.push_back({denormalize_box(decode_slot_box(out.slot_state(s)), inst.canvas_w,
                                     inst.canvas_h),
                     sigmoid(out.slot_logit(s))});
      ranked.push_back(std::move(r));
    }
  }

  const auto mae = cardinality_mae(pred_m, gt_m);
  report.mae_mean = mae.first;
  report.mae_std = mae.second;
  switch (layout.task) {
    case Task::tagging:
      report.tagging = prf_multilabel(pred_labels, gt_labels, layout.M);
      break;
    case Task::detect:
      report.detection = detection_pr(ranked, gt_boxes, iou_thresh);
      report.set_level = detection_set_prf(pred_boxes, gt_boxes, iou_thresh);
      break;
    case Task::captcha:
      report.accuracy = captcha_accuracy(pred_boxes, gt_boxes);
      break;
  }
  return report;
}

std::string RunLog::to_csv(const std::string& config_hash) const {
  std::ostringstream ss;
  ss << "iter,total,card,state,perm,identity_total,assign_ms,config_hash\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RunLogRow& r = rows[i];
    ss << r.iter << "," << fmt_double(r.total) << "," << fmt_double(r.card) << ","
       << fmt_double(r.state) << "," << fmt_double(r.perm) << ","
       << fmt_double(r.identity_total) << "," << fmt_double(r.assign_ms) << ","
       << (i == 0 ? config_hash : "") << "\n";
  }
  return ss.str();
}

}  // namespace setpred
