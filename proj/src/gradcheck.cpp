#include "setpred/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "setpred/set_loss.hpp"

namespace setpred {

namespace {

constexpr double kEps = 1e-5;
constexpr double kKinkMargin = 1e-3;

// The 1e-6 floor absorbs central-difference rounding noise (~1e-10 at step
// 1e-5) when the true derivative is exactly zero, e.g. GIoU under a shift of
// a box lying strictly inside the other.
double rel_err(double analytic, double numeric) {
  return std::fabs(analytic - numeric) /
         std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
}

// Central-difference check of a scalar function of a parameter vector.
double fd_check(const std::function<double(const std::vector<double>&)>& value,
                const std::vector<double>& params, const std::vector<double>& analytic) {
  double worst = 0.0;
  std::vector<double> probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    probe[i] = params[i] + kEps;
    const double up = value(probe);
    probe[i] = params[i] - kEps;
    const double down = value(probe);
    probe[i] = params[i];
    worst = std::max(worst, rel_err(analytic[i], (up - down) / (2.0 * kEps)));
  }
  return worst;
}

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

double check_card(CardKind kind, Rng& rng) {
  CardinalityHead head;
  head.kind = kind;
  const std::size_t M = 3 + static_cast<std::size_t>(rng.uniform_int(0, 3));
  head.alpha = random_vec(rng, card_param_count(kind, M), -2.0, 2.0);
  const std::size_t m = static_cast<std::size_t>(
      rng.uniform_int(0, kind == CardKind::categorical ? static_cast<long long>(M) : 9));
  const ScalarGrad res = card_nll(head, m);
  return fd_check(
      [&](const std::vector<double>& a) {
        CardinalityHead h{kind, a};
        return card_nll(h, m).value;
      },
      head.alpha, res.grad);
}

double check_smooth_l1(Rng& rng) {
  const double delta = 1.0;
  std::vector<double> pred, target;
  do {
    pred = random_vec(rng, 4, -2.0, 2.0);
    target = random_vec(rng, 4, -2.0, 2.0);
  } while ([&] {
    for (std::size_t i = 0; i < 4; ++i)
      if (std::fabs(std::fabs(pred[i] - target[i]) - delta) < kKinkMargin) return true;
    return false;
  }());
  const ScalarGrad res = smooth_l1(pred, target, delta);
  return fd_check(
      [&](const std::vector<double>& p) { return smooth_l1(p, target, delta).value; },
      pred, res.grad);
}

// Branch boundaries of the GIoU loss: corner alignment and vanishing overlap.
bool giou_near_kink(const CenterBox& pred, const AABox& t) {
  const AABox p = pred.to_corners();
  for (double d : {p.x1 - t.x1, p.x2 - t.x2, p.y1 - t.y1, p.y2 - t.y2})
    if (std::fabs(d) < kKinkMargin) return true;
  const double iw = std::min(p.x2, t.x2) - std::max(p.x1, t.x1);
  const double ih = std::min(p.y2, t.y2) - std::max(p.y1, t.y1);
  return std::fabs(iw) < kKinkMargin || std::fabs(ih) < kKinkMargin;
}

double check_giou(Rng& rng) {
  CenterBox pred;
  AABox target;
  do {
    pred = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
            rng.uniform(0.2, 0.8)};
    const double cx = rng.uniform(0.2, 0.8), cy = rng.uniform(0.2, 0.8);
    const double w = rng.uniform(0.2, 0.8), h = rng.uniform(0.2, 0.8);
    target = CenterBox{cx, cy, w, h}.to_corners();
  } while (giou_near_kink(pred, target));
  const ScalarGrad res = giou_loss_grad(pred, target);
  return fd_check(
      [&](const std::vector<double>& p) {
        return giou_loss_grad({p[0], p[1], p[2], p[3]}, target).value;
      },
      {pred.cx, pred.cy, pred.w, pred.h}, res.grad);
}

GroundTruthSet random_gt(Rng& rng, const HeadLayout& layout, std::size_t m) {
  GroundTruthSet gt;
  if (layout.state_dim == 0) {
    std::vector<std::size_t> ids(layout.M);
    for (std::size_t i = 0; i < layout.M; ++i) ids[i] = i;
    rng.shuffle(ids);
    ids.resize(m);
    gt.labels = ids;
    return gt;
  }
  for (std::size_t j = 0; j < m; ++j) {
    gt.states.push_back({rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
                         rng.uniform(0.2, 0.6), rng.uniform(0.2, 0.6)});
    gt.labels.push_back(0);
  }
  return gt;
}

// The composite losses are checked through a small network, so kinks come from
// the rectifier units and the box-loss branches. Points too close to either
// are resampled.
bool composite_safe(const Mlp& net, const ForwardTrace& trace, const HeadLayout& layout,
                    const GroundTruthSet& gt) {
  for (std::size_t l = 0; l + 1 < trace.acts.size(); ++l) {
    if (l + 2 == trace.acts.size()) break;  // linear output layer has no kink
    const std::vector<double>& prev = trace.acts[l];
    const std::size_t out = net.widths()[l + 1];
    for (std::size_t o = 0; o < out; ++o) {
      double z = net.biases()[l][o];
      for (std::size_t i = 0; i < prev.size(); ++i)
        z += net.weights()[l][o * prev.size() + i] * prev[i];
      if (std::fabs(z) < kKinkMargin) return false;
    }
  }
  if (layout.state_dim == 0) return true;
  const NetworkOutput out{&layout, trace.acts.back()};
  for (std::size_t s = 0; s < layout.M; ++s) {
    const CenterBox pred = decode_slot_box(out.slot_state(s));
    for (std::size_t j = 0; j < gt.m(); ++j) {
      const std::vector<double>& t = gt.states[j];
      if (giou_near_kink(pred, CenterBox{t[0], t[1], t[2], t[3]}.to_corners()))
        return false;
      for (std::size_t k = 0; k < 4; ++k) {
        const double pv = k == 0 ? pred.cx : k == 1 ? pred.cy : k == 2 ? pred.w : pred.h;
        if (std::fabs(std::fabs(pv - t[k]) - 1.0) < kKinkMargin) return false;
      }
    }
  }
  return true;
}

double check_composite(Scenario scenario, Task task, Rng& rng) {
  const std::size_t M = scenario == Scenario::learned_perm ? 4 : 5;
  const HeadLayout layout =
      HeadLayout::make(task, scenario, CardKind::categorical, M,
                       task == Task::tagging ? 0 : 4);
  const std::size_t in_dim = 6;
  LossCfg lcfg;

  for (int attempt = 0; attempt < 200; ++attempt) {
    Mlp net({in_dim, 10, layout.output_dim()}, rng.next_u64());
    const std::vector<double> x = random_vec(rng, in_dim, -1.0, 1.0);
    const ForwardTrace trace = net.forward(x);
    const std::size_t m = static_cast<std::size_t>(rng.uniform_int(0, 3));
    const GroundTruthSet gt = random_gt(rng, layout, m);
    if (!composite_safe(net, trace, layout, gt)) continue;

    const NetworkOutput out{&layout, trace.acts.back()};
    std::vector<std::size_t> pi;
    if (scenario == Scenario::uniform_perm && m > 0)
      pi = sample_permutation_s3(build_cost_matrix(out, gt, lcfg)).perm;
    if (scenario == Scenario::learned_perm)
      pi = sample_permutation_s2(build_cost_matrix(out, gt, lcfg), out.perm_logits(), m)
               .perm;

    const OutputLoss loss = [&, pi](const std::vector<double>& flat) -> ScalarGrad {
      const NetworkOutput o{&layout, flat};
      LossResult r;
      switch (scenario) {
        case Scenario::fixed_order: r = scenario1_loss(o, gt, lcfg); break;
        case Scenario::learned_perm: r = scenario2_loss(o, gt, pi, lcfg); break;
        case Scenario::uniform_perm: r = scenario3_loss(o, gt, pi, lcfg); break;
      }
      return {r.total, r.d_out};
    };
    return grad_check(net, loss, x, kEps);
  }
  throw std::runtime_error("gradcheck: could not find a kink-free sample point");
}

void run_family(std::vector<GradCheckResult>& out, const std::string& name,
                std::size_t trials, Rng& rng, const std::function<double(Rng&)>& one) {
  GradCheckResult r;
  r.name = name;
  r.trials = trials;
  for (std::size_t t = 0; t < trials; ++t)
    r.max_rel_err = std::max(r.max_rel_err, one(rng));
  out.push_back(std::move(r));
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, std::size_t trials) {
  Rng rng(splitmix64(seed ^ 0x67726164ULL));
  std::vector<GradCheckResult> out;
  run_family(out, "card_nll_categorical", trials, rng,
             [](Rng& r) { return check_card(CardKind::categorical, r); });
  run_family(out, "card_nll_poisson", trials, rng,
             [](Rng& r) { return check_card(CardKind::poisson, r); });
  run_family(out, "card_nll_negbin", trials, rng,
             [](Rng& r) { return check_card(CardKind::negative_binomial, r); });
  run_family(out, "smooth_l1", trials, rng, check_smooth_l1);
  run_family(out, "giou_loss", trials, rng, check_giou);
  run_family(out, "scenario1_tagging", trials, rng, [](Rng& r) {
    return check_composite(Scenario::fixed_order, Task::tagging, r);
  });
  run_family(out, "scenario1_boxes", trials, rng, [](Rng& r) {
    return check_composite(Scenario::fixed_order, Task::detect, r);
  });
  run_family(out, "scenario2_boxes", trials, rng, [](Rng& r) {
    return check_composite(Scenario::learned_perm, Task::detect, r);
  });
  run_family(out, "scenario3_boxes", trials, rng, [](Rng& r) {
    return check_composite(Scenario::uniform_perm, Task::detect, r);
  });
  return out;
}

}  // namespace setpred
