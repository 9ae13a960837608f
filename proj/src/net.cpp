#include "setpred/net.hpp"

#include <cmath>
#include <stdexcept>

#include "setpred/assignment.hpp"

namespace setpred {

Task task_from_string(const std::string& s) {
  if (s == "tagging") return Task::tagging;
  if (s == "detect") return Task::detect;
  if (s == "captcha") return Task::captcha;
  throw ConfigError("unknown task: " + s);
}

std::string task_to_string(Task t) {
  switch (t) {
    case Task::tagging: return "tagging";
    case Task::detect: return "detect";
    case Task::captcha: return "captcha";
  }
  return "?";
}

std::size_t HeadLayout::perm_dim() const {
  if (scenario != Scenario::learned_perm) return 0;
  return static_cast<std::size_t>(factorial(M));
}

HeadLayout HeadLayout::make(Task task, Scenario scenario, CardKind kind, std::size_t M,
                            std::size_t state_dim) {
  if (M == 0) throw std::invalid_argument("HeadLayout: M must be positive");
  if (scenario == Scenario::learned_perm && M > 8)
    throw std::invalid_argument("HeadLayout: scenario 2 requires M <= 8");
  HeadLayout l;
  l.task = task;
  l.scenario = scenario;
  l.card_kind = kind;
  l.M = M;
  l.state_dim = state_dim;
  return l;
}

CardinalityHead NetworkOutput::card_head() const {
  CardinalityHead head;
  head.kind = layout->card_kind;
  head.alpha.assign(flat.begin(), flat.begin() + static_cast<long>(layout->card_dim()));
  return head;
}

std::vector<double> NetworkOutput::slot_state(std::size_t s) const {
  const std::size_t off = layout->slot_offset(s);
  return std::vector<double>(flat.begin() + static_cast<long>(off),
                             flat.begin() + static_cast<long>(off + layout->state_dim));
}

double NetworkOutput::slot_logit(std::size_t s) const {
  return flat[layout->logit_offset(s)];
}

std::vector<double> NetworkOutput::perm_logits() const {
  return std::vector<double>(flat.begin() + static_cast<long>(layout->perm_offset()),
                             flat.end());
}

void MlpGrads::add_scaled(const MlpGrads& other, double scale) {
  for (std::size_t l = 0; l < dW.size(); ++l) {
    for (std::size_t i = 0; i < dW[l].size(); ++i) dW[l][i] += scale * other.dW[l][i];
    for (std::size_t i = 0; i < db[l].size(); ++i) db[l][i] += scale * other.db[l][i];
  }
}

void MlpGrads::scale(double s) {
  for (auto& layer : dW)
    for (double& v : layer) v *= s;
  for (auto& layer : db)
    for (double& v : layer) v *= s;
}

Mlp::Mlp(std::vector<std::size_t> widths, std::uint64_t seed) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output");
  for (std::size_t w : widths_)
    if (w == 0) throw std::invalid_argument("Mlp: zero-width layer");
  Rng rng(splitmix64(seed ^ 0x5e7f00dULL));
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const std::size_t fan_in = widths_[l], fan_out = widths_[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_out * fan_in);
    for (double& v : w) v = rng.uniform(-bound, bound);
    W_.push_back(std::move(w));
    b_.emplace_back(fan_out, 0.0);
  }
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < W_.size(); ++l) n += W_[l].size() + b_[l].size();
  return n;
}

ForwardTrace Mlp::forward(const std::vector<double>& x) const {
  if (x.size() != widths_.front())
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  ForwardTrace t;
  t.acts.reserve(widths_.size());
  t.acts.push_back(x);
  for (std::size_t l = 0; l < W_.size(); ++l) {
    const std::size_t in = widths_[l], out = widths_[l + 1];
    const std::vector<double>& a = t.acts.back();
    std::vector<double> z(out);
    const double* w = W_[l].data();
    for (std::size_t o = 0; o < out; ++o) {
      double s = b_[l][o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
      z[o] = s;
    }
    if (l + 1 < W_.size())
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    t.acts.push_back(std::move(z));
  }
  return t;
}

ForwardTrace Mlp::forward_dropout(const std::vector<double>& x, double rate, Rng& rng) const {
  if (rate <= 0.0) return forward(x);
  if (rate >= 1.0) throw std::invalid_argument("Mlp: dropout rate must be < 1");
  ForwardTrace t;
  t.acts.push_back(x);
  t.dropout_mask.resize(W_.size());
  const double keep = 1.0 - rate;
  t.keep = keep;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    const std::size_t in = widths_[l], out = widths_[l + 1];
    const std::vector<double>& a = t.acts.back();
    std::vector<double> z(out);
    const double* w = W_[l].data();
    for (std::size_t o = 0; o < out; ++o) {
      double s = b_[l][o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
      z[o] = s;
    }
    if (l + 1 < W_.size()) {
      std::vector<char> mask(out, 1);
      for (std::size_t o = 0; o < out; ++o) {
        z[o] = z[o] > 0.0 ? z[o] : 0.0;
        if (rng.uniform() < rate) {
          mask[o] = 0;
          z[o] = 0.0;
        } else {
          z[o] /= keep;
        }
      }
      t.dropout_mask[l] = std::move(mask);
    }
    t.acts.push_back(std::move(z));
  }
  return t;
}

MlpGrads Mlp::backward(const ForwardTrace& trace, const std::vector<double>& d_output) const {
  if (trace.acts.size() != widths_.size())
    throw std::invalid_argument("Mlp::backward: bad trace");
  if (d_output.size() != widths_.back())
    throw std::invalid_argument("Mlp::backward: gradient dimension mismatch");
  MlpGrads g = zero_grads();
  const bool dropped = !trace.dropout_mask.empty();
  std::vector<double> delta = d_output;
  for (std::size_t li = W_.size(); li-- > 0;) {
    const std::size_t in = widths_[li], out = widths_[li + 1];
    const std::vector<double>& a_prev = trace.acts[li];
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      g.db[li][o] = d;
      double* row = g.dW[li].data() + o * in;
      for (std::size_t i = 0; i < in; ++i) row[i] = d * a_prev[i];
    }
    if (li == 0) break;
    std::vector<double> next(in, 0.0);
    const double* w = W_[li].data();
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) next[i] += d * row[i];
    }
    // Rectifier derivative; the stored activation is post-rectifier (and
    // post-dropout-scaling), both of which are positive exactly where the
    // pre-activation was positive and kept.
    const std::vector<double>& a = trace.acts[li];
    for (std::size_t i = 0; i < in; ++i)
      if (a[i] <= 0.0) next[i] = 0.0;
    if (dropped && !trace.dropout_mask[li - 1].empty()) {
      const std::vector<char>& mask = trace.dropout_mask[li - 1];
      for (std::size_t i = 0; i < in; ++i)
        next[i] = mask[i] ? next[i] / trace.keep : 0.0;
    }
    delta = std::move(next);
  }
  return g;
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads g;
  g.dW.resize(W_.size());
  g.db.resize(b_.size());
  for (std::size_t l = 0; l < W_.size(); ++l) {
    g.dW[l].assign(W_[l].size(), 0.0);
    g.db[l].assign(b_[l].size(), 0.0);
  }
  return g;
}

SgdState SgdState::zeros_like(const Mlp& net) {
  SgdState s;
  s.vW.resize(net.num_layers());
  s.vb.resize(net.num_layers());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    s.vW[l].assign(net.weights()[l].size(), 0.0);
    s.vb[l].assign(net.biases()[l].size(), 0.0);
  }
  return s;
}

void sgd_step(Mlp& net, const MlpGrads& grads, SgdState& state, double lr, double momentum,
              double weight_decay) {
  if (grads.dW.size() != net.num_layers())
    throw std::invalid_argument("sgd_step: gradient shape mismatch");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    if (grads.dW[l].size() != net.weights()[l].size() ||
        grads.db[l].size() != net.biases()[l].size())
      throw std::invalid_argument("sgd_step: gradient shape mismatch");
    std::vector<double>& W = net.weights()[l];
    std::vector<double>& vW = state.vW[l];
    for (std::size_t i = 0; i < W.size(); ++i) {
      vW[i] = momentum * vW[i] + grads.dW[l][i] + 2.0 * weight_decay * W[i];
      W[i] -= lr * vW[i];
    }
    std::vector<double>& b = net.biases()[l];
    std::vector<double>& vb = state.vb[l];
    for (std::size_t i = 0; i < b.size(); ++i) {
      vb[i] = momentum * vb[i] + grads.db[l][i];  // biases are not decayed
      b[i] -= lr * vb[i];
    }
  }
}

double grad_check(const Mlp& net, const OutputLoss& loss, const std::vector<double>& x,
                  double eps) {
  const ForwardTrace trace = net.forward(x);
  const ScalarGrad lg = loss(trace.acts.back());
  const MlpGrads analytic = net.backward(trace, lg.grad);

  Mlp probe = net;
  double max_rel = 0.0;
  auto probe_param = [&](double& slot, double analytic_g) {
    const double saved = slot;
    slot = saved + eps;
    const double up = loss(probe.forward(x).acts.back()).value;
    slot = saved - eps;
    const double down = loss(probe.forward(x).acts.back()).value;
    slot = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double rel = std::fabs(analytic_g - numeric) /
                       std::max({std::fabs(analytic_g), std::fabs(numeric), 1e-8});
    if (rel > max_rel) max_rel = rel;
  };
  for (std::size_t l = 0; l < probe.num_layers(); ++l) {
    for (std::size_t i = 0; i < probe.weights()[l].size(); ++i)
      probe_param(probe.weights()[l][i], analytic.dW[l][i]);
    for (std::size_t i = 0; i < probe.biases()[l].size(); ++i)
      probe_param(probe.biases()[l][i], analytic.db[l][i]);
  }
  return max_rel;
}

}  // namespace setpred
