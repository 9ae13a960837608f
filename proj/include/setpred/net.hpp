#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "setpred/card_dist.hpp"
#include "setpred/common.hpp"

namespace setpred {

enum class Task { tagging, detect, captcha };
enum class Scenario { fixed_order = 1, learned_perm = 2, uniform_perm = 3 };

Task task_from_string(const std::string& s);
std::string task_to_string(Task t);

// Describes how the flat network output vector is carved into the cardinality
// parameters alpha, the M element slots O1 (state + existence logit), and the
// optional permutation logits O2 (scenario 2 only, length M!).
struct HeadLayout {
  Task task = Task::detect;
  Scenario scenario = Scenario::uniform_perm;
  CardKind card_kind = CardKind::categorical;
  std::size_t M = 0;          // number of output slots == max cardinality
  std::size_t state_dim = 0;  // per-slot state size (0 tagging, 4 boxes)

  std::size_t card_dim() const { return card_param_count(card_kind, M); }
  std::size_t slot_dim() const { return state_dim + 1; }
  std::size_t perm_dim() const;
  std::size_t output_dim() const { return card_dim() + M * slot_dim() + perm_dim(); }

  std::size_t alpha_offset() const { return 0; }
  std::size_t slot_offset(std::size_t s) const { return card_dim() + s * slot_dim(); }
  std::size_t logit_offset(std::size_t s) const { return slot_offset(s) + state_dim; }
  std::size_t perm_offset() const { return card_dim() + M * slot_dim(); }

  static HeadLayout make(Task task, Scenario scenario, CardKind kind, std::size_t M,
                         std::size_t state_dim);
};

// Read-only view of one forward pass split per the layout.
struct NetworkOutput {
  const HeadLayout* layout = nullptr;
  std::vector<double> flat;

  CardinalityHead card_head() const;
  std::vector<double> slot_state(std::size_t s) const;
  double slot_logit(std::size_t s) const;
  std::vector<double> perm_logits() const;
};

struct MlpGrads {
  std::vector<std::vector<double>> dW, db;
  void add_scaled(const MlpGrads& other, double scale);
  void scale(double s);
};

// Activations per layer; acts[0] is the input, acts.back() the linear output.
// Hidden activations are post-rectifier. dropout_mask is empty unless dropout
// was applied during the pass.
struct ForwardTrace {
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<char>> dropout_mask;
  double keep = 1.0;  // kept-unit scale is 1/keep when dropout was applied
};

// Fully connected network, rectifier hidden units, linear output.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> widths, std::uint64_t seed);

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t num_layers() const { return W_.size(); }
  std::size_t param_count() const;

  // Row-major weight matrix of layer l, shape widths[l+1] x widths[l].
  std::vector<std::vector<double>>& weights() { return W_; }
  std::vector<std::vector<double>>& biases() { return b_; }
  const std::vector<std::vector<double>>& weights() const { return W_; }
  const std::vector<std::vector<double>>& biases() const { return b_; }

  ForwardTrace forward(const std::vector<double>& x) const;
  // Inverted dropout on hidden layers; rate in [0,1). Used only in training.
  ForwardTrace forward_dropout(const std::vector<double>& x, double rate, Rng& rng) const;

  // d_output is dLoss/d(flat output). Returns parameter gradients.
  MlpGrads backward(const ForwardTrace& trace, const std::vector<double>& d_output) const;

  MlpGrads zero_grads() const;

 private:
  std::vector<std::size_t> widths_;
  std::vector<std::vector<double>> W_, b_;
};

// Optimizer / loop hyper-parameters.
struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;  // gamma; the update applies 2*gamma*w
  std::size_t batch = 8;
  std::size_t epochs = 10;
  double lr_decay = 0.95;  // multiplicative, per epoch
  double dropout = 0.0;
  std::uint64_t seed = 0;
};

struct SgdState {
  std::vector<std::vector<double>> vW, vb;
  static SgdState zeros_like(const Mlp& net);
};

// v = momentum * v + (g + 2*gamma*w); w -= lr * v.
void sgd_step(Mlp& net, const MlpGrads& grads, SgdState& state, double lr, double momentum,
              double weight_decay);

// Loss over the flat network output: returns (value, dLoss/d_output).
using OutputLoss = std::function<ScalarGrad(const std::vector<double>&)>;

// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
// central differences with step eps.
double grad_check(const Mlp& net, const OutputLoss& loss, const std::vector<double>& x,
                  double eps = 1e-5);

}  // namespace setpred
