#pragma once

#include <vector>

#include "setpred/geometry.hpp"  // ScalarGrad

namespace setpred {

enum class CardKind { categorical, poisson, negative_binomial };

// Cardinality head over raw (pre-activation) network outputs alpha.
//   categorical: alpha has length M+1, probabilities via softmax;
//   poisson: rate lambda = softplus(alpha[0]);
//   negative_binomial: r = softplus(alpha[0]), p = sigmoid(alpha[1]).
struct CardinalityHead {
  CardKind kind = CardKind::categorical;
  std::vector<double> alpha;
};

// Expected alpha length for a head kind with categorical support {0..M}.
std::size_t card_param_count(CardKind kind, std::size_t M);

// Negative log-likelihood of cardinality m with gradient w.r.t. raw alpha.
ScalarGrad card_nll(const CardinalityHead& head, std::size_t m);

// Distribution mode; ties toward smaller m. Poisson / negative-binomial modes
// are closed-form, capped at max_m. For categorical, max_m is ignored (the
// support is fixed by alpha's length).
std::size_t card_map(const CardinalityHead& head, std::size_t max_m);

// log p(m) for m in [0, max_m]; convenience for inference.
std::vector<double> card_log_pmf(const CardinalityHead& head, std::size_t max_m);

}  // namespace setpred
