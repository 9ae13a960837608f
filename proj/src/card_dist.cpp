#include "setpred/card_dist.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "setpred/common.hpp"

namespace setpred {

namespace {

double log_sum_exp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

void check_head(const CardinalityHead& head) {
  std::size_t want = 0;
  switch (head.kind) {
    case CardKind::categorical:
      if (head.alpha.size() < 2)
        throw std::invalid_argument("card: categorical needs at least 2 logits");
      want = head.alpha.size();
      break;
    case CardKind::poisson:
      want = 1;
      break;
    case CardKind::negative_binomial:
      want = 2;
      break;
  }
  if (head.alpha.size() != want)
    throw std::invalid_argument("card: alpha length mismatch");
  for (double a : head.alpha)
    if (!std::isfinite(a)) throw std::invalid_argument("card: non-finite alpha");
}

}  // namespace

std::size_t card_param_count(CardKind kind, std::size_t M) {
  switch (kind) {
    case CardKind::categorical: return M + 1;
    case CardKind::poisson: return 1;
    case CardKind::negative_binomial: return 2;
  }
  return 0;
}

ScalarGrad card_nll(const CardinalityHead& head, std::size_t m) {
  check_head(head);
  ScalarGrad out;
  out.grad.assign(head.alpha.size(), 0.0);
  switch (head.kind) {
    case CardKind::categorical: {
      if (m >= head.alpha.size())
        throw std::invalid_argument("card_nll: m exceeds categorical support");
      const double lse = log_sum_exp(head.alpha);
      out.value = lse - head.alpha[m];
      for (std::size_t i = 0; i < head.alpha.size(); ++i)
        out.grad[i] = std::exp(head.alpha[i] - lse);
      out.grad[m] -= 1.0;
      break;
    }
    case CardKind::poisson: {
      const double lambda = softplus(head.alpha[0]);
      const double md = static_cast<double>(m);
      out.value = lambda - md * std::log(lambda) + std::lgamma(md + 1.0);
      out.grad[0] = (1.0 - md / lambda) * sigmoid(head.alpha[0]);
      break;
    }
    case CardKind::negative_binomial: {
      const double r = softplus(head.alpha[0]);
      const double p = sigmoid(head.alpha[1]);
      const double md = static_cast<double>(m);
      const double log_p = log_sigmoid(head.alpha[1]);
      const double log_1mp = log_sigmoid(-head.alpha[1]);
      out.value = -std::lgamma(md + r) + std::lgamma(r) + std::lgamma(md + 1.0) -
                  r * log_1mp - md * log_p;
      const double dr = -digamma(md + r) + digamma(r) - log_1mp;
      double dp = r / (1.0 - p);
      if (m > 0) dp -= md / p;
      out.grad[0] = dr * sigmoid(head.alpha[0]);
      out.grad[1] = dp * p * (1.0 - p);
      break;
    }
  }
  return out;
}

std::size_t card_map(const CardinalityHead& head, std::size_t max_m) {
  check_head(head);
  switch (head.kind) {
    case CardKind::categorical: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < head.alpha.size(); ++i)
        if (head.alpha[i] > head.alpha[best]) best = i;
      return best;
    }
    case CardKind::poisson: {
      const double lambda = softplus(head.alpha[0]);
      double mode = std::floor(lambda);
      // Integer rate ties modes {lambda-1, lambda}; take the smaller.
      if (mode == lambda && mode >= 1.0) mode -= 1.0;
      return std::min(static_cast<std::size_t>(mode), max_m);
    }
    case CardKind::negative_binomial: {
      const double r = softplus(head.alpha[0]);
      const double p = sigmoid(head.alpha[1]);
      if (r <= 1.0) return 0;
      const double x = p * (r - 1.0) / (1.0 - p);
      if (x <= 0.0) return 0;
      double mode = std::floor(x);
      if (mode == x && mode >= 1.0) mode -= 1.0;
      return std::min(static_cast<std::size_t>(mode), max_m);
    }
  }
  return 0;
}

std::vector<double> card_log_pmf(const CardinalityHead& head, std::size_t max_m) {
  check_head(head);
  if (head.kind == CardKind::categorical && max_m >= head.alpha.size())
    throw std::invalid_argument("card_log_pmf: max_m exceeds categorical support");
  std::vector<double> out(max_m + 1, 0.0);
  if (head.kind == CardKind::categorical) {
    const double lse = log_sum_exp(head.alpha);
    for (std::size_t m = 0; m <= max_m; ++m) out[m] = head.alpha[m] - lse;
  } else {
    for (std::size_t m = 0; m <= max_m; ++m) out[m] = -card_nll(head, m).value;
  }
  return out;
}

}  // namespace setpred
