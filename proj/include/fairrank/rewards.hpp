#pragma once
// Reward and fairness signals for ranking policies: Top-K utility, entropy
// diversity of the selected cohort, and the one-sided exposure loss together
// with its merit and group-exposure building blocks.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <vector>

#include "fairrank/core.hpp"

namespace fairrank {

enum class FairnessMode { None, Entropy, OneSidedExposure };

// One ranking's reward decomposition; combined = utility + lambda * fairness.
struct RewardValue {
  double utility = 0.0;   // units of enrollment
  double fairness = 0.0;  // nats (entropy mode) or negated exposure loss
  double combined = 0.0;
};

// Enrollment captured by the Top-K prefix minus enrollment left outside it.
// Invariant under permutations within the prefix and within the suffix.
inline double utility_reward(const Ranking& r, const std::vector<double>& e,
                             std::size_t k) {
  if (!is_permutation(r, e.size())) {
    throw ValidationError("utility_reward: invalid ranking");
  }
  if (k > e.size()) throw ValidationError("utility_reward: k > M");
  double top = 0.0, rest = 0.0;
  for (std::size_t i = 0; i < r.order.size(); ++i) {
    (i < k ? top : rest) += e[r.order[i]];
  }
  return top - rest;
}

// Shannon entropy in nats, with 0 ln 0 = 0 by continuity. Ranges over
// [0, ln L]: 0 iff one-hot, ln L iff uniform.
inline double entropy(const GroupDistribution& d) {
  double h = 0.0;
  for (double w : d.weights) {
    if (w > 0.0) h -= w * std::log(w);
  }
  return h;
}

// Entropy of the arithmetic mean of the Top-K membership rows: the diversity
// reward. Depends only on the SET of Top-K sites.
inline double fairness_reward(const Ranking& r,
                              const std::vector<GroupDistribution>& membership,
                              std::size_t k) {
  if (!is_permutation(r, membership.size())) {
    throw ValidationError("fairness_reward: invalid ranking");
  }
  if (k < 1 || k > membership.size()) throw ValidationError("fairness_reward: bad k");
  const std::size_t l = membership.front().weights.size();
  GroupDistribution mean;
  mean.weights.assign(l, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& row = membership[r.order[i]].weights;
    for (std::size_t g = 0; g < l; ++g) mean.weights[g] += row[g];
  }
  for (double& w : mean.weights) w /= static_cast<double>(k);
  return entropy(mean);
}

// 1 for sites inside the Top-K prefix, 0 otherwise (indexed by site).
inline std::vector<double> position_bias(const Ranking& r, std::size_t k) {
  if (k > r.order.size()) throw ValidationError("position_bias: k > M");
  std::vector<double> v(r.order.size(), 0.0);
  for (std::size_t i = 0; i < k; ++i) v[r.order[i]] = 1.0;
  return v;
}

// Monte-Carlo group exposure: v_g[l] = sum_i P[i,l] * mean Top-K inclusion of
// site i across the ranking samples.
inline std::vector<double> group_exposure(const std::vector<Ranking>& samples,
                                          const std::vector<GroupDistribution>& membership,
                                          std::size_t k) {
  if (samples.empty()) throw ValidationError("group_exposure: no ranking samples");
  const std::size_t m = membership.size();
  std::vector<double> avg_bias(m, 0.0);
  for (const auto& r : samples) {
    if (!is_permutation(r, m)) throw ValidationError("group_exposure: invalid ranking");
    const auto bias = position_bias(r, k);
    for (std::size_t i = 0; i < m; ++i) avg_bias[i] += bias[i];
  }
  for (double& b : avg_bias) b /= static_cast<double>(samples.size());
  const std::size_t l = membership.front().weights.size();
  std::vector<double> v_g(l, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t g = 0; g < l; ++g) {
      v_g[g] += membership[i].weights[g] * avg_bias[i];
    }
  }
  return v_g;
}

// Enrollment-weighted average membership of each group:
// merit[l] = sum_i P[i,l] * e[i] / sum(e).
inline std::vector<double> merit(const std::vector<GroupDistribution>& membership,
                                 const std::vector<double>& e) {
  if (membership.size() != e.size()) throw ValidationError("merit: size mismatch");
  double total = 0.0;
  for (double v : e) total += v;
  if (!(total > 0.0)) throw ValidationError("merit: total enrollment must be positive");
  const std::size_t l = membership.front().weights.size();
  std::vector<double> out(l, 0.0);
  for (std::size_t i = 0; i < membership.size(); ++i) {
    const double gamma = e[i] / total;
    for (std::size_t g = 0; g < l; ++g) out[g] += membership[i].weights[g] * gamma;
  }
  return out;
}

namespace detail {
inline void warn_zero_merit() {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::cerr << "fairrank: warning: group with zero merit excluded from exposure loss\n";
  }
}
}  // namespace detail

// One-sided exposure loss: sum over ordered group pairs (l, l') with
// merit[l] > merit[l'] of max{0, v[l]/merit[l] - v[l']/merit[l']}. Penalizes
// higher-merit groups drawing more exposure per unit merit than lower-merit
// ones. Zero whenever exposure is proportional to merit, and positively
// homogeneous in the exposure vector. Groups with zero merit have no defined
// ratio and are skipped (warned once per process).
inline double exposure_loss(const std::vector<double>& v_g, const std::vector<double>& m) {
  if (v_g.size() != m.size()) throw ValidationError("exposure_loss: size mismatch");
  const std::size_t l = m.size();
  for (double v : m) {
    if (v <= 0.0) {
      detail::warn_zero_merit();
      break;
    }
  }
  double loss = 0.0;
  for (std::size_t a = 0; a < l; ++a) {
    if (m[a] <= 0.0) continue;
    for (std::size_t b = 0; b < l; ++b) {
      if (m[b] <= 0.0 || !(m[a] > m[b])) continue;
      const double gap = v_g[a] / m[a] - v_g[b] / m[b];
      if (gap > 0.0) loss += gap;
    }
  }
  return loss;
}

// Per-ranking combined reward. Entropy mode rewards diversity of the chosen
// cohort; one-sided-exposure mode rewards low exposure loss of this ranking's
// own Top-K selection (the loss enters negated).
inline RewardValue combined_reward(const Ranking& r, const std::vector<double>& e,
                                   const std::vector<GroupDistribution>& membership,
                                   std::size_t k, double lambda, FairnessMode mode) {
  if (lambda < 0.0) throw ValidationError("combined_reward: lambda must be >= 0");
  RewardValue rv;
  rv.utility = utility_reward(r, e, k);
  switch (mode) {
    case FairnessMode::None:
      rv.fairness = 0.0;
      break;
    case FairnessMode::Entropy:
      rv.fairness = fairness_reward(r, membership, k);
      break;
    case FairnessMode::OneSidedExposure: {
      const std::vector<Ranking> one{r};
      rv.fairness = -exposure_loss(group_exposure(one, membership, k),
                                   merit(membership, e));
      break;
    }
  }
  rv.combined = rv.utility + lambda * rv.fairness;
  return rv;
}

}  // namespace fairrank
