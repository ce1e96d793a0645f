#pragma once
// Plackett-Luce ranking distribution over site permutations: recursive
// softmax sampling, exact and Top-K-proxy log-probabilities, and their
// analytical gradients with respect to the scores.
//
// The probability of a permutation r under scores s is the product over
// positions of exp(s[r(i)]) divided by the sum of exp over the items not yet
// placed. The Top-K proxy replaces that with the summed softmax mass of the
// first K items, which depends only on the selected SET, not its order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "fairrank/core.hpp"
#include "fairrank/rng.hpp"
#include "fairrank/scorer.hpp"

namespace fairrank {

enum class PolicyKind { ExactPL, TopKProxy };

// Probability-evaluation mode. Sampling always uses the exact recursive
// procedure; only probability and gradient evaluation switch to the proxy.
struct PolicyMode {
  PolicyKind kind = PolicyKind::ExactPL;

  // Exact evaluation is cheap up to moderate list sizes; past that the proxy
  // keeps Monte-Carlo probability evaluation affordable.
  static PolicyMode pick_default(std::size_t m, std::size_t exact_limit = 20) {
    return PolicyMode{m <= exact_limit ? PolicyKind::ExactPL : PolicyKind::TopKProxy};
  }
};

namespace detail {

inline void check_scores(const ScoreVector& scores) {
  if (scores.values.empty()) throw ValidationError("scores: empty");
  require_finite(scores.values, "scores");
}

inline void check_ranking(const Ranking& r, std::size_t m) {
  if (!is_permutation(r, m)) {
    throw ValidationError("ranking: not a permutation of 0..M-1");
  }
}

inline void check_k(std::size_t k, std::size_t m) {
  if (k < 1 || k > m) throw ValidationError("k must satisfy 1 <= k <= M");
}

inline double log_add_exp(double a, double b) {
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// suffix_lse[i] = log sum of exp(s[r(j)]) over j >= i.
inline std::vector<double> suffix_lse(const std::vector<double>& s, const Ranking& r) {
  const std::size_t m = r.order.size();
  std::vector<double> lse(m);
  lse[m - 1] = s[r.order[m - 1]];
  for (std::size_t i = m - 1; i-- > 0;) {
    lse[i] = log_add_exp(s[r.order[i]], lse[i + 1]);
  }
  return lse;
}

}  // namespace detail

// Max-shifted softmax.
inline std::vector<double> softmax(const std::vector<double>& s) {
  const double mx = *std::max_element(s.begin(), s.end());
  std::vector<double> p(s.size());
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    p[i] = std::exp(s[i] - mx);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

// Draws a permutation by repeated softmax draws without replacement: the item
// at each position is drawn from the softmax over the scores still in play.
inline Ranking sample_ranking(const ScoreVector& scores, RngStream& rng) {
  detail::check_scores(scores);
  const auto& s = scores.values;
  const std::size_t m = s.size();
  std::vector<std::size_t> remaining(m);
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<double> w(m);
  Ranking r;
  r.order.reserve(m);
  for (std::size_t step = 0; step < m; ++step) {
    const std::size_t n = remaining.size();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, s[remaining[j]]);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      w[j] = std::exp(s[remaining[j]] - mx);
      total += w[j];
    }
    const double u = rng.uniform01() * total;
    std::size_t pick = n - 1;  // fallback absorbs rounding residue
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += w[j];
      if (u < acc) {
        pick = j;
        break;
      }
    }
    r.order.push_back(remaining[pick]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return r;
}

// log pi(r): sum over positions of the placed score minus the log-sum-exp of
// the scores not yet placed. Max-shifted, stable for arbitrary score scales.
inline double exact_log_prob(const ScoreVector& scores, const Ranking& r) {
  detail::check_scores(scores);
  const auto& s = scores.values;
  detail::check_ranking(r, s.size());
  const auto lse = detail::suffix_lse(s, r);
  double lp = 0.0;
  for (std::size_t i = 0; i < r.order.size(); ++i) {
    lp += s[r.order[i]] - lse[i];
  }
  return lp;
}

// log of the summed softmax mass of r's first K items. Invariant under
// permutations within the prefix and within the suffix.
inline double proxy_log_prob(const ScoreVector& scores, const Ranking& r, std::size_t k) {
  detail::check_scores(scores);
  const auto& s = scores.values;
  detail::check_ranking(r, s.size());
  detail::check_k(k, s.size());
  const auto p = softmax(s);
  double mass = 0.0;
  for (std::size_t i = 0; i < k; ++i) mass += p[r.order[i]];
  return std::log(mass);
}

// d(log-prob)/d(scores) for either evaluation mode.
//
// Exact mode: grad[m] = 1 - sum over positions i up to m's own position of
// the softmax mass of m among the items still in play at step i.
// Proxy mode: with S the Top-K softmax mass, grad[m] = p[m] * (1{m in
// prefix}/S - 1), which vanishes identically at K = M.
inline std::vector<double> log_prob_grad(const ScoreVector& scores, const Ranking& r,
                                         std::size_t k, PolicyMode mode) {
  detail::check_scores(scores);
  const auto& s = scores.values;
  const std::size_t m = s.size();
  detail::check_ranking(r, m);
  std::vector<double> grad(m, 0.0);
  if (mode.kind == PolicyKind::ExactPL) {
    const auto lse = detail::suffix_lse(s, r);
    for (std::size_t i = 0; i < m; ++i) {
      grad[r.order[i]] += 1.0;
      // s[r(j)] <= lse[i] for every j >= i, so each exp stays in (0, 1].
      for (std::size_t j = i; j < m; ++j) {
        grad[r.order[j]] -= std::exp(s[r.order[j]] - lse[i]);
      }
    }
  } else {
    detail::check_k(k, m);
    const auto p = softmax(s);
    double mass = 0.0;
    std::vector<bool> in_prefix(m, false);
    for (std::size_t i = 0; i < k; ++i) {
      in_prefix[r.order[i]] = true;
      mass += p[r.order[i]];
    }
    for (std::size_t i = 0; i < m; ++i) {
      grad[i] = p[i] * ((in_prefix[i] ? 1.0 / mass : 0.0) - 1.0);
    }
  }
  return grad;
}

// Scores to ranking by descending score; ties keep ascending site index.
inline Ranking rank_deterministic(const ScoreVector& scores, std::size_t k = 0) {
  detail::check_scores(scores);
  const auto& s = scores.values;
  if (k > s.size()) throw ValidationError("rank_deterministic: k > M");
  Ranking r;
  r.order.resize(s.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&s](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  return r;
}

}  // namespace fairrank
