#pragma once
// Shared test helpers and independent oracles: permutation enumeration,
// central finite differences, random instance builders. These deliberately
// avoid the library's own computation paths wherever they act as oracles.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "fairrank/core.hpp"
#include "fairrank/rng.hpp"
#include "fairrank/scorer.hpp"

namespace testutil {

// All M! permutations of 0..m-1 in lexicographic order.
inline std::vector<fairrank::Ranking> all_permutations(std::size_t m) {
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<fairrank::Ranking> out;
  do {
    out.push_back(fairrank::Ranking{order});
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

// Central finite differences of a scalar function of a score vector.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double hi = f(x);
    x[i] = saved - h;
    const double lo = f(x);
    x[i] = saved;
    g[i] = (hi - lo) / (2.0 * h);
  }
  return g;
}

inline double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// ||a - b|| / max(||a||, floor)
inline double rel_l2_error(const std::vector<double>& a, const std::vector<double>& b,
                           double floor = 1e-12) {
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    diff += d * d;
  }
  return std::sqrt(diff) / std::max(l2_norm(a), floor);
}

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot / (l2_norm(a) * l2_norm(b));
}

inline std::vector<double> random_scores(fairrank::RngStream& rng, std::size_t m,
                                         double spread = 2.0) {
  std::vector<double> s(m);
  for (double& v : s) v = rng.uniform(-spread, spread);
  return s;
}

// Flattens parameters into one vector (for whole-model gradient comparisons).
inline std::vector<double> flatten(const fairrank::MlpParams& p) {
  std::vector<double> out;
  p.for_each_array([&out](const std::vector<double>& a) {
    out.insert(out.end(), a.begin(), a.end());
  });
  out.push_back(p.b3);
  return out;
}

// A valid random candidate set with positive enrollments and Dirichlet rows.
inline fairrank::CandidateSet random_candidate_set(fairrank::RngStream& rng, std::size_t m,
                                                   std::size_t l, std::size_t p,
                                                   std::size_t q) {
  fairrank::CandidateSet cs;
  cs.trial.id = "t";
  cs.trial.dense.resize(p);
  for (double& v : cs.trial.dense) v = rng.normal();
  cs.sites.resize(m);
  cs.enrollment.resize(m);
  cs.membership.resize(m);
  const std::vector<double> alpha(l, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    cs.sites[i].id = "s" + std::to_string(i);
    cs.sites[i].dense.resize(q);
    for (double& v : cs.sites[i].dense) v = rng.normal();
    cs.enrollment[i] = rng.uniform(0.1, 3.0);
    cs.membership[i].weights = rng.dirichlet(alpha);
  }
  return fairrank::validate_candidate_set(std::move(cs));
}

}  // namespace testutil
