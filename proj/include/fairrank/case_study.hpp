#pragma once
// A small built-in instance (five sites, four groups, equal enrollment) that
// contrasts what utility-only, exposure-loss, and entropy rewards each end up
// selecting. With enrollments tied, utility alone cannot prefer any site; the
// exposure loss is satisfied by exactly one site here; and entropy singles
// out the site whose own patient mix is most balanced.
//
// Each variant trains the score vector directly (the instance is fixed, so
// no feature model is needed): plain REINFORCE on the Plackett-Luce policy
// over the five logits.

#include <cstdint>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "fairrank/core.hpp"
#include "fairrank/pl_policy.hpp"
#include "fairrank/rewards.hpp"
#include "fairrank/rng.hpp"

namespace fairrank {

// The five-site, four-group instance with equal enrollment everywhere.
inline CandidateSet builtin_case_instance() {
  const double rows[5][4] = {
      {0.20, 0.35, 0.25, 0.20},
      {0.60, 0.15, 0.15, 0.10},
      {0.65, 0.15, 0.10, 0.10},
      {0.55, 0.18, 0.15, 0.12},
      {0.70, 0.20, 0.08, 0.02},
  };
  CandidateSet cs;
  cs.trial.id = "case";
  cs.trial.dense = {1.0};
  cs.sites.resize(5);
  cs.enrollment.assign(5, 100.0);
  cs.membership.resize(5);
  for (std::size_t i = 0; i < 5; ++i) {
    cs.sites[i].id = "site" + std::to_string(i + 1);
    cs.sites[i].dense.assign(rows[i], rows[i] + 4);
    cs.membership[i].weights.assign(rows[i], rows[i] + 4);
  }
  return validate_candidate_set(std::move(cs));
}

struct CaseStudyConfig {
  double lambda = 4.0;
  double eta = 0.2;
  std::size_t steps = 2000;
  std::size_t n_mc = 32;
  std::size_t k = 1;
  std::uint64_t seed = 1;
};

struct CaseVariantResult {
  FairnessMode mode = FairnessMode::None;
  std::string name;
  std::vector<double> scores;           // trained logits
  std::vector<double> selection_probs;  // softmax of the logits (first-pick law)
  std::size_t deterministic_choice = 0;
  double deterministic_exposure_loss = 0.0;
  double deterministic_entropy = 0.0;
};

struct CaseStudyResult {
  CandidateSet instance;
  std::size_t k = 1;
  std::vector<double> merit;
  std::vector<double> site_entropy;  // per-site row entropies
  std::vector<CaseVariantResult> variants;
};

namespace detail {

inline CaseVariantResult train_case_variant(const CandidateSet& cs, FairnessMode mode,
                                            const std::string& name,
                                            const CaseStudyConfig& cfg,
                                            std::uint64_t variant_index) {
  const std::size_t m = cs.num_sites();
  const double lambda = mode == FairnessMode::None ? 0.0 : cfg.lambda;
  ScoreVector scores;
  scores.values.assign(m, 0.0);
  RngStream rng = make_stream(cfg.seed, "case", variant_index);
  std::vector<double> grads(cfg.n_mc * m);
  std::vector<double> rewards(cfg.n_mc);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    double sum = 0.0;
    for (std::size_t j = 0; j < cfg.n_mc; ++j) {
      const Ranking r = sample_ranking(scores, rng);
      rewards[j] = combined_reward(r, cs.enrollment, cs.membership, cfg.k, lambda, mode)
                       .combined;
      sum += rewards[j];
      const auto g = log_prob_grad(scores, r, cfg.k, PolicyMode{PolicyKind::ExactPL});
      std::copy(g.begin(), g.end(), grads.begin() + static_cast<std::ptrdiff_t>(j * m));
    }
    const double baseline = sum / static_cast<double>(cfg.n_mc);
    for (std::size_t j = 0; j < cfg.n_mc; ++j) {
      const double w = cfg.eta * (rewards[j] - baseline) / static_cast<double>(cfg.n_mc);
      if (w == 0.0) continue;
      const double* g = grads.data() + j * m;
      for (std::size_t i = 0; i < m; ++i) scores.values[i] += w * g[i];
    }
  }
  CaseVariantResult out;
  out.mode = mode;
  out.name = name;
  out.scores = scores.values;
  out.selection_probs = softmax(scores.values);
  const Ranking det = rank_deterministic(scores, cfg.k);
  out.deterministic_choice = det.order.front();
  const std::vector<Ranking> one{det};
  out.deterministic_exposure_loss =
      exposure_loss(group_exposure(one, cs.membership, cfg.k),
                    merit(cs.membership, cs.enrollment));
  out.deterministic_entropy = fairness_reward(det, cs.membership, cfg.k);
  return out;
}

}  // namespace detail

inline CaseStudyResult run_case_study(const CandidateSet& instance,
                                      const CaseStudyConfig& cfg) {
  if (cfg.k < 1 || cfg.k > instance.num_sites()) {
    throw ValidationError("case study: k out of range");
  }
  CaseStudyResult result;
  result.instance = instance;
  result.k = cfg.k;
  result.merit = merit(instance.membership, instance.enrollment);
  for (const auto& row : instance.membership) {
    result.site_entropy.push_back(entropy(row));
  }
  result.variants.push_back(
      detail::train_case_variant(instance, FairnessMode::None, "utility", cfg, 0));
  result.variants.push_back(detail::train_case_variant(
      instance, FairnessMode::OneSidedExposure, "exposure", cfg, 1));
  result.variants.push_back(
      detail::train_case_variant(instance, FairnessMode::Entropy, "entropy", cfg, 2));
  return result;
}

inline void write_case_study(const CaseStudyResult& r, std::ostream& out) {
  const std::size_t m = r.instance.num_sites();
  out << "case study: " << m << " sites, " << r.instance.num_groups()
      << " groups, K=" << r.k << "\n";
  out << std::setprecision(4);
  out << "merit:";
  for (double v : r.merit) out << ' ' << v;
  out << "\nsite entropy (nats):";
  for (double v : r.site_entropy) out << ' ' << v;
  out << "\n";
  for (const auto& v : r.variants) {
    out << "variant " << v.name << ":\n  chosen-site distribution:";
    for (double p : v.selection_probs) out << ' ' << p;
    out << "\n  deterministic choice: " << r.instance.sites[v.deterministic_choice].id
        << " (index " << v.deterministic_choice << ")"
        << "\n  exposure loss of selection: " << v.deterministic_exposure_loss
        << "\n  selection entropy: " << v.deterministic_entropy << " nats\n";
  }
}

}  // namespace fairrank
