#pragma once
// Policy-gradient training of the scorer: REINFORCE over sampled rankings
// against expected utility + lambda * fairness, with optional mean-reward
// baseline and global-norm gradient clipping. Also the two supervised
// baselines (binary classification on Top-K labels, enrollment regression)
// and shared training history bookkeeping.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fairrank/core.hpp"
#include "fairrank/datagen.hpp"
#include "fairrank/metrics.hpp"
#include "fairrank/parallel.hpp"
#include "fairrank/pl_policy.hpp"
#include "fairrank/rewards.hpp"
#include "fairrank/rng.hpp"
#include "fairrank/scorer.hpp"
#include "fairrank/text_io.hpp"

namespace fairrank {

// Raised when a training step produces a non-finite gradient.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class VarianceBaseline { None, MeanReward };

struct TrainConfig {
  double lambda = 0.0;  // fairness weight in the combined reward
  double eta = 0.05;    // learning rate (constant, plain SGD)
  std::size_t k = 10;
  std::size_t n_mc = 20;  // ranking samples per trial per step
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::optional<PolicyMode> policy_mode;  // empty: picked from the list size
  FairnessMode fairness_mode = FairnessMode::None;
  VarianceBaseline variance_baseline = VarianceBaseline::MeanReward;
  std::uint64_t seed = 1;
  // Global-norm cap on the step gradient; <= 0 disables. Not part of the
  // plain update rule, purely a divergence guard; disable to get the
  // unmodified estimator.
  double grad_clip = 10.0;
  std::size_t h1 = 64, h2 = 32;  // scorer hidden sizes
  std::size_t n_eval_val = 20;   // validation ranking samples
  std::size_t threads = 0;
};

struct TrialStepStats {
  double mean_utility = 0.0;
  double mean_fairness = 0.0;
  double mean_combined = 0.0;
  // Exposure loss of this trial's Monte-Carlo batch (diagnostic, only
  // populated in one-sided-exposure mode).
  double exposure_loss_mc = 0.0;
};

// REINFORCE estimate of d(expected combined reward)/d(theta) for one trial:
// the mean over sampled rankings of (reward - baseline) * dlog pi(r)/d(theta).
// Rewards are centered exactly, so a constant reward yields an exactly zero
// estimate under the mean-reward baseline.
inline ParamGrads policy_gradient_for_trial(const MlpParams& params,
                                            const CandidateSet& cs,
                                            const TrainConfig& cfg,
                                            std::uint64_t sample_seed,
                                            TrialStepStats* stats = nullptr) {
  const std::size_t m = cs.num_sites();
  if (cfg.k < 1 || cfg.k > m) {
    throw ValidationError("train: k=" + std::to_string(cfg.k) +
                          " out of range for M=" + std::to_string(m));
  }
  if (cfg.n_mc < 1) throw ValidationError("train: n_mc must be >= 1");
  const PolicyMode mode = cfg.policy_mode.value_or(PolicyMode::pick_default(m));
  ForwardCache cache;
  const ScoreVector scores = forward(params, cs.trial, cs.sites, &cache);
  RngStream rng(sample_seed);

  const std::size_t n = cfg.n_mc;
  std::vector<double> sample_grads(n * m);
  std::vector<double> rewards(n);
  std::vector<double> avg_bias(m, 0.0);
  double sum_u = 0.0, sum_f = 0.0, sum_c = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const Ranking r = sample_ranking(scores, rng);
    const RewardValue rv = combined_reward(r, cs.enrollment, cs.membership, cfg.k,
                                           cfg.lambda, cfg.fairness_mode);
    rewards[j] = rv.combined;
    sum_u += rv.utility;
    sum_f += rv.fairness;
    sum_c += rv.combined;
    const auto g = log_prob_grad(scores, r, cfg.k, mode);
    std::copy(g.begin(), g.end(), sample_grads.begin() + static_cast<std::ptrdiff_t>(j * m));
    if (stats != nullptr && cfg.fairness_mode == FairnessMode::OneSidedExposure) {
      for (std::size_t i = 0; i < cfg.k; ++i) avg_bias[r.order[i]] += 1.0;
    }
  }
  const double nd = static_cast<double>(n);
  const double baseline =
      cfg.variance_baseline == VarianceBaseline::MeanReward ? sum_c / nd : 0.0;
  std::vector<double> grad_scores(m, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double w = (rewards[j] - baseline) / nd;
    if (w == 0.0) continue;
    const double* g = sample_grads.data() + j * m;
    for (std::size_t i = 0; i < m; ++i) grad_scores[i] += w * g[i];
  }
  if (stats != nullptr) {
    stats->mean_utility = sum_u / nd;
    stats->mean_fairness = sum_f / nd;
    stats->mean_combined = sum_c / nd;
    if (cfg.fairness_mode == FairnessMode::OneSidedExposure) {
      const std::size_t l = cs.num_groups();
      std::vector<double> v_g(l, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const double b = avg_bias[i] / nd;
        for (std::size_t g = 0; g < l; ++g) v_g[g] += cs.membership[i].weights[g] * b;
      }
      stats->exposure_loss_mc = exposure_loss(v_g, merit(cs.membership, cs.enrollment));
    }
  }
  return backward(params, cache, grad_scores);
}

struct StepStats {
  double mean_utility = 0.0;
  double mean_fairness = 0.0;
  double mean_combined = 0.0;
  double grad_norm = 0.0;  // pre-clip global norm of the step gradient
  bool clipped = false;
  double exposure_loss_mc = 0.0;
};

// One gradient-ascent step over a mini-batch of trials. Per-trial sample
// streams derive from a single draw on `rng`, so the result is deterministic
// for a given stream state regardless of the worker count.
inline std::pair<MlpParams, StepStats> reinforce_step(
    const MlpParams& params, const std::vector<const CandidateSet*>& batch,
    const TrainConfig& cfg, RngStream& rng) {
  if (batch.empty()) throw ValidationError("reinforce_step: empty batch");
  const std::uint64_t salt = rng.next_u64();
  std::vector<ParamGrads> grads(batch.size());
  std::vector<TrialStepStats> tstats(batch.size());
  parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
    grads[i] = policy_gradient_for_trial(params, *batch[i], cfg,
                                         derive_seed(salt, "mc", i), &tstats[i]);
  });
  ParamGrads total = zeros_like(params);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  StepStats st;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    axpy(inv_b, grads[i], total);
    st.mean_utility += inv_b * tstats[i].mean_utility;
    st.mean_fairness += inv_b * tstats[i].mean_fairness;
    st.mean_combined += inv_b * tstats[i].mean_combined;
    st.exposure_loss_mc += inv_b * tstats[i].exposure_loss_mc;
  }
  st.grad_norm = global_norm(total);
  if (!std::isfinite(st.grad_norm) || !all_finite(total)) {
    throw DivergenceError(
        "reinforce_step: non-finite gradient (divergence); step aborted, try a "
        "smaller eta or enable gradient clipping");
  }
  if (cfg.grad_clip > 0.0 && st.grad_norm > cfg.grad_clip) {
    scale_params(total, cfg.grad_clip / st.grad_norm);
    st.clipped = true;
  }
  MlpParams updated = params;
  axpy(cfg.eta, total, updated);  // ascent: rewards are maximized
  return {std::move(updated), st};
}

struct EpochStats {
  std::size_t epoch = 0;
  double utility = 0.0;   // training-batch means
  double fairness = 0.0;
  double combined = 0.0;
  double val_utility = 0.0;
  double val_fairness = 0.0;
  double val_combined = 0.0;
  double val_relative_error = 0.0;
  double val_recall = 0.0;
  double loss = 0.0;      // supervised objectives only
  double val_loss = 0.0;  // supervised objectives only
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

inline void save_history_csv(const TrainHistory& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open history for writing: " + path);
  out << "epoch,utility,fairness,combined,loss,val_utility,val_fairness,val_combined,"
         "val_relative_error,val_recall,val_loss\n";
  for (const auto& e : h.epochs) {
    out << e.epoch << ',' << format_double(e.utility) << ',' << format_double(e.fairness)
        << ',' << format_double(e.combined) << ',' << format_double(e.loss) << ','
        << format_double(e.val_utility) << ',' << format_double(e.val_fairness) << ','
        << format_double(e.val_combined) << ',' << format_double(e.val_relative_error)
        << ',' << format_double(e.val_recall) << ',' << format_double(e.val_loss) << "\n";
  }
  if (!out) throw IoError("failed writing history: " + path);
}

namespace detail {

struct ValStats {
  double utility = 0.0, fairness = 0.0, combined = 0.0;
  double rel_err = 0.0, recall = 0.0;
};

// Mean reward and ranking quality on a held-out split. Stochastic policies
// are sampled n_eval_val times per trial; deterministic ones are sorted once.
inline ValStats validation_stats(const MlpParams& params, const Dataset& ds,
                                 const std::vector<std::size_t>& val_idx,
                                 const TrainConfig& cfg, std::uint64_t salt,
                                 bool deterministic) {
  std::vector<ValStats> slots(val_idx.size());
  parallel_for(val_idx.size(), cfg.threads, [&](std::size_t i) {
    const CandidateSet& cs = ds.trials[val_idx[i]];
    const ScoreVector scores = forward(params, cs.trial, cs.sites);
    std::vector<Ranking> samples;
    if (deterministic) {
      samples.push_back(rank_deterministic(scores, cfg.k));
    } else {
      RngStream rng(derive_seed(salt, "val_mc", i));
      for (std::size_t s = 0; s < cfg.n_eval_val; ++s) {
        samples.push_back(sample_ranking(scores, rng));
      }
    }
    ValStats& vs = slots[i];
    const auto truth = true_topk_set(cs.enrollment, cfg.k);
    for (const auto& r : samples) {
      const RewardValue rv = combined_reward(r, cs.enrollment, cs.membership, cfg.k,
                                             cfg.lambda, cfg.fairness_mode);
      vs.utility += rv.utility;
      vs.fairness += rv.fairness;
      vs.combined += rv.combined;
      const std::vector<std::size_t> sel(r.order.begin(),
                                         r.order.begin() + static_cast<std::ptrdiff_t>(cfg.k));
      vs.recall += recall_at_k(sel, truth);
    }
    const double n = static_cast<double>(samples.size());
    vs.utility /= n;
    vs.fairness /= n;
    vs.combined /= n;
    vs.recall /= n;
    vs.rel_err = relative_error(samples, cs.enrollment, cfg.k);
  });
  ValStats total;
  const double n = static_cast<double>(val_idx.size());
  for (const auto& vs : slots) {
    total.utility += vs.utility / n;
    total.fairness += vs.fairness / n;
    total.combined += vs.combined / n;
    total.rel_err += vs.rel_err / n;
    total.recall += vs.recall / n;
  }
  return total;
}

inline void check_train_split(const Dataset& ds, const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw ValidationError("train: dataset has no training trials");
  for (std::size_t i : idx) {
    validate_candidate_set(ds.trials[i], /*require_positive_enrollment=*/true);
  }
}

}  // namespace detail

// REINFORCE training over shuffled mini-batches. Returns the checkpoint with
// the best validation combined reward (the final parameters when there is no
// validation split) plus the per-epoch history.
inline std::pair<MlpParams, TrainHistory> train(const Dataset& ds, const TrainConfig& cfg) {
  const auto train_idx = ds.indices_of(Split::Train);
  detail::check_train_split(ds, train_idx);
  if (cfg.batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  const auto val_idx = ds.indices_of(Split::Val);
  const ScorerConfig scfg{ds.header.p, ds.header.q, cfg.h1, cfg.h2,
                          derive_seed(cfg.seed, "init")};
  MlpParams params = init_params(scfg);
  MlpParams best = params;
  double best_val = -std::numeric_limits<double>::infinity();
  bool have_best = false;
  TrainHistory history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto order = train_idx;
    make_stream(cfg.seed, "shuffle", epoch).shuffle(order);
    EpochStats es;
    es.epoch = epoch;
    for (std::size_t start = 0, step = 0; start < order.size();
         start += cfg.batch_size, ++step) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      std::vector<const CandidateSet*> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(&ds.trials[order[i]]);
      RngStream step_rng = make_stream(cfg.seed, "step", epoch, step);
      auto [updated, st] = reinforce_step(params, batch, cfg, step_rng);
      params = std::move(updated);
      const double w = static_cast<double>(batch.size()) / static_cast<double>(order.size());
      es.utility += w * st.mean_utility;
      es.fairness += w * st.mean_fairness;
      es.combined += w * st.mean_combined;
    }
    if (!val_idx.empty()) {
      const auto vs = detail::validation_stats(params, ds, val_idx, cfg,
                                               derive_seed(cfg.seed, "val", epoch), false);
      es.val_utility = vs.utility;
      es.val_fairness = vs.fairness;
      es.val_combined = vs.combined;
      es.val_relative_error = vs.rel_err;
      es.val_recall = vs.recall;
      if (vs.combined > best_val) {
        best_val = vs.combined;
        best = params;
        have_best = true;
      }
    }
    history.epochs.push_back(es);
  }
  if (!have_best) best = params;
  return {std::move(best), std::move(history)};
}

// --- supervised baselines ---------------------------------------------------

enum class SupervisedLoss { BinaryCrossEntropy, MeanSquaredError };

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-trial loss and d(loss)/d(scores) for the supervised baselines.
// BCE labels the true Top-K sites 1 and the rest 0; regression fits the raw
// enrollment vector with mean squared error.
inline double supervised_loss_and_grad(const ScoreVector& scores, const CandidateSet& cs,
                                       SupervisedLoss loss, std::size_t k,
                                       std::vector<double>& grad_scores) {
  const std::size_t m = cs.num_sites();
  const auto& s = scores.values;
  grad_scores.assign(m, 0.0);
  if (loss == SupervisedLoss::BinaryCrossEntropy) {
    std::vector<double> y(m, 0.0);
    for (std::size_t i : true_topk_set(cs.enrollment, k)) y[i] = 1.0;
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      // softplus(s) - y*s == -[y log sig(s) + (1-y) log(1-sig(s))], stable
      total += softplus(s[i]) - y[i] * s[i];
      grad_scores[i] = sigmoid(s[i]) - y[i];
    }
    return total;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = s[i] - cs.enrollment[i];
    total += d * d / static_cast<double>(m);
    grad_scores[i] = 2.0 * d / static_cast<double>(m);
  }
  return total;
}

struct SupervisedTrialResult {
  ParamGrads grads;
  double loss = 0.0;
  double det_utility = 0.0;
  double det_entropy = 0.0;
};

inline std::pair<MlpParams, TrainHistory> train_supervised(const Dataset& ds,
                                                           const TrainConfig& cfg,
                                                           SupervisedLoss loss) {
  const auto train_idx = ds.indices_of(Split::Train);
  check_train_split(ds, train_idx);
  if (cfg.batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  for (std::size_t i : train_idx) {
    if (cfg.k < 1 || cfg.k > ds.trials[i].num_sites()) {
      throw ValidationError("train: k out of range for M");
    }
  }
  const auto val_idx = ds.indices_of(Split::Val);
  const ScorerConfig scfg{ds.header.p, ds.header.q, cfg.h1, cfg.h2,
                          derive_seed(cfg.seed, "init")};
  MlpParams params = init_params(scfg);
  MlpParams best = params;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool have_best = false;
  TrainHistory history;

  auto trial_pass = [&](const MlpParams& at, const CandidateSet& cs,
                        SupervisedTrialResult& out, bool want_grads) {
    ForwardCache cache;
    const ScoreVector scores = forward(at, cs.trial, cs.sites, want_grads ? &cache : nullptr);
    std::vector<double> gs;
    out.loss = supervised_loss_and_grad(scores, cs, loss, cfg.k, gs);
    const Ranking det = rank_deterministic(scores, cfg.k);
    out.det_utility = utility_reward(det, cs.enrollment, cfg.k);
    out.det_entropy = fairness_reward(det, cs.membership, cfg.k);
    if (want_grads) out.grads = backward(at, cache, gs);
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto order = train_idx;
    make_stream(cfg.seed, "shuffle", epoch).shuffle(order);
    EpochStats es;
    es.epoch = epoch;
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      const std::size_t b = end - start;
      std::vector<SupervisedTrialResult> slots(b);
      parallel_for(b, cfg.threads, [&](std::size_t i) {
        trial_pass(params, ds.trials[order[start + i]], slots[i], true);
      });
      ParamGrads total = zeros_like(params);
      for (std::size_t i = 0; i < b; ++i) {
        axpy(1.0 / static_cast<double>(b), slots[i].grads, total);
        const double w = 1.0 / static_cast<double>(order.size());
        epoch_loss += w * slots[i].loss;
        es.utility += w * slots[i].det_utility;
        es.fairness += w * slots[i].det_entropy;
      }
      const double norm = global_norm(total);
      if (!std::isfinite(norm) || !all_finite(total)) {
        throw DivergenceError("supervised step: non-finite gradient; try a smaller eta");
      }
      if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) {
        scale_params(total, cfg.grad_clip / norm);
      }
      axpy(-cfg.eta, total, params);  // descent: losses are minimized
    }
    es.loss = epoch_loss;
    es.combined = es.utility + cfg.lambda * es.fairness;
    if (!val_idx.empty()) {
      double val_loss = 0.0;
      std::vector<SupervisedTrialResult> slots(val_idx.size());
      parallel_for(val_idx.size(), cfg.threads, [&](std::size_t i) {
        trial_pass(params, ds.trials[val_idx[i]], slots[i], false);
      });
      double vu = 0.0, vf = 0.0;
      for (const auto& r : slots) {
        val_loss += r.loss / static_cast<double>(val_idx.size());
        vu += r.det_utility / static_cast<double>(val_idx.size());
        vf += r.det_entropy / static_cast<double>(val_idx.size());
      }
      const auto vs = validation_stats(params, ds, val_idx, cfg,
                                       derive_seed(cfg.seed, "val", epoch), true);
      es.val_utility = vu;
      es.val_fairness = vf;
      es.val_combined = vu + cfg.lambda * vf;
      es.val_relative_error = vs.rel_err;
      es.val_recall = vs.recall;
      es.val_loss = val_loss;
      if (val_loss < best_val_loss) {
        best_val_loss = val_loss;
        best = params;
        have_best = true;
      }
    }
    history.epochs.push_back(es);
  }
  if (!have_best) best = params;
  return {std::move(best), std::move(history)};
}

}  // namespace detail

// Binary-classification baseline: sigmoid outputs, binary cross-entropy
// against Top-K membership labels, gradient descent.
inline std::pair<MlpParams, TrainHistory> train_bc(const Dataset& ds,
                                                   const TrainConfig& cfg) {
  return detail::train_supervised(ds, cfg, SupervisedLoss::BinaryCrossEntropy);
}

// Regression baseline: fits the enrollment vector with mean squared error;
// ranking is then deterministic by sorted score.
inline std::pair<MlpParams, TrainHistory> train_regress(const Dataset& ds,
                                                        const TrainConfig& cfg) {
  return detail::train_supervised(ds, cfg, SupervisedLoss::MeanSquaredError);
}

}  // namespace fairrank
