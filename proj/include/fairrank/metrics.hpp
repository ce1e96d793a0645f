#pragma once
// Evaluation metrics: relative enrollment error, Top-K recall, NDCG, cohort
// entropy, expected group representation, and relative change between runs.
// evaluate() applies them to a model over a dataset split, Monte-Carlo style
// over sampled rankings (or a single deterministic ranking).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairrank/core.hpp"
#include "fairrank/datagen.hpp"
#include "fairrank/parallel.hpp"
#include "fairrank/pl_policy.hpp"
#include "fairrank/rewards.hpp"
#include "fairrank/rng.hpp"
#include "fairrank/scorer.hpp"
#include "fairrank/text_io.hpp"

namespace fairrank {

// Indices of the true Top-K sites: highest enrollment first, ties broken by
// ascending site index, truncated to min(number of positive-enrollment
// sites, k).
inline std::vector<std::size_t> true_topk_set(const std::vector<double>& e,
                                              std::size_t k) {
  std::vector<std::size_t> idx(e.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&e](std::size_t a, std::size_t b) { return e[a] > e[b]; });
  std::size_t positives = 0;
  for (double v : e) {
    if (v > 0.0) ++positives;
  }
  idx.resize(std::min(k, positives));
  return idx;
}

// (max achievable Top-K enrollment - Monte-Carlo mean achieved) / max.
inline double relative_error(const std::vector<Ranking>& samples,
                             const std::vector<double>& e, std::size_t k) {
  if (samples.empty()) throw ValidationError("relative_error: no ranking samples");
  if (k > e.size()) throw ValidationError("relative_error: k > M");
  std::vector<double> sorted = e;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double delta_max = 0.0;
  for (std::size_t i = 0; i < k; ++i) delta_max += sorted[i];
  if (!(delta_max > 0.0)) {
    throw ValidationError("relative_error: best Top-K enrollment is zero");
  }
  double achieved = 0.0;
  for (const auto& r : samples) {
    if (!is_permutation(r, e.size())) {
      throw ValidationError("relative_error: invalid ranking");
    }
    for (std::size_t i = 0; i < k; ++i) achieved += e[r.order[i]];
  }
  achieved /= static_cast<double>(samples.size());
  return (delta_max - achieved) / delta_max;
}

// Fraction of the true Top-K set that was selected.
inline double recall_at_k(const std::vector<std::size_t>& selected,
                          const std::vector<std::size_t>& true_topk) {
  if (true_topk.empty()) throw ValidationError("recall_at_k: empty true Top-K set");
  std::size_t hits = 0;
  for (std::size_t t : true_topk) {
    for (std::size_t s : selected) {
      if (s == t) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(true_topk.size());
}

// Gain transform fed into NDCG's 2^gain. The default maps the dataset's
// enrollment range affinely onto [0, 10], keeping 2^gain discriminative; the
// raw mode uses enrollments untouched.
struct GainTransform {
  bool raw = false;
  double offset = 0.0;
  double scale = 1.0;

  double operator()(double e) const { return raw ? e : (e - offset) * scale; }

  static GainTransform raw_gains() { return GainTransform{true, 0.0, 1.0}; }

  static GainTransform scaled_to_range(double e_min, double e_max) {
    GainTransform gt;
    gt.raw = false;
    gt.offset = e_min;
    gt.scale = e_max > e_min ? 10.0 / (e_max - e_min) : 0.0;
    return gt;
  }

  static GainTransform for_dataset(const Dataset& ds, bool raw) {
    if (raw) return raw_gains();
    const auto [lo, hi] = ds.enrollment_range();
    return scaled_to_range(lo, hi);
  }
};

// Top-K NDCG with exponential gains: sum of (2^g - 1)/log2(rank + 1) over the
// prefix, normalized by the same sum over the ideal (descending-gain) order.
// When every gain is equal the metric is 1 by convention.
inline double ndcg_at_k(const Ranking& r, const std::vector<double>& e, std::size_t k,
                        const GainTransform& gt = GainTransform::raw_gains()) {
  if (!is_permutation(r, e.size())) throw ValidationError("ndcg_at_k: invalid ranking");
  if (k < 1 || k > e.size()) throw ValidationError("ndcg_at_k: bad k");
  std::vector<double> gain(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    gain[i] = std::exp2(gt(e[i])) - 1.0;
    if (!std::isfinite(gain[i])) {
      throw ValidationError("ndcg_at_k: gain overflow after transform; rescale enrollments");
    }
  }
  double num = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    num += gain[r.order[i]] / std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<double> ideal = gain;
  std::sort(ideal.begin(), ideal.end(), std::greater<double>());
  double den = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    den += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
  }
  return den > 0.0 ? num / den : 1.0;
}

// Monte-Carlo mean of the average membership distribution of the Top-K sites.
inline GroupDistribution expected_group_representation(
    const std::vector<Ranking>& samples, const std::vector<GroupDistribution>& membership,
    std::size_t k) {
  if (samples.empty()) {
    throw ValidationError("expected_group_representation: no ranking samples");
  }
  if (k < 1 || k > membership.size()) {
    throw ValidationError("expected_group_representation: bad k");
  }
  const std::size_t l = membership.front().weights.size();
  GroupDistribution n_star;
  n_star.weights.assign(l, 0.0);
  for (const auto& r : samples) {
    if (!is_permutation(r, membership.size())) {
      throw ValidationError("expected_group_representation: invalid ranking");
    }
    for (std::size_t i = 0; i < k; ++i) {
      const auto& row = membership[r.order[i]].weights;
      for (std::size_t g = 0; g < l; ++g) n_star.weights[g] += row[g];
    }
  }
  const double denom = static_cast<double>(samples.size()) * static_cast<double>(k);
  for (double& w : n_star.weights) w /= denom;
  return n_star;
}

// Per-group (with - without) / without. Groups absent from the reference
// (zero weight) get an empty marker instead of a number.
inline std::vector<std::optional<double>> relative_change(
    const GroupDistribution& with_div, const GroupDistribution& without_div) {
  if (with_div.weights.size() != without_div.weights.size()) {
    throw ValidationError("relative_change: group count mismatch");
  }
  std::vector<std::optional<double>> out(with_div.weights.size());
  for (std::size_t g = 0; g < out.size(); ++g) {
    const double base = without_div.weights[g];
    if (base > 0.0) out[g] = (with_div.weights[g] - base) / base;
  }
  return out;
}

struct EvalConfig {
  std::size_t k = 10;
  std::size_t n_eval = 20;       // ranking samples per trial
  std::uint64_t seed = 1;
  bool deterministic = false;    // sort by score instead of sampling
  bool raw_gains = false;        // NDCG on untransformed enrollments
  std::size_t threads = 0;
};

struct EvalReport {
  std::string label;
  std::size_t n_trials = 0;
  double relative_error = 0.0;
  double recall = 0.0;
  double ndcg = 0.0;
  double entropy = 0.0;  // nats
  GroupDistribution group_representation;
  std::vector<std::optional<double>> rel_change;  // vs a reference report
};

namespace detail {

struct TrialEval {
  double rel_err = 0.0, recall = 0.0, ndcg = 0.0, entropy = 0.0;
  std::vector<double> representation;
};

inline TrialEval evaluate_trial(const MlpParams& params, const CandidateSet& cs,
                                std::size_t global_index, const EvalConfig& cfg,
                                const GainTransform& gt) {
  const std::size_t m = cs.num_sites();
  if (cfg.k < 1 || cfg.k > m) {
    throw ValidationError("evaluate: k=" + std::to_string(cfg.k) +
                          " out of range for M=" + std::to_string(m));
  }
  const ScoreVector scores = forward(params, cs.trial, cs.sites);
  std::vector<Ranking> samples;
  if (cfg.deterministic) {
    samples.push_back(rank_deterministic(scores, cfg.k));
  } else {
    RngStream rng = make_stream(cfg.seed, "eval", global_index);
    samples.reserve(cfg.n_eval);
    for (std::size_t s = 0; s < cfg.n_eval; ++s) {
      samples.push_back(sample_ranking(scores, rng));
    }
  }
  TrialEval out;
  out.rel_err = relative_error(samples, cs.enrollment, cfg.k);
  const auto truth = true_topk_set(cs.enrollment, cfg.k);
  for (const auto& r : samples) {
    const std::vector<std::size_t> selected(r.order.begin(),
                                            r.order.begin() + static_cast<std::ptrdiff_t>(cfg.k));
    out.recall += recall_at_k(selected, truth);
    out.ndcg += ndcg_at_k(r, cs.enrollment, cfg.k, gt);
    out.entropy += fairness_reward(r, cs.membership, cfg.k);
  }
  const double n = static_cast<double>(samples.size());
  out.recall /= n;
  out.ndcg /= n;
  out.entropy /= n;
  out.representation = expected_group_representation(samples, cs.membership, cfg.k).weights;
  return out;
}

}  // namespace detail

// Evaluates the scorer over the given trials (global dataset indices) and
// averages the per-trial metrics. Deterministic given the seed.
inline EvalReport evaluate_trials(const MlpParams& params, const Dataset& ds,
                                  const std::vector<std::size_t>& indices,
                                  const EvalConfig& cfg, const std::string& label) {
  if (indices.empty()) throw ValidationError("evaluate: no trials in '" + label + "'");
  const GainTransform gt = GainTransform::for_dataset(ds, cfg.raw_gains);
  std::vector<detail::TrialEval> slots(indices.size());
  parallel_for(indices.size(), cfg.threads, [&](std::size_t i) {
    slots[i] = detail::evaluate_trial(params, ds.trials[indices[i]], indices[i], cfg, gt);
  });
  EvalReport rep;
  rep.label = label;
  rep.n_trials = indices.size();
  rep.group_representation.weights.assign(ds.header.l, 0.0);
  for (const auto& s : slots) {
    rep.relative_error += s.rel_err;
    rep.recall += s.recall;
    rep.ndcg += s.ndcg;
    rep.entropy += s.entropy;
    for (std::size_t g = 0; g < s.representation.size(); ++g) {
      rep.group_representation.weights[g] += s.representation[g];
    }
  }
  const double n = static_cast<double>(indices.size());
  rep.relative_error /= n;
  rep.recall /= n;
  rep.ndcg /= n;
  rep.entropy /= n;
  for (double& w : rep.group_representation.weights) w /= n;
  return rep;
}

inline EvalReport evaluate(const MlpParams& params, const Dataset& ds, Split split,
                           const EvalConfig& cfg) {
  return evaluate_trials(params, ds, ds.indices_of(split), cfg, split_name(split));
}

// One report per distinct value of the trial attribute `group_key` within the
// split, keyed by "key=value". Trials lacking the attribute group under "-".
inline std::vector<EvalReport> evaluate_grouped(const MlpParams& params,
                                                const Dataset& ds, Split split,
                                                const std::string& group_key,
                                                const EvalConfig& cfg) {
  std::map<std::string, std::vector<std::size_t>> buckets;
  for (std::size_t i : ds.indices_of(split)) {
    const auto& attrs = ds.meta[i].attrs;
    const auto it = attrs.find(group_key);
    buckets[it == attrs.end() ? "-" : it->second].push_back(i);
  }
  if (buckets.empty()) throw ValidationError("evaluate: empty split");
  std::vector<EvalReport> reports;
  reports.reserve(buckets.size());
  for (const auto& [value, indices] : buckets) {
    reports.push_back(
        evaluate_trials(params, ds, indices, cfg, group_key + "=" + value));
  }
  return reports;
}

// --- report serialization ---------------------------------------------------

inline void save_reports_csv(const std::vector<EvalReport>& reports,
                             const std::string& path) {
  if (reports.empty()) throw ValidationError("save_reports_csv: no reports");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open report for writing: " + path);
  const std::size_t l = reports.front().group_representation.weights.size();
  const bool has_change = !reports.front().rel_change.empty();
  out << "label,n_trials,relative_error,recall,ndcg,entropy";
  for (std::size_t g = 0; g < l; ++g) out << ",rep_" << g;
  if (has_change) {
    for (std::size_t g = 0; g < l; ++g) out << ",rel_change_" << g;
  }
  out << "\n";
  for (const auto& r : reports) {
    out << r.label << ',' << r.n_trials << ',' << format_double(r.relative_error) << ','
        << format_double(r.recall) << ',' << format_double(r.ndcg) << ','
        << format_double(r.entropy);
    for (double w : r.group_representation.weights) out << ',' << format_double(w);
    if (has_change) {
      for (const auto& c : r.rel_change) {
        out << ',' << (c.has_value() ? format_double(*c) : std::string("undef"));
      }
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing report: " + path);
}

inline void save_report_kv(const EvalReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open report for writing: " + path);
  out << "label=" << r.label << "\n"
      << "n_trials=" << r.n_trials << "\n"
      << "relative_error=" << format_double(r.relative_error) << "\n"
      << "recall=" << format_double(r.recall) << "\n"
      << "ndcg=" << format_double(r.ndcg) << "\n"
      << "entropy=" << format_double(r.entropy) << "\n";
  out << "group_representation=";
  for (std::size_t g = 0; g < r.group_representation.weights.size(); ++g) {
    if (g != 0) out << ',';
    out << format_double(r.group_representation.weights[g]);
  }
  out << "\n";
  if (!r.rel_change.empty()) {
    out << "relative_change=";
    for (std::size_t g = 0; g < r.rel_change.size(); ++g) {
      if (g != 0) out << ',';
      out << (r.rel_change[g].has_value() ? format_double(*r.rel_change[g])
                                          : std::string("undef"));
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing report: " + path);
}

// Reads back the group representation of an earlier key-value report, for
// relative-change comparisons.
inline GroupDistribution load_report_representation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open reference report: " + path);
  std::string line;
  while (std::getline(in, line)) {
    std::string_view key, value;
    if (split_key_value(line, key, value) && key == "group_representation") {
      GroupDistribution d;
      for (const auto& tok : split(value, ',')) {
        d.weights.push_back(parse_double(tok, path));
      }
      return d;
    }
  }
  throw IoError(path + ": no group_representation line");
}

}  // namespace fairrank
