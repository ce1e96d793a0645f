#pragma once
// Synthetic dataset generation with planted ground truth, negative sampling,
// and the line-oriented dataset file format.
//
// Generation plants a latent low-dimensional affinity between each trial and
// site; enrollment is a softplus of that affinity (plus optional noise) and
// the observed features are noisy linear images of the latents, so the true
// Top-K is recoverable from what the model sees. Membership rows come from a
// Dirichlet, with a configurable fraction of near-homogeneous sites whose
// enrollment is boosted, which makes the diversity/utility tradeoff bind.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "fairrank/core.hpp"
#include "fairrank/rng.hpp"
#include "fairrank/text_io.hpp"

namespace fairrank {

enum class Split { Train, Val, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s, const std::string& context) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw IoError(context + ": unknown split '" + std::string(s) + "'");
}

struct GenConfig {
  std::size_t n_trials = 400;
  std::size_t m = 20;  // candidate sites per trial
  std::size_t l = 6;   // demographic groups
  std::size_t p = 64;  // observed trial feature dim
  std::size_t q = 26;  // observed site feature dim
  std::size_t latent_dim = 6;
  double feature_noise = 0.03;
  double enrollment_scale = 0.4;
  // Enrollment affinity mixes a trial-specific interaction with a general
  // site-quality term (first latent coordinate); the quality share is what
  // makes small training sets sufficient to recover most of the ordering.
  double site_quality_weight = 1.25;
  // Per-trial log-normal enrollment scale (sigma of log). Real trials differ
  // widely in overall size; within-trial ranking is invariant to it.
  double trial_scale_sigma = 0.6;
  std::vector<double> group_concentration;  // length l; default filled with 2.0
  double homogeneous_fraction = 0.5;        // share of one-group-dominant sites
  double homogeneous_boost = 0.75;          // affinity bonus for those sites
  std::size_t split_train = 280, split_val = 60, split_test = 60;
  std::size_t k = 10;  // recorded in the header for downstream defaults
  std::uint64_t seed = 1;
};

// Per-trial bookkeeping that is not part of the core candidate set: split
// assignment and free-form attributes (used by evaluate --group-by).
struct TrialMeta {
  Split split = Split::Train;
  std::map<std::string, std::string> attrs;
};

struct IndexRange {
  std::size_t lo = 0, hi = 0;  // [lo, hi)
};

struct DatasetHeader {
  std::size_t format_version = 1;
  std::size_t n_trials = 0, m = 0, l = 0, p = 0, q = 0, k = 0;
  std::size_t split_train = 0, split_val = 0, split_test = 0;
  std::uint64_t seed = 0;
  // Optional schema metadata: inclusive-exclusive [lo, hi) index ranges whose
  // entries must be exactly 0/1 (one-hot segments) or non-negative.
  std::vector<IndexRange> trial_binary_segments;
  std::vector<IndexRange> site_nonneg_segments;
};

struct Dataset {
  DatasetHeader header;
  std::vector<CandidateSet> trials;
  std::vector<TrialMeta> meta;

  std::vector<std::size_t> indices_of(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < meta.size(); ++i) {
      if (meta[i].split == s) out.push_back(i);
    }
    return out;
  }

  std::pair<double, double> enrollment_range() const {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& cs : trials) {
      for (double e : cs.enrollment) {
        if (first) {
          lo = hi = e;
          first = false;
        } else {
          lo = std::min(lo, e);
          hi = std::max(hi, e);
        }
      }
    }
    return {lo, hi};
  }
};

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

namespace detail {

// Dominant-group draw for homogeneous sites, skewed geometrically so one
// group behaves like a majority.
inline std::size_t draw_dominant_group(RngStream& rng, std::size_t l) {
  double total = 0.0, w = 1.0;
  std::vector<double> base(l);
  for (std::size_t g = 0; g < l; ++g) {
    base[g] = w;
    total += w;
    w *= 0.35;
  }
  double u = rng.uniform01() * total;
  for (std::size_t g = 0; g < l; ++g) {
    if (u < base[g]) return g;
    u -= base[g];
  }
  return l - 1;
}

inline void check_segments(const std::vector<double>& v,
                           const std::vector<IndexRange>& segments, bool binary,
                           const std::string& context) {
  for (const auto& seg : segments) {
    if (seg.hi > v.size() || seg.lo > seg.hi) {
      throw IoError(context + ": schema segment out of range");
    }
    for (std::size_t i = seg.lo; i < seg.hi; ++i) {
      if (binary ? (v[i] != 0.0 && v[i] != 1.0) : (v[i] < 0.0)) {
        throw ValidationError(context + ": entry " + std::to_string(i) +
                              (binary ? " not 0/1 in a one-hot segment"
                                      : " negative in a histogram segment"));
      }
    }
  }
}

}  // namespace detail

// Deterministic synthetic dataset with planted ground truth. Split
// assignment is by trial index: the first split_train trials train, the next
// split_val validate, the rest test.
inline Dataset generate(const GenConfig& cfg) {
  if (cfg.n_trials == 0 || cfg.m == 0 || cfg.l == 0 || cfg.p == 0 || cfg.q == 0) {
    throw ValidationError("generate: all sizes must be >= 1");
  }
  if (cfg.latent_dim < 2) {
    throw ValidationError("generate: latent_dim must be >= 2");
  }
  if (cfg.split_train + cfg.split_val + cfg.split_test != cfg.n_trials) {
    throw ValidationError("generate: split sizes must sum to n_trials");
  }
  if (cfg.feature_noise < 0.0 || !(cfg.enrollment_scale > 0.0)) {
    throw ValidationError("generate: bad noise or scale");
  }
  std::vector<double> concentration = cfg.group_concentration;
  if (concentration.empty()) concentration.assign(cfg.l, 2.0);
  if (concentration.size() != cfg.l) {
    throw ValidationError("generate: group_concentration length != l");
  }

  const std::size_t d = cfg.latent_dim;
  const double latent_scale = 1.0 / std::sqrt(static_cast<double>(d));

  // Fixed observation maps shared by every trial.
  RngStream proj_rng = make_stream(cfg.seed, "gen/projection");
  std::vector<double> proj_trial(cfg.p * d), proj_site(cfg.q * d);
  for (double& v : proj_trial) v = proj_rng.normal(0.0, latent_scale);
  for (double& v : proj_site) v = proj_rng.normal(0.0, latent_scale);

  static const char* kAreas[] = {"oncology", "cardio", "neuro", "immuno"};
  static const double kPhaseWeights[] = {0.20, 0.31, 0.42, 0.07};

  Dataset ds;
  ds.header.n_trials = cfg.n_trials;
  ds.header.m = cfg.m;
  ds.header.l = cfg.l;
  ds.header.p = cfg.p;
  ds.header.q = cfg.q;
  ds.header.k = cfg.k;
  ds.header.split_train = cfg.split_train;
  ds.header.split_val = cfg.split_val;
  ds.header.split_test = cfg.split_test;
  ds.header.seed = cfg.seed;
  ds.trials.reserve(cfg.n_trials);
  ds.meta.resize(cfg.n_trials);

  std::vector<double> z_t(d), z_i(d);
  for (std::size_t t = 0; t < cfg.n_trials; ++t) {
    RngStream rng = make_stream(cfg.seed, "gen/trial", t);
    CandidateSet cs;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "t%05zu", t);
    cs.trial.id = idbuf;
    for (double& v : z_t) v = rng.normal();
    const double trial_scale = std::exp(cfg.trial_scale_sigma * rng.normal());
    cs.trial.dense.resize(cfg.p);
    for (std::size_t j = 0; j < cfg.p; ++j) {
      double acc = 0.0;
      for (std::size_t a = 0; a < d; ++a) acc += proj_trial[j * d + a] * z_t[a];
      cs.trial.dense[j] = acc + cfg.feature_noise * rng.normal();
    }

    cs.sites.resize(cfg.m);
    cs.enrollment.resize(cfg.m);
    cs.membership.resize(cfg.m);
    // Homogeneity is tied to an observed latent coordinate, so the enrollment
    // boost that comes with it is recoverable from the features.
    const double homog_threshold =
        cfg.homogeneous_fraction <= 0.0   ? std::numeric_limits<double>::infinity()
        : cfg.homogeneous_fraction >= 1.0 ? -std::numeric_limits<double>::infinity()
                                          : inverse_normal_cdf(1.0 - cfg.homogeneous_fraction);
    for (std::size_t i = 0; i < cfg.m; ++i) {
      for (double& v : z_i) v = rng.normal();
      const bool homogeneous = z_i[1] > homog_threshold;

      std::snprintf(idbuf, sizeof(idbuf), "t%05zu_s%03zu", t, i);
      cs.sites[i].id = idbuf;
      cs.sites[i].dense.resize(cfg.q);
      for (std::size_t j = 0; j < cfg.q; ++j) {
        double acc = 0.0;
        for (std::size_t a = 0; a < d; ++a) acc += proj_site[j * d + a] * z_i[a];
        cs.sites[i].dense[j] = acc + cfg.feature_noise * rng.normal();
      }

      double affinity = 0.0;
      for (std::size_t a = 0; a < d; ++a) affinity += z_t[a] * z_i[a];
      affinity *= latent_scale;
      affinity += cfg.site_quality_weight * z_i[0];
      if (homogeneous) affinity += cfg.homogeneous_boost;
      double e = cfg.enrollment_scale * softplus(affinity);
      if (cfg.feature_noise > 0.0) {
        e += cfg.feature_noise * cfg.enrollment_scale * rng.normal();
      }
      cs.enrollment[i] = trial_scale * std::max(e, 0.0);

      if (homogeneous) {
        const std::size_t dom = detail::draw_dominant_group(rng, cfg.l);
        std::vector<double> alpha(cfg.l, 0.15);
        alpha[dom] = 30.0;
        cs.membership[i].weights = rng.dirichlet(alpha);
      } else {
        cs.membership[i].weights = rng.dirichlet(concentration);
      }
    }

    TrialMeta& meta = ds.meta[t];
    meta.split = t < cfg.split_train                  ? Split::Train
                 : t < cfg.split_train + cfg.split_val ? Split::Val
                                                       : Split::Test;
    double u = rng.uniform01();
    std::size_t phase = 4;
    for (std::size_t ph = 0; ph < 4; ++ph) {
      if (u < kPhaseWeights[ph]) {
        phase = ph + 1;
        break;
      }
      u -= kPhaseWeights[ph];
    }
    meta.attrs["phase"] = std::to_string(phase);
    meta.attrs["ta"] = kAreas[rng.uniform_index(4)];

    ds.trials.push_back(
        validate_candidate_set(std::move(cs), meta.split == Split::Train));
  }
  return ds;
}

// Entry of the negative-sampling pool: a site plus the membership row needed
// to build a valid padded candidate set.
struct PoolSite {
  SiteFeatures features;
  GroupDistribution membership;
};

// Pads the candidate set with unrelated pool sites assigned zero enrollment
// until it has m_target sites. Pool sites are drawn uniformly without
// replacement. The pool must be disjoint from the present sites (by id).
inline CandidateSet negative_sample(const std::vector<PoolSite>& pool,
                                    CandidateSet present, std::size_t m_target,
                                    RngStream& rng) {
  if (present.num_sites() >= m_target) return present;
  const std::size_t need = m_target - present.num_sites();
  if (pool.size() < need) {
    throw ValidationError("negative_sample: pool has " + std::to_string(pool.size()) +
                          " sites, need " + std::to_string(need));
  }
  for (const auto& ps : pool) {
    for (const auto& s : present.sites) {
      if (!ps.features.id.empty() && ps.features.id == s.id) {
        throw ValidationError("negative_sample: pool overlaps candidate set (site '" +
                              s.id + "')");
      }
    }
  }
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t j = 0; j < need; ++j) {  // partial Fisher-Yates
    const std::size_t pick = j + rng.uniform_index(idx.size() - j);
    std::swap(idx[j], idx[pick]);
  }
  for (std::size_t j = 0; j < need; ++j) {
    const PoolSite& ps = pool[idx[j]];
    present.sites.push_back(ps.features);
    present.enrollment.push_back(0.0);
    present.membership.push_back(ps.membership);
  }
  return validate_candidate_set(std::move(present));
}

// ---------------------------------------------------------------------------
// File format: a key=value header block closed by "end_header", then one
// comma-separated record per trial:
//   trial_id,split,attrs,<p trial values>,{site_id,<q values>,e,<l values>} x m
// attrs is ';'-joined key=value pairs, or '-' when empty. Doubles are written
// with 17 significant digits, so save/load round-trips bit for bit.

namespace detail {

inline std::string encode_attrs(const std::map<std::string, std::string>& attrs) {
  if (attrs.empty()) return "-";
  std::string out;
  for (const auto& [k, v] : attrs) {
    if (!out.empty()) out += ';';
    out += k + "=" + v;
  }
  return out;
}

inline std::map<std::string, std::string> decode_attrs(std::string_view field,
                                                       const std::string& context) {
  std::map<std::string, std::string> attrs;
  if (field == "-" || field.empty()) return attrs;
  for (const auto& pair : split(field, ';')) {
    std::string_view k, v;
    if (!split_key_value(pair, k, v)) {
      throw IoError(context + ": bad attribute '" + std::string(pair) + "'");
    }
    attrs[std::string(k)] = std::string(v);
  }
  return attrs;
}

inline std::string encode_segments(const std::vector<IndexRange>& segs) {
  std::string out;
  for (const auto& s : segs) {
    if (!out.empty()) out += ',';
    out += std::to_string(s.lo) + ":" + std::to_string(s.hi);
  }
  return out;
}

inline std::vector<IndexRange> decode_segments(std::string_view value,
                                               const std::string& context) {
  std::vector<IndexRange> out;
  if (value.empty()) return out;
  for (const auto& tok : split(value, ',')) {
    const auto parts = split(tok, ':');
    if (parts.size() != 2) throw IoError(context + ": bad segment '" + std::string(tok) + "'");
    out.push_back({parse_size(parts[0], context), parse_size(parts[1], context)});
  }
  return out;
}

}  // namespace detail

inline void save(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open dataset for writing: " + path);
  const auto& h = ds.header;
  out << "format_version=" << h.format_version << "\n"
      << "n_trials=" << h.n_trials << "\n"
      << "m=" << h.m << "\nl=" << h.l << "\np=" << h.p << "\nq=" << h.q << "\n"
      << "k=" << h.k << "\n"
      << "split_train=" << h.split_train << "\nsplit_val=" << h.split_val
      << "\nsplit_test=" << h.split_test << "\n"
      << "seed=" << h.seed << "\n";
  if (!h.trial_binary_segments.empty()) {
    out << "trial_binary_segments=" << detail::encode_segments(h.trial_binary_segments)
        << "\n";
  }
  if (!h.site_nonneg_segments.empty()) {
    out << "site_nonneg_segments=" << detail::encode_segments(h.site_nonneg_segments)
        << "\n";
  }
  out << "end_header\n";
  for (std::size_t t = 0; t < ds.trials.size(); ++t) {
    const CandidateSet& cs = ds.trials[t];
    out << cs.trial.id << ',' << split_name(ds.meta[t].split) << ','
        << detail::encode_attrs(ds.meta[t].attrs);
    for (double v : cs.trial.dense) out << ',' << format_double(v);
    for (std::size_t i = 0; i < cs.sites.size(); ++i) {
      out << ',' << cs.sites[i].id;
      for (double v : cs.sites[i].dense) out << ',' << format_double(v);
      out << ',' << format_double(cs.enrollment[i]);
      for (double v : cs.membership[i].weights) out << ',' << format_double(v);
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing dataset: " + path);
}

inline Dataset load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  Dataset ds;
  DatasetHeader& h = ds.header;
  h.format_version = 0;
  std::string line;
  std::size_t line_no = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string ctx = path + ":" + std::to_string(line_no);
    if (line == "end_header") {
      header_done = true;
      break;
    }
    std::string_view key, value;
    if (!split_key_value(line, key, value)) {
      throw IoError(ctx + ": expected key=value in header, got '" + line + "'");
    }
    if (key == "format_version") h.format_version = parse_size(value, ctx);
    else if (key == "n_trials") h.n_trials = parse_size(value, ctx);
    else if (key == "m") h.m = parse_size(value, ctx);
    else if (key == "l") h.l = parse_size(value, ctx);
    else if (key == "p") h.p = parse_size(value, ctx);
    else if (key == "q") h.q = parse_size(value, ctx);
    else if (key == "k") h.k = parse_size(value, ctx);
    else if (key == "split_train") h.split_train = parse_size(value, ctx);
    else if (key == "split_val") h.split_val = parse_size(value, ctx);
    else if (key == "split_test") h.split_test = parse_size(value, ctx);
    else if (key == "seed") h.seed = static_cast<std::uint64_t>(parse_int(value, ctx));
    else if (key == "trial_binary_segments")
      h.trial_binary_segments = detail::decode_segments(value, ctx);
    else if (key == "site_nonneg_segments")
      h.site_nonneg_segments = detail::decode_segments(value, ctx);
    else throw IoError(ctx + ": unknown header key '" + std::string(key) + "'");
  }
  if (!header_done) throw IoError(path + ": missing end_header");
  if (h.format_version != 1) {
    throw IoError(path + ": unsupported format_version " +
                  std::to_string(h.format_version));
  }
  if (h.m == 0 || h.l == 0 || h.p == 0 || h.q == 0) {
    throw IoError(path + ": header is missing m/l/p/q");
  }

  const std::size_t fields_per_site = 1 + h.q + 1 + h.l;
  const std::size_t expect = 3 + h.p + h.m * fields_per_site;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    const std::string record = f.empty() ? "?" : std::string(f[0]);
    const std::string ctx = path + ":" + std::to_string(line_no) + " (record '" + record + "')";
    if (f.size() != expect) {
      throw IoError(ctx + ": expected " + std::to_string(expect) + " fields, got " +
                    std::to_string(f.size()));
    }
    CandidateSet cs;
    TrialMeta meta;
    cs.trial.id = std::string(f[0]);
    meta.split = parse_split(f[1], ctx);
    meta.attrs = detail::decode_attrs(f[2], ctx);
    std::size_t pos = 3;
    cs.trial.dense.resize(h.p);
    for (std::size_t j = 0; j < h.p; ++j) cs.trial.dense[j] = parse_double(f[pos++], ctx);
    detail::check_segments(cs.trial.dense, h.trial_binary_segments, true, ctx);
    cs.sites.resize(h.m);
    cs.enrollment.resize(h.m);
    cs.membership.resize(h.m);
    for (std::size_t i = 0; i < h.m; ++i) {
      cs.sites[i].id = std::string(f[pos++]);
      cs.sites[i].dense.resize(h.q);
      for (std::size_t j = 0; j < h.q; ++j) {
        cs.sites[i].dense[j] = parse_double(f[pos++], ctx);
      }
      detail::check_segments(cs.sites[i].dense, h.site_nonneg_segments, false, ctx);
      cs.enrollment[i] = parse_double(f[pos++], ctx);
      cs.membership[i].weights.resize(h.l);
      for (std::size_t j = 0; j < h.l; ++j) {
        cs.membership[i].weights[j] = parse_double(f[pos++], ctx);
      }
    }
    try {
      ds.trials.push_back(validate_candidate_set(std::move(cs)));
    } catch (const ValidationError& e) {
      throw ValidationError(ctx + ": " + e.what());
    }
    ds.meta.push_back(std::move(meta));
  }
  if (h.n_trials != 0 && ds.trials.size() != h.n_trials) {
    throw IoError(path + ": header declares " + std::to_string(h.n_trials) +
                  " trials, file has " + std::to_string(ds.trials.size()));
  }
  return ds;
}

}  // namespace fairrank
