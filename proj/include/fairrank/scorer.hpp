#pragma once
// The neural scorer: a two-hidden-layer ReLU MLP mapping one concatenated
// (trial, site) feature pair to a scalar relevance score. Forward and
// backward passes are written out by hand; no autodiff.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fairrank/core.hpp"
#include "fairrank/rng.hpp"
#include "fairrank/text_io.hpp"

namespace fairrank {

struct ScorerConfig {
  std::size_t p = 0;  // trial feature dim
  std::size_t q = 0;  // site feature dim
  std::size_t h1 = 64;
  std::size_t h2 = 32;
  std::uint64_t init_seed = 0;
};

// Per-site relevance scores, length M. Raw affine outputs; normalization
// happens inside the ranking policy, never here.
struct ScoreVector {
  std::vector<double> values;
};

// Scorer weights. Matrices are row-major: w1[j * (p + q) + i] is the weight
// from input i into hidden unit j.
struct MlpParams {
  std::size_t p = 0, q = 0, h1 = 0, h2 = 0;
  std::vector<double> w1, b1;  // h1 x (p+q), h1
  std::vector<double> w2, b2;  // h2 x h1,   h2
  std::vector<double> w3;      // h2
  double b3 = 0.0;

  std::size_t input_dim() const { return p + q; }
  std::size_t num_params() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + 1;
  }

  template <typename F>
  void for_each_array(F&& f) {
    f(w1);
    f(b1);
    f(w2);
    f(b2);
    f(w3);
  }
  template <typename F>
  void for_each_array(F&& f) const {
    f(w1);
    f(b1);
    f(w2);
    f(b2);
    f(w3);
  }
};

// Gradients of a scalar objective with respect to every parameter; same
// shapes as the parameters themselves.
using ParamGrads = MlpParams;

inline MlpParams zeros_like(const MlpParams& like) {
  MlpParams z;
  z.p = like.p;
  z.q = like.q;
  z.h1 = like.h1;
  z.h2 = like.h2;
  z.w1.assign(like.w1.size(), 0.0);
  z.b1.assign(like.b1.size(), 0.0);
  z.w2.assign(like.w2.size(), 0.0);
  z.b2.assign(like.b2.size(), 0.0);
  z.w3.assign(like.w3.size(), 0.0);
  z.b3 = 0.0;
  return z;
}

inline double global_norm(const MlpParams& g) {
  double sq = g.b3 * g.b3;
  g.for_each_array([&](const std::vector<double>& a) {
    for (double v : a) sq += v * v;
  });
  return std::sqrt(sq);
}

inline bool all_finite(const MlpParams& g) {
  bool ok = std::isfinite(g.b3);
  g.for_each_array([&](const std::vector<double>& a) {
    for (double v : a) ok = ok && std::isfinite(v);
  });
  return ok;
}

// y += a * x (matching shapes assumed)
inline void axpy(double a, const MlpParams& x, MlpParams& y) {
  auto add = [a](const std::vector<double>& src, std::vector<double>& dst) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
  };
  add(x.w1, y.w1);
  add(x.b1, y.b1);
  add(x.w2, y.w2);
  add(x.b2, y.b2);
  add(x.w3, y.w3);
  y.b3 += a * x.b3;
}

inline void scale_params(MlpParams& g, double a) {
  g.for_each_array([a](std::vector<double>& arr) {
    for (double& v : arr) v *= a;
  });
  g.b3 *= a;
}

// Glorot-uniform weights, bound sqrt(6 / (fan_in + fan_out)) per layer;
// biases zero. Deterministic given init_seed.
inline MlpParams init_params(const ScorerConfig& cfg) {
  if (cfg.p == 0 || cfg.q == 0 || cfg.h1 == 0 || cfg.h2 == 0) {
    throw ValidationError("scorer config: all dimensions must be >= 1");
  }
  RngStream rng(cfg.init_seed);
  MlpParams params;
  params.p = cfg.p;
  params.q = cfg.q;
  params.h1 = cfg.h1;
  params.h2 = cfg.h2;
  const std::size_t in = cfg.p + cfg.q;
  auto fill = [&rng](std::vector<double>& w, std::size_t n, std::size_t fan_in,
                     std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    w.resize(n);
    for (double& v : w) v = rng.uniform(-bound, bound);
  };
  fill(params.w1, cfg.h1 * in, in, cfg.h1);
  fill(params.w2, cfg.h2 * cfg.h1, cfg.h1, cfg.h2);
  fill(params.w3, cfg.h2, cfg.h2, 1);
  params.b1.assign(cfg.h1, 0.0);
  params.b2.assign(cfg.h2, 0.0);
  params.b3 = 0.0;
  return params;
}

inline double relu(double z) { return z > 0.0 ? z : 0.0; }
// Subgradient at exactly zero is taken as 0.
inline double relu_grad(double z) { return z > 0.0 ? 1.0 : 0.0; }

// Pre-activations kept from a forward pass for the matching backward pass.
struct ForwardCache {
  std::size_t p = 0, q = 0, h1 = 0, h2 = 0, m = 0;
  std::vector<double> x;   // m * (p+q) concatenated inputs
  std::vector<double> z1;  // m * h1
  std::vector<double> z2;  // m * h2
};

// Scores all M sites for one trial. Each site is scored independently from
// the concatenated (trial, site) input, so the model applies to sites never
// seen in training.
inline ScoreVector forward(const MlpParams& params, const TrialFeatures& trial,
                           const std::vector<SiteFeatures>& sites,
                           ForwardCache* cache = nullptr) {
  if (trial.dense.size() != params.p) {
    throw ValidationError("forward: trial feature dim mismatch");
  }
  const std::size_t m = sites.size();
  if (m == 0) throw ValidationError("forward: no sites");
  const std::size_t in = params.input_dim();
  if (cache != nullptr) {
    cache->p = params.p;
    cache->q = params.q;
    cache->h1 = params.h1;
    cache->h2 = params.h2;
    cache->m = m;
    cache->x.assign(m * in, 0.0);
    cache->z1.assign(m * params.h1, 0.0);
    cache->z2.assign(m * params.h2, 0.0);
  }
  ScoreVector scores;
  scores.values.resize(m);
  std::vector<double> x(in), z1(params.h1), a1(params.h1), z2(params.h2);
  for (std::size_t i = 0; i < m; ++i) {
    if (sites[i].dense.size() != params.q) {
      throw ValidationError("forward: site feature dim mismatch");
    }
    for (std::size_t d = 0; d < params.p; ++d) x[d] = trial.dense[d];
    for (std::size_t d = 0; d < params.q; ++d) x[params.p + d] = sites[i].dense[d];
    for (std::size_t j = 0; j < params.h1; ++j) {
      double acc = params.b1[j];
      const double* row = params.w1.data() + j * in;
      for (std::size_t d = 0; d < in; ++d) acc += row[d] * x[d];
      z1[j] = acc;
      a1[j] = relu(acc);
    }
    double score = params.b3;
    for (std::size_t j = 0; j < params.h2; ++j) {
      double acc = params.b2[j];
      const double* row = params.w2.data() + j * params.h1;
      for (std::size_t d = 0; d < params.h1; ++d) acc += row[d] * a1[d];
      z2[j] = acc;
      score += params.w3[j] * relu(acc);
    }
    scores.values[i] = score;
    if (cache != nullptr) {
      std::copy(x.begin(), x.end(), cache->x.begin() + i * in);
      std::copy(z1.begin(), z1.end(), cache->z1.begin() + i * params.h1);
      std::copy(z2.begin(), z2.end(), cache->z2.begin() + i * params.h2);
    }
  }
  return scores;
}

// Given d(objective)/d(score_i) for every site, accumulates
// d(objective)/d(theta) over all M sites of the cached forward pass.
inline ParamGrads backward(const MlpParams& params, const ForwardCache& cache,
                           const std::vector<double>& grad_scores) {
  if (cache.p != params.p || cache.q != params.q || cache.h1 != params.h1 ||
      cache.h2 != params.h2) {
    throw ValidationError("backward: cache does not match parameters");
  }
  if (grad_scores.size() != cache.m) {
    throw ValidationError("backward: grad_scores length != cached site count");
  }
  const std::size_t in = params.input_dim();
  ParamGrads g = zeros_like(params);
  std::vector<double> a1(params.h1), dz2(params.h2), dz1(params.h1);
  for (std::size_t i = 0; i < cache.m; ++i) {
    const double gs = grad_scores[i];
    if (gs == 0.0) continue;
    const double* x = cache.x.data() + i * in;
    const double* z1 = cache.z1.data() + i * params.h1;
    const double* z2 = cache.z2.data() + i * params.h2;
    for (std::size_t j = 0; j < params.h1; ++j) a1[j] = relu(z1[j]);
    // output layer
    g.b3 += gs;
    for (std::size_t j = 0; j < params.h2; ++j) {
      const double a2j = relu(z2[j]);
      g.w3[j] += gs * a2j;
      dz2[j] = gs * params.w3[j] * relu_grad(z2[j]);
    }
    // second hidden layer
    for (std::size_t j = 0; j < params.h2; ++j) {
      if (dz2[j] == 0.0) continue;
      g.b2[j] += dz2[j];
      double* row = g.w2.data() + j * params.h1;
      for (std::size_t d = 0; d < params.h1; ++d) row[d] += dz2[j] * a1[d];
    }
    // first hidden layer
    for (std::size_t d = 0; d < params.h1; ++d) {
      double acc = 0.0;
      for (std::size_t j = 0; j < params.h2; ++j) {
        acc += dz2[j] * params.w2[j * params.h1 + d];
      }
      dz1[d] = acc * relu_grad(z1[d]);
    }
    for (std::size_t j = 0; j < params.h1; ++j) {
      if (dz1[j] == 0.0) continue;
      g.b1[j] += dz1[j];
      double* row = g.w1.data() + j * in;
      for (std::size_t d = 0; d < in; ++d) row[d] += dz1[j] * x[d];
    }
  }
  return g;
}

// Checkpoint container: key=value header with the dimensions, then one line
// per array, comma-separated, row-major, 17-significant-digit text.
constexpr int kCheckpointFormatVersion = 1;

inline void save_checkpoint(const MlpParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out << "fairrank_checkpoint_version=" << kCheckpointFormatVersion << "\n";
  out << "p=" << params.p << "\nq=" << params.q << "\nh1=" << params.h1
      << "\nh2=" << params.h2 << "\n";
  auto write_array = [&out](const char* name, const std::vector<double>& a) {
    out << name;
    for (double v : a) out << ',' << format_double(v);
    out << "\n";
  };
  write_array("w1", params.w1);
  write_array("b1", params.b1);
  write_array("w2", params.w2);
  write_array("b2", params.b2);
  write_array("w3", params.w3);
  out << "b3," << format_double(params.b3) << "\n";
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

inline MlpParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string line;
  auto read_header = [&](const char* key) -> std::size_t {
    if (!std::getline(in, line)) throw IoError(path + ": truncated header");
    std::string_view k, v;
    if (!split_key_value(line, k, v) || k != key) {
      throw IoError(path + ": expected '" + key + "=...', got '" + line + "'");
    }
    return parse_size(v, path + ": " + key);
  };
  const std::size_t version = read_header("fairrank_checkpoint_version");
  if (version != static_cast<std::size_t>(kCheckpointFormatVersion)) {
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  MlpParams params;
  params.p = read_header("p");
  params.q = read_header("q");
  params.h1 = read_header("h1");
  params.h2 = read_header("h2");
  auto read_array = [&](const char* name, std::vector<double>& a, std::size_t n) {
    if (!std::getline(in, line)) throw IoError(path + ": truncated at array " + name);
    const auto fields = split(line, ',');
    if (fields.empty() || fields[0] != name) {
      throw IoError(path + ": expected array '" + name + "'");
    }
    if (fields.size() != n + 1) {
      throw IoError(path + ": array " + name + " has " + std::to_string(fields.size() - 1) +
                    " values, expected " + std::to_string(n));
    }
    a.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = parse_double(fields[i + 1], path + ": " + name);
    }
  };
  const std::size_t in_dim = params.p + params.q;
  read_array("w1", params.w1, params.h1 * in_dim);
  read_array("b1", params.b1, params.h1);
  read_array("w2", params.w2, params.h2 * params.h1);
  read_array("b2", params.b2, params.h2);
  read_array("w3", params.w3, params.h2);
  std::vector<double> b3;
  read_array("b3", b3, 1);
  params.b3 = b3[0];
  require_finite(params.w1, "checkpoint w1");
  require_finite(params.b1, "checkpoint b1");
  require_finite(params.w2, "checkpoint w2");
  require_finite(params.b2, "checkpoint b2");
  require_finite(params.w3, "checkpoint w3");
  if (!std::isfinite(params.b3)) throw ValidationError("checkpoint b3: non-finite entry");
  return params;
}

}  // namespace fairrank
