#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "fairrank/scorer.hpp"
#include "test_util.hpp"

using namespace fairrank;

namespace {

// Straight-line reimplementation of the forward arithmetic on nested vectors,
// kept independent of the library's flattened-array code path.
double naive_score(const MlpParams& p, const std::vector<double>& trial,
                   const std::vector<double>& site) {
  std::vector<double> x = trial;
  x.insert(x.end(), site.begin(), site.end());
  std::vector<std::vector<double>> w1(p.h1, std::vector<double>(x.size()));
  for (std::size_t j = 0; j < p.h1; ++j) {
    for (std::size_t d = 0; d < x.size(); ++d) w1[j][d] = p.w1[j * x.size() + d];
  }
  std::vector<double> a1(p.h1);
  for (std::size_t j = 0; j < p.h1; ++j) {
    double z = p.b1[j];
    for (std::size_t d = 0; d < x.size(); ++d) z += w1[j][d] * x[d];
    a1[j] = z > 0.0 ? z : 0.0;
  }
  std::vector<double> a2(p.h2);
  for (std::size_t j = 0; j < p.h2; ++j) {
    double z = p.b2[j];
    for (std::size_t d = 0; d < p.h1; ++d) z += p.w2[j * p.h1 + d] * a1[d];
    a2[j] = z > 0.0 ? z : 0.0;
  }
  double s = p.b3;
  for (std::size_t j = 0; j < p.h2; ++j) s += p.w3[j] * a2[j];
  return s;
}

TrialFeatures trial_of(std::vector<double> v) { return TrialFeatures{std::move(v), "t"}; }

std::vector<SiteFeatures> sites_of(std::vector<std::vector<double>> rows) {
  std::vector<SiteFeatures> out;
  for (auto& r : rows) out.push_back(SiteFeatures{std::move(r), "s"});
  return out;
}

}  // namespace

TEST_CASE("initialization is deterministic and correctly shaped") {
  const ScorerConfig cfg{3, 2, 4, 3, 99};
  const auto a = init_params(cfg);
  const auto b = init_params(cfg);
  REQUIRE(a.w1 == b.w1);
  REQUIRE(a.w2 == b.w2);
  REQUIRE(a.w3 == b.w3);
  REQUIRE(a.w1.size() == 4 * 5);
  REQUIRE(a.b1.size() == 4);
  REQUIRE(a.w2.size() == 3 * 4);
  REQUIRE(a.b2.size() == 3);
  REQUIRE(a.w3.size() == 3);
  for (double v : a.b1) REQUIRE(v == 0.0);
  REQUIRE(a.b3 == 0.0);
  // different seeds give different weights
  REQUIRE(init_params({3, 2, 4, 3, 100}).w1 != a.w1);
}

TEST_CASE("initial weights have zero mean and the Glorot bound") {
  // one wide layer gives 10^4 draws in a single init
  const ScorerConfig cfg{50, 50, 100, 3, 7};
  const auto p = init_params(cfg);
  const double bound = std::sqrt(6.0 / (100.0 + 100.0));
  double mean = 0.0;
  for (double v : p.w1) {
    REQUIRE(std::abs(v) <= bound);
    mean += v;
  }
  mean /= double(p.w1.size());
  // uniform(-b, b): sd = b/sqrt(3); 3 standard errors of the sample mean
  const double se = bound / std::sqrt(3.0) / std::sqrt(double(p.w1.size()));
  REQUIRE(std::abs(mean) < 3.0 * se);
}

TEST_CASE("forward pass basics") {
  const ScorerConfig cfg{2, 2, 3, 2, 5};
  SECTION("all-zero parameters score zero") {
    auto p = init_params(cfg);
    p = zeros_like(p);
    const auto s = forward(p, trial_of({1.0, -2.0}), sites_of({{3.0, 4.0}, {0.0, 1.0}}));
    REQUIRE(s.values == std::vector<double>{0.0, 0.0});
  }
  SECTION("duplicate site features give identical scores") {
    const auto p = init_params(cfg);
    const auto s =
        forward(p, trial_of({1.0, -2.0}), sites_of({{3.0, 4.0}, {3.0, 4.0}, {1.0, 0.0}}));
    REQUIRE(s.values[0] == s.values[1]);
  }
  SECTION("dimension mismatches are rejected") {
    const auto p = init_params(cfg);
    REQUIRE_THROWS_AS(forward(p, trial_of({1.0}), sites_of({{3.0, 4.0}})), ValidationError);
    REQUIRE_THROWS_AS(forward(p, trial_of({1.0, 2.0}), sites_of({{3.0}})), ValidationError);
  }
}

TEST_CASE("forward matches a straight-line reimplementation") {
  RngStream rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    const ScorerConfig cfg{4, 3, 6, 5, 1000 + std::uint64_t(rep)};
    const auto p = init_params(cfg);
    std::vector<double> trial(4), site(3);
    for (double& v : trial) v = rng.normal();
    for (double& v : site) v = rng.normal();
    const auto got = forward(p, trial_of(trial), sites_of({site}));
    REQUIRE(std::abs(got.values[0] - naive_score(p, trial, site)) < 1e-12);
  }
}

TEST_CASE("backward basics") {
  const ScorerConfig cfg{2, 2, 3, 2, 17};
  const auto p = init_params(cfg);
  ForwardCache cache;
  forward(p, trial_of({0.3, -0.7}), sites_of({{1.0, 0.5}, {-0.2, 0.8}}), &cache);
  SECTION("zero upstream gradient gives zero parameter gradients") {
    const auto g = backward(p, cache, {0.0, 0.0});
    REQUIRE(global_norm(g) == 0.0);
  }
  SECTION("identical sites with opposite upstream gradients cancel exactly") {
    ForwardCache c2;
    forward(p, trial_of({0.3, -0.7}), sites_of({{1.0, 0.5}, {1.0, 0.5}}), &c2);
    const auto g = backward(p, c2, {1.0, -1.0});
    REQUIRE(global_norm(g) == 0.0);
  }
  SECTION("mismatched cache is rejected") {
    const auto other = init_params({2, 2, 4, 2, 18});
    REQUIRE_THROWS_AS(backward(other, cache, {1.0, 1.0}), ValidationError);
    REQUIRE_THROWS_AS(backward(p, cache, {1.0}), ValidationError);
  }
}

TEST_CASE("backward matches central finite differences on every parameter") {
  // tiny net, every single parameter checked, multiple seeds
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ScorerConfig cfg{2, 3, 3, 2, seed};
    auto p = init_params(cfg);
    RngStream rng(seed * 31);
    // biases nonzero so their gradients are exercised away from the ReLU kink
    for (double& b : p.b1) b = rng.uniform(0.05, 0.3);
    for (double& b : p.b2) b = rng.uniform(0.05, 0.3);
    p.b3 = rng.uniform(-0.2, 0.2);
    const std::vector<double> trial = {rng.normal(), rng.normal()};
    const std::vector<std::vector<double>> site_rows = {
        {rng.normal(), rng.normal(), rng.normal()},
        {rng.normal(), rng.normal(), rng.normal()}};
    const std::vector<double> upstream = {rng.uniform(0.5, 1.5), rng.uniform(-1.5, -0.5)};

    // objective: upstream . scores
    auto objective = [&](const MlpParams& at) {
      const auto s = forward(at, trial_of(trial), sites_of(site_rows));
      return upstream[0] * s.values[0] + upstream[1] * s.values[1];
    };

    ForwardCache cache;
    forward(p, trial_of(trial), sites_of(site_rows), &cache);
    // skip the rare instance where a pre-activation sits on the ReLU kink,
    // where finite differences are not valid
    bool near_kink = false;
    for (double z : cache.z1) near_kink = near_kink || std::abs(z) < 1e-4;
    for (double z : cache.z2) near_kink = near_kink || std::abs(z) < 1e-4;
    if (near_kink) continue;

    const auto analytic = backward(p, cache, upstream);
    const double h = 1e-5;
    auto check = [&](double& slot, double got) {
      const double saved = slot;
      slot = saved + h;
      const double hi = objective(p);
      slot = saved - h;
      const double lo = objective(p);
      slot = saved;
      const double fd = (hi - lo) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(got), 1e-6});
      REQUIRE(std::abs(fd - got) / denom < 1e-4);
    };
    for (std::size_t i = 0; i < p.w1.size(); ++i) check(p.w1[i], analytic.w1[i]);
    for (std::size_t i = 0; i < p.b1.size(); ++i) check(p.b1[i], analytic.b1[i]);
    for (std::size_t i = 0; i < p.w2.size(); ++i) check(p.w2[i], analytic.w2[i]);
    for (std::size_t i = 0; i < p.b2.size(); ++i) check(p.b2[i], analytic.b2[i]);
    for (std::size_t i = 0; i < p.w3.size(); ++i) check(p.w3[i], analytic.w3[i]);
    check(p.b3, analytic.b3);
  }
}

TEST_CASE("ReLU subgradient at exactly zero is zero") {
  // all-zero first two layers put every pre-activation exactly at 0; with
  // w3 = 1 the upstream reaches dz2 only through relu'(0), so b2 gradients
  // are zero under the 0 convention (they would be 1 otherwise)
  ScorerConfig cfg{1, 1, 2, 2, 3};
  auto p = zeros_like(init_params(cfg));
  p.w3.assign(p.h2, 1.0);
  ForwardCache cache;
  forward(p, trial_of({1.0}), sites_of({{1.0}}), &cache);
  for (double z : cache.z2) REQUIRE(z == 0.0);
  const auto g = backward(p, cache, {1.0});
  for (double v : g.b2) REQUIRE(v == 0.0);
  for (double v : g.b1) REQUIRE(v == 0.0);
  REQUIRE(g.b3 == 1.0);  // the bias path has no ReLU in front of it
}

TEST_CASE("checkpoint round-trips bitwise") {
  const auto p = init_params({3, 2, 4, 3, 12345});
  const std::string path =
      (std::filesystem::temp_directory_path() / "fairrank_ckpt_test.txt").string();
  save_checkpoint(p, path);
  const auto q = load_checkpoint(path);
  REQUIRE(q.p == p.p);
  REQUIRE(q.q == p.q);
  REQUIRE(q.w1 == p.w1);
  REQUIRE(q.b1 == p.b1);
  REQUIRE(q.w2 == p.w2);
  REQUIRE(q.b2 == p.b2);
  REQUIRE(q.w3 == p.w3);
  REQUIRE(q.b3 == p.b3);
  std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints are rejected with context") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "fairrank_ckpt_bad.txt").string();
  {
    std::ofstream out(path);
    out << "fairrank_checkpoint_version=1\np=2\nq=2\nh1=2\nh2=2\nw1,1,2,3\n";
  }
  REQUIRE_THROWS_AS(load_checkpoint(path), IoError);
  std::remove(path.c_str());
  REQUIRE_THROWS_AS(load_checkpoint("/nonexistent/ckpt.txt"), IoError);
}
