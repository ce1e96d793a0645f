#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "fairrank/case_study.hpp"
#include "fairrank/pl_policy.hpp"
#include "fairrank/rewards.hpp"
#include "test_util.hpp"

using namespace fairrank;

namespace {

// The five-site, four-group instance with equal enrollment.
const CandidateSet& case_instance() {
  static const CandidateSet cs = builtin_case_instance();
  return cs;
}

Ranking identity(std::size_t m) {
  Ranking r;
  r.order.resize(m);
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  return r;
}

}  // namespace

TEST_CASE("utility reward") {
  REQUIRE(utility_reward(Ranking{{0, 1}}, {100.0, 50.0}, 1) == 50.0);
  SECTION("K = M leaves no penalty term") {
    REQUIRE(utility_reward(Ranking{{2, 0, 1}}, {1.0, 2.0, 4.0}, 3) == 7.0);
  }
  SECTION("equal enrollments: any top-1 pick nets 100 - 400") {
    const auto& cs = case_instance();
    for (std::size_t i = 0; i < 5; ++i) {
      Ranking r = identity(5);
      std::swap(r.order[0], r.order[i]);
      REQUIRE(utility_reward(r, cs.enrollment, 1) == -300.0);
    }
  }
  SECTION("invariant under prefix and suffix permutations") {
    RngStream rng(5);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> e(6);
      for (double& v : e) v = rng.uniform(0.0, 5.0);
      Ranking r = identity(6);
      rng.shuffle(r.order);
      const double base = utility_reward(r, e, 3);
      std::swap(r.order[0], r.order[2]);  // inside prefix
      REQUIRE(utility_reward(r, e, 3) == Catch::Approx(base).margin(1e-12));
      std::swap(r.order[4], r.order[5]);  // inside suffix
      REQUIRE(utility_reward(r, e, 3) == Catch::Approx(base).margin(1e-12));
    }
  }
}

TEST_CASE("entropy") {
  REQUIRE(entropy(GroupDistribution{std::vector<double>(6, 1.0 / 6.0)}) ==
          Catch::Approx(std::log(6.0)).margin(1e-12));
  REQUIRE(entropy(GroupDistribution{{0.0, 1.0, 0.0}}) == 0.0);
  REQUIRE(entropy(GroupDistribution{{0.55, 0.18, 0.15, 0.12}}) ==
          Catch::Approx(1.1764736895490309).margin(1e-12));
  SECTION("bounded by [0, ln L] with equality conditions") {
    RngStream rng(8);
    const std::vector<double> alpha(5, 0.7);
    for (int rep = 0; rep < 50; ++rep) {
      const GroupDistribution d{rng.dirichlet(alpha)};
      const double h = entropy(d);
      REQUIRE(h >= 0.0);
      REQUIRE(h <= std::log(5.0) + 1e-12);
    }
  }
}

TEST_CASE("fairness reward is the entropy of the mean Top-K membership") {
  const auto& cs = case_instance();
  SECTION("K = 1 reduces to the chosen row's entropy") {
    REQUIRE(fairness_reward(identity(5), cs.membership, 1) ==
            Catch::Approx(1.3577864988281501).margin(1e-12));
  }
  SECTION("two complementary one-hot rows average to uniform") {
    std::vector<GroupDistribution> p = {GroupDistribution{{1.0, 0.0}},
                                        GroupDistribution{{0.0, 1.0}}};
    REQUIRE(fairness_reward(Ranking{{0, 1}}, p, 2) ==
            Catch::Approx(std::log(2.0)).margin(1e-12));
  }
  SECTION("depends only on the Top-K set") {
    RngStream rng(9);
    for (int rep = 0; rep < 20; ++rep) {
      const auto inst = testutil::random_candidate_set(rng, 6, 4, 2, 2);
      Ranking r = identity(6);
      rng.shuffle(r.order);
      const double base = fairness_reward(r, inst.membership, 3);
      std::swap(r.order[0], r.order[2]);
      std::swap(r.order[3], r.order[5]);
      REQUIRE(fairness_reward(r, inst.membership, 3) == Catch::Approx(base).margin(1e-12));
    }
  }
  SECTION("at least the worst member's entropy (concavity)") {
    RngStream rng(10);
    for (int rep = 0; rep < 30; ++rep) {
      const auto inst = testutil::random_candidate_set(rng, 5, 4, 2, 2);
      Ranking r = identity(5);
      rng.shuffle(r.order);
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < 3; ++i) {
        worst = std::min(worst, entropy(inst.membership[r.order[i]]));
      }
      REQUIRE(fairness_reward(r, inst.membership, 3) >= worst - 1e-12);
    }
  }
}

TEST_CASE("position bias") {
  REQUIRE(position_bias(identity(3), 3) == std::vector<double>{1.0, 1.0, 1.0});
  REQUIRE(position_bias(identity(3), 0) == std::vector<double>{0.0, 0.0, 0.0});
  REQUIRE(position_bias(Ranking{{2, 0, 1}}, 1) == std::vector<double>{0.0, 0.0, 1.0});
}

TEST_CASE("group exposure") {
  const auto& cs = case_instance();
  SECTION("deterministic top-1 pick of the first site") {
    const auto v = group_exposure({identity(5)}, cs.membership, 1);
    REQUIRE(v == cs.membership[0].weights);
  }
  SECTION("K = M exposes everything: column sums") {
    const auto v = group_exposure({identity(5)}, cs.membership, 5);
    for (std::size_t g = 0; g < 4; ++g) {
      double col = 0.0;
      for (std::size_t i = 0; i < 5; ++i) col += cs.membership[i].weights[g];
      REQUIRE(v[g] == Catch::Approx(col).margin(1e-12));
    }
  }
  SECTION("uniform two-site policy approaches the column means") {
    std::vector<GroupDistribution> p = {GroupDistribution{{0.9, 0.1}},
                                        GroupDistribution{{0.3, 0.7}}};
    ScoreVector scores{{0.0, 0.0}};
    RngStream rng(11);
    std::vector<Ranking> samples;
    for (int i = 0; i < 100000; ++i) samples.push_back(sample_ranking(scores, rng));
    const auto v = group_exposure(samples, p, 1);
    REQUIRE(v[0] == Catch::Approx(0.6).margin(0.01));
    REQUIRE(v[1] == Catch::Approx(0.4).margin(0.01));
  }
  SECTION("exact enumeration matches Monte-Carlo within 0.02") {
    RngStream rng(12);
    const auto inst = testutil::random_candidate_set(rng, 4, 3, 2, 2);
    const auto scores = ScoreVector{testutil::random_scores(rng, 4, 1.0)};
    // exact: weight each permutation's bias by its exact probability
    std::vector<double> exact(3, 0.0);
    for (const auto& perm : testutil::all_permutations(4)) {
      const double prob = std::exp(exact_log_prob(scores, perm));
      const auto v = group_exposure({perm}, inst.membership, 2);
      for (std::size_t g = 0; g < 3; ++g) exact[g] += prob * v[g];
    }
    std::vector<Ranking> samples;
    RngStream srng(13);
    for (int i = 0; i < 100000; ++i) samples.push_back(sample_ranking(scores, srng));
    const auto mc = group_exposure(samples, inst.membership, 2);
    for (std::size_t g = 0; g < 3; ++g) {
      REQUIRE(std::abs(mc[g] - exact[g]) < 0.02);
    }
  }
  SECTION("empty sample set is rejected") {
    REQUIRE_THROWS_AS(group_exposure({}, cs.membership, 1), ValidationError);
  }
}

TEST_CASE("merit") {
  const auto& cs = case_instance();
  SECTION("equal enrollments give column means") {
    const auto m = merit(cs.membership, cs.enrollment);
    REQUIRE(m[0] == Catch::Approx(0.54).margin(1e-12));
    REQUIRE(m[1] == Catch::Approx(0.206).margin(1e-12));
    REQUIRE(m[2] == Catch::Approx(0.146).margin(1e-12));
    REQUIRE(m[3] == Catch::Approx(0.108).margin(1e-12));
  }
  SECTION("a single site is its own merit") {
    std::vector<GroupDistribution> p = {GroupDistribution{{0.7, 0.3}}};
    REQUIRE(merit(p, {42.0}) == std::vector<double>{0.7, 0.3});
  }
  SECTION("all-zero enrollment is rejected") {
    REQUIRE_THROWS_AS(merit(cs.membership, std::vector<double>(5, 0.0)), ValidationError);
  }
}

TEST_CASE("one-sided exposure loss") {
  const auto& cs = case_instance();
  const auto m = merit(cs.membership, cs.enrollment);
  SECTION("exposure proportional to merit gives zero") {
    std::vector<double> v = m;
    for (double& x : v) x *= 3.7;
    REQUIRE(exposure_loss(v, m) == 0.0);
  }
  SECTION("deterministic choice of the first site gives zero") {
    const auto v = group_exposure({identity(5)}, cs.membership, 1);
    REQUIRE(exposure_loss(v, m) == 0.0);
  }
  SECTION("every other single-site choice is penalized") {
    for (std::size_t i = 1; i < 5; ++i) {
      Ranking r = identity(5);
      std::swap(r.order[0], r.order[i]);
      const auto v = group_exposure({r}, cs.membership, 1);
      REQUIRE(exposure_loss(v, m) > 0.0);
    }
  }
  SECTION("hand-evaluated two-group case") {
    REQUIRE(exposure_loss({0.9, 0.1}, {0.6, 0.4}) == Catch::Approx(1.25).margin(1e-12));
  }
  SECTION("positively homogeneous in the exposure vector") {
    RngStream rng(14);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> v(4), mm(4);
      for (double& x : v) x = rng.uniform(0.0, 1.0);
      for (double& x : mm) x = rng.uniform(0.05, 1.0);
      const double c = rng.uniform(0.1, 5.0);
      std::vector<double> cv = v;
      for (double& x : cv) x *= c;
      REQUIRE(exposure_loss(cv, mm) ==
              Catch::Approx(c * exposure_loss(v, mm)).margin(1e-9));
    }
  }
}

TEST_CASE("combined reward") {
  const auto& cs = case_instance();
  SECTION("lambda 0 reduces to utility") {
    const auto rv =
        combined_reward(identity(5), cs.enrollment, cs.membership, 1, 0.0, FairnessMode::Entropy);
    REQUIRE(rv.combined == rv.utility);
  }
  SECTION("plain arithmetic") {
    RewardValue rv;
    rv = combined_reward(Ranking{{0, 1}}, {100.0, 50.0}, {GroupDistribution{{1.0}},
                                                          GroupDistribution{{1.0}}},
                         1, 4.0, FairnessMode::None);
    REQUIRE(rv.combined == 50.0);
    // utility 50, fairness forced by a one-group instance to 0; check the
    // combined identity on a mixed case instead
    const auto rv2 = combined_reward(identity(5), cs.enrollment, cs.membership, 1, 4.0,
                                     FairnessMode::Entropy);
    REQUIRE(rv2.combined == Catch::Approx(rv2.utility + 4.0 * rv2.fairness).margin(1e-12));
  }
  SECTION("first-site pick under the entropy reward, lambda 4") {
    const auto rv = combined_reward(identity(5), cs.enrollment, cs.membership, 1, 4.0,
                                    FairnessMode::Entropy);
    REQUIRE(rv.combined == Catch::Approx(-294.5688540046874).margin(1e-9));
  }
  SECTION("one-sided exposure mode negates the selection's loss") {
    const auto rv = combined_reward(identity(5), cs.enrollment, cs.membership, 1, 4.0,
                                    FairnessMode::OneSidedExposure);
    REQUIRE(rv.fairness == 0.0);  // the first site is the zero-loss pick
    Ranking r2 = identity(5);
    std::swap(r2.order[0], r2.order[4]);
    const auto rv2 = combined_reward(r2, cs.enrollment, cs.membership, 1, 4.0,
                                     FairnessMode::OneSidedExposure);
    REQUIRE(rv2.fairness < 0.0);
    REQUIRE(rv2.combined == Catch::Approx(rv2.utility + 4.0 * rv2.fairness).margin(1e-12));
  }
  SECTION("negative lambda is rejected") {
    REQUIRE_THROWS_AS(combined_reward(identity(5), cs.enrollment, cs.membership, 1, -1.0,
                                      FairnessMode::Entropy),
                      ValidationError);
  }
}
