#include <catch2/catch_amalgamated.hpp>

#include "fairrank/core.hpp"
#include "test_util.hpp"

using namespace fairrank;

namespace {

CandidateSet small_set(std::vector<std::vector<double>> rows, std::vector<double> e) {
  CandidateSet cs;
  cs.trial.id = "t0";
  cs.trial.dense = {1.0, 2.0};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    SiteFeatures s;
    s.id = "s" + std::to_string(i);
    s.dense = {0.5, double(i)};
    cs.sites.push_back(s);
    cs.membership.push_back(GroupDistribution{rows[i]});
  }
  cs.enrollment = std::move(e);
  return cs;
}

}  // namespace

TEST_CASE("valid candidate set is accepted unchanged") {
  auto cs = small_set({{0.5, 0.5}, {1.0, 0.0}}, {1.0, 0.0});
  const auto v = validate_candidate_set(cs);
  REQUIRE(v.num_sites() == 2);
  REQUIRE(v.num_groups() == 2);
  REQUIRE(v.membership[0].weights == std::vector<double>{0.5, 0.5});
  REQUIRE(v.membership[1].weights == std::vector<double>{1.0, 0.0});
}

TEST_CASE("membership row outside renormalization band is rejected") {
  auto cs = small_set({{0.7, 0.31}, {1.0, 0.0}}, {1.0, 0.0});  // sums to 1.01
  REQUIRE_THROWS_AS(validate_candidate_set(cs), ValidationError);
}

TEST_CASE("membership row within band is renormalized to unit sum") {
  auto cs = small_set({{0.5005, 0.5}, {1.0, 0.0}}, {1.0, 0.0});
  const auto v = validate_candidate_set(cs);
  double sum = 0.0;
  for (double w : v.membership[0].weights) sum += w;
  REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(v.membership[0].weights[0] > v.membership[0].weights[1]);
}

TEST_CASE("validation is idempotent") {
  auto cs = small_set({{0.5005, 0.5}, {0.2, 0.8}}, {2.0, 1.0});
  const auto once = validate_candidate_set(cs);
  const auto twice = validate_candidate_set(once);
  REQUIRE(once.membership[0].weights == twice.membership[0].weights);
  REQUIRE(once.membership[1].weights == twice.membership[1].weights);
  REQUIRE(once.enrollment == twice.enrollment);
}

TEST_CASE("structural violations are rejected") {
  SECTION("negative enrollment") {
    auto cs = small_set({{0.5, 0.5}, {1.0, 0.0}}, {1.0, -0.5});
    REQUIRE_THROWS_AS(validate_candidate_set(cs), ValidationError);
  }
  SECTION("dimension mismatch between sites and enrollment") {
    auto cs = small_set({{0.5, 0.5}, {1.0, 0.0}}, {1.0});
    REQUIRE_THROWS_AS(validate_candidate_set(cs), ValidationError);
  }
  SECTION("inconsistent site feature dims") {
    auto cs = small_set({{0.5, 0.5}, {1.0, 0.0}}, {1.0, 1.0});
    cs.sites[1].dense.push_back(3.0);
    REQUIRE_THROWS_AS(validate_candidate_set(cs), ValidationError);
  }
  SECTION("non-finite feature") {
    auto cs = small_set({{0.5, 0.5}, {1.0, 0.0}}, {1.0, 1.0});
    cs.trial.dense[0] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(validate_candidate_set(cs), ValidationError);
  }
  SECTION("negative membership weight") {
    auto cs = small_set({{1.2, -0.2}, {1.0, 0.0}}, {1.0, 1.0});
    REQUIRE_THROWS_AS(validate_candidate_set(cs), ValidationError);
  }
  SECTION("all-zero enrollment fails the training-set requirement only") {
    auto cs = small_set({{0.5, 0.5}, {1.0, 0.0}}, {0.0, 0.0});
    REQUIRE_NOTHROW(validate_candidate_set(cs));
    REQUIRE_THROWS_AS(validate_candidate_set(cs, true), ValidationError);
  }
}

TEST_CASE("random valid candidate sets pass validation post-hoc") {
  fairrank::RngStream rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    const auto cs = testutil::random_candidate_set(rng, 6, 4, 3, 2);
    // invariants hold on the validated value
    for (const auto& row : cs.membership) {
      double sum = 0.0;
      for (double w : row.weights) {
        REQUIRE(w >= 0.0);
        sum += w;
      }
      REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
    }
    for (double e : cs.enrollment) REQUIRE(e >= 0.0);
  }
}

TEST_CASE("ranking permutation check") {
  REQUIRE(is_permutation(Ranking{{2, 0, 1}}, 3));
  REQUIRE_FALSE(is_permutation(Ranking{{0, 0, 1}}, 3));
  REQUIRE_FALSE(is_permutation(Ranking{{0, 1}}, 3));
  REQUIRE_FALSE(is_permutation(Ranking{{0, 1, 3}}, 3));
}
