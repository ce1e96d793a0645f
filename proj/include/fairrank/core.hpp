#pragma once
// Domain types shared across the engine: trial/site feature vectors, per-site
// group-membership distributions, candidate sets, and rankings. All types are
// immutable after validation and safe to share across threads read-only.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairrank {

// Raised when input data violates a structural invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrialFeatures {
  std::vector<double> dense;  // length p
  std::string id;
};

struct SiteFeatures {
  std::vector<double> dense;  // length q
  std::string id;
};

// Fractions of a site's patient population per demographic group. A site
// carries the whole distribution, not a single group label.
struct GroupDistribution {
  std::vector<double> weights;  // length L, non-negative, sums to 1
};

// One trial, its M candidate sites, the per-site enrollment scores e >= 0,
// and the M x L membership matrix (row i = group distribution of site i).
// Enrollment is treated as an arbitrary non-negative relevance score; the
// engine performs no unit conversion.
struct CandidateSet {
  TrialFeatures trial;
  std::vector<SiteFeatures> sites;
  std::vector<double> enrollment;
  std::vector<GroupDistribution> membership;

  std::size_t num_sites() const { return sites.size(); }
  std::size_t num_groups() const {
    return membership.empty() ? 0 : membership.front().weights.size();
  }
};

// Permutation of site indices 0..M-1; the first K entries are the selection.
struct Ranking {
  std::vector<std::size_t> order;
};

inline bool is_permutation(const Ranking& r, std::size_t m) {
  if (r.order.size() != m) return false;
  std::vector<bool> seen(m, false);
  for (std::size_t idx : r.order) {
    if (idx >= m || seen[idx]) return false;
    seen[idx] = true;
  }
  return true;
}

inline void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw ValidationError(std::string(what) + ": non-finite entry");
    }
  }
}

// Membership rows whose sum is off by at most this much are renormalized;
// anything worse is rejected. Census-style percentages arrive rounded to one
// decimal, so sums a few 1e-3 off occur in otherwise clean data.
constexpr double kMembershipRenormBand = 1e-3;
constexpr double kMembershipSumTol = 1e-9;

inline GroupDistribution validate_group_distribution(GroupDistribution d) {
  if (d.weights.empty()) throw ValidationError("group distribution: empty");
  require_finite(d.weights, "group distribution");
  double sum = 0.0;
  for (double w : d.weights) {
    if (w < 0.0) throw ValidationError("group distribution: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) <= kMembershipSumTol) return d;
  if (std::abs(sum - 1.0) <= kMembershipRenormBand) {
    for (double& w : d.weights) w /= sum;
    return d;
  }
  throw ValidationError("group distribution: weights sum to " + std::to_string(sum) +
                        ", outside the renormalization band");
}

// Checks every structural invariant and returns the validated set; membership
// rows slightly off unit sum come back renormalized. Idempotent: validating a
// validated set is the identity.
inline CandidateSet validate_candidate_set(CandidateSet cs,
                                           bool require_positive_enrollment = false) {
  const std::size_t m = cs.sites.size();
  if (m == 0) throw ValidationError("candidate set: no sites");
  if (cs.enrollment.size() != m) {
    throw ValidationError("candidate set: enrollment length != site count");
  }
  if (cs.membership.size() != m) {
    throw ValidationError("candidate set: membership rows != site count");
  }
  require_finite(cs.trial.dense, "trial features");
  const std::size_t q = cs.sites.front().dense.size();
  for (const auto& s : cs.sites) {
    if (s.dense.size() != q) {
      throw ValidationError("candidate set: inconsistent site feature dims");
    }
    require_finite(s.dense, "site features");
  }
  require_finite(cs.enrollment, "enrollment");
  double max_e = 0.0;
  for (double e : cs.enrollment) {
    if (e < 0.0) throw ValidationError("candidate set: negative enrollment");
    max_e = std::max(max_e, e);
  }
  if (require_positive_enrollment && max_e <= 0.0) {
    throw ValidationError("candidate set: trial has no positive enrollment");
  }
  const std::size_t l = cs.membership.front().weights.size();
  for (auto& row : cs.membership) {
    if (row.weights.size() != l) {
      throw ValidationError("candidate set: inconsistent membership width");
    }
    row = validate_group_distribution(std::move(row));
  }
  return cs;
}

}  // namespace fairrank
