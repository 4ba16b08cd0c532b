#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "aoilab/alpha.hpp"
#include "aoilab/dominance.hpp"
#include "aoilab/rng.hpp"

using namespace aoilab;

TEST_CASE("ceil sqrt frozen values and defining property") {
  CHECK(ceil_sqrt(0) == 0);
  CHECK(ceil_sqrt(1) == 1);
  CHECK(ceil_sqrt(2) == 2);
  CHECK(ceil_sqrt(3) == 2);
  CHECK(ceil_sqrt(4) == 2);
  CHECK(ceil_sqrt(5) == 3);
  CHECK(ceil_sqrt(9) == 3);
  CHECK(ceil_sqrt(10) == 4);
  CHECK(ceil_sqrt(99) == 10);
  CHECK(ceil_sqrt(100) == 10);
  CHECK(ceil_sqrt(101) == 11);
  for (std::uint64_t m = 1; m <= 5000; ++m) {
    const std::uint64_t r = ceil_sqrt(m);
    CHECK(r * r >= m);
    CHECK((r - 1) * (r - 1) < m);
  }
}

TEST_CASE("block count and its monotone envelope") {
  CHECK(block_count(0) == 0);
  CHECK(block_count(4) == 1);
  CHECK(block_count(5) == 0);
  CHECK(block_count(9) == 1);
  CHECK(block_count(16) == 2);
  CHECK(block_count(17) == 1);
  CHECK(block_count(25) == 2);
  CHECK(block_count(100) == 5);
  CHECK(block_count(101) == 4);

  CHECK(block_count_envelope(4) == 0);
  CHECK(block_count_envelope(9) == 1);
  CHECK(block_count_envelope(16) == 1);
  CHECK(block_count_envelope(25) == 2);
  CHECK(block_count_envelope(100) == 4);

  // Brute suffix minimum over a grid that extends far enough that the block
  // count beyond it (>= 48 from m = 10^4 on) cannot undercut any value the
  // comparison range attains.
  const std::uint64_t grid = 20000;
  std::vector<std::uint64_t> suffix_min(grid + 1);
  std::uint64_t carry = block_count(grid);
  for (std::uint64_t m = grid + 1; m-- > 0;) {
    carry = std::min(carry, block_count(m));
    suffix_min[m] = carry;
  }
  std::uint64_t prev = 0;
  for (std::uint64_t m = 0; m <= 4000; ++m) {
    CAPTURE(m);
    CHECK(block_count_envelope(m) == suffix_min[m]);
    CHECK(block_count_envelope(m) >= prev);  // monotone nondecreasing
    CHECK(block_count_envelope(m) <= block_count(m));
    prev = block_count_envelope(m);
  }
}

TEST_CASE("tail function prefix plus rule evaluation") {
  TailFunction t{{1.0, 0.5, 0.5}, GeometricTail{0.5, 0.5}};
  CHECK_NOTHROW(t.validate());
  CHECK(t.value(0) == 1.0);
  CHECK(t.value(2) == 0.5);
  CHECK(t.value(3) == doctest::Approx(0.5 * std::pow(0.5, 3)));

  TailFunction rising{{0.5, 0.9}, ZeroTail{}};
  CHECK_THROWS_AS(rising.validate(), std::runtime_error);
  TailFunction out_of_range{{1.5}, ZeroTail{}};
  CHECK_THROWS_AS(out_of_range.validate(), std::runtime_error);
  TailFunction jumping{{1.0, 0.1}, AllOnesTail{}};
  CHECK_THROWS_AS(jumping.validate(), std::runtime_error);
}

TEST_CASE("tail from ccdf freezes the empirical curve") {
  TailFunction t = tail_from_ccdf({1.0, 0.6, 0.2, 0.0});
  CHECK(t.value(1) == 0.6);
  CHECK(t.value(3) == 0.0);
  CHECK(t.value(1000) == 0.0);  // finite support ends in zero
  CHECK(tail_rule_tag(t) == "zero");

  CHECK_THROWS_AS(tail_from_ccdf({0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(tail_from_ccdf({1.2}), std::invalid_argument);
}

TEST_CASE("iid window bound frozen values") {
  const TailFunction u = iid_tail_bound(0.5, 1, 1024);
  CHECK(u.value(0) == 1.0);
  // Raw block counts dip back to zero at m = 5, so the monotone correction
  // keeps the bound at one through that slot and drops at m = 6.
  CHECK(u.value(5) == 1.0);
  CHECK(u.value(6) == 0.5);
  CHECK(u.value(8) == 0.5);
  CHECK(u.value(9) == 0.5);
  CHECK(u.value(16) == 0.5);
  CHECK(u.value(25) == 0.25);
  CHECK(u.value(100) == doctest::Approx(0.0625));
  // Beyond the materialized grid the closed-form rule continues the envelope.
  for (std::uint64_t m : {1500ULL, 5000ULL, 50000ULL}) {
    CHECK(u.value(m) == doctest::Approx(std::pow(0.5, static_cast<double>(block_count_envelope(m)))));
  }
  CHECK_NOTHROW(u.validate());
}

TEST_CASE("iid window bound gates on the block gap reaching kappa") {
  const TailFunction u = iid_tail_bound(0.5, 3, 1024);
  CHECK(u.value(4) == 1.0);   // ceil_sqrt(4) = 2 < 3
  CHECK(u.value(5) == 1.0);   // gate passes but the envelope is still 0
  CHECK(u.value(9) == 0.5);
  const TailFunction u0 = iid_tail_bound(0.5, 0, 1024);
  CHECK(u0.value(0) == 1.0);
  CHECK(u0.value(9) == 0.5);

  CHECK_THROWS_AS(iid_tail_bound(0.0, 1, 1024), std::invalid_argument);
  CHECK_THROWS_AS(iid_tail_bound(1.0, 1, 1024), std::invalid_argument);
  CHECK_THROWS_AS(iid_tail_bound(0.5, 40, 128), std::invalid_argument);
}

TEST_CASE("build dominating applies monotone correction and the leading cut") {
  std::vector<double> raw;
  for (std::uint64_t m = 0; m < 64; ++m) raw.push_back(2.0 * std::pow(0.5, static_cast<double>(m)));
  const TailFunction t = build_dominating(raw, GeometricTail{2.0, 0.5});
  CHECK(t.value(0) == 1.0);
  CHECK(t.value(1) == 1.0);
  CHECK(t.value(2) == 0.5);
  CHECK(t.value(3) == 0.25);
  CHECK(t.value(200) == doctest::Approx(2.0 * std::pow(0.5, 200.0)));

  // Non-monotone raw grid: the suffix supremum restores monotonicity.
  const TailFunction w =
      build_dominating({1.0, 0.3, 0.5, 0.2, 0.25, 0.1, 0.05, 0.0}, ZeroTail{});
  CHECK(w.value(0) == 1.0);
  CHECK(w.value(1) == 0.5);
  CHECK(w.value(2) == 0.5);
  CHECK(w.value(3) == 0.25);
  CHECK(w.value(4) == 0.25);
  CHECK(w.value(5) == 0.1);

  CHECK_THROWS_AS(build_dominating({1.5, 1.5, 1.5}, AllOnesTail{}), std::runtime_error);
  CHECK_THROWS_AS(build_dominating({1.0}, ZeroTail{}), std::invalid_argument);
}

TEST_CASE("schedule indices pack blocks against the window's right end") {
  const IndexSchedule a = schedule_indices(100, 9, 3);
  CHECK(a.indices == std::vector<std::uint64_t>{94, 100});
  const IndexSchedule b = schedule_indices(10, 4, 2);
  CHECK(b.indices == std::vector<std::uint64_t>{8});
  const IndexSchedule c = schedule_indices(50, 10, 10);
  CHECK(c.indices == std::vector<std::uint64_t>{50});

  for (std::uint64_t m = 1; m <= 60; ++m) {
    for (std::uint64_t delta = 1; delta <= m; ++delta) {
      const IndexSchedule s = schedule_indices(200, m, delta);
      REQUIRE(!s.indices.empty());
      CHECK(s.indices.front() == 200 - m + delta);
      for (std::size_t i = 0; i + 1 < s.indices.size(); ++i) {
        CHECK(s.indices[i + 1] - s.indices[i] == 2 * delta);
      }
      CHECK(s.indices.back() <= 200);
      CHECK(s.indices.size() == (m + delta) / (2 * delta));
    }
  }

  CHECK_THROWS_AS(schedule_indices(10, 4, 0), std::invalid_argument);
  CHECK_THROWS_AS(schedule_indices(10, 4, 5), std::invalid_argument);
  CHECK_THROWS_AS(schedule_indices(3, 4, 1), std::invalid_argument);
}

TEST_CASE("transitive composition halves the argument and cuts strictly") {
  const TailFunction g = geometric_tail(0.5, 0.5);  // 0.5^(m+1)
  const TailFunction h = compose_transitive(g, g);
  CHECK(h.value(0) == 1.0);
  CHECK(h.value(1) == 1.0);
  CHECK(h.value(2) == 0.5);
  CHECK(h.value(3) == 0.5);
  CHECK(h.value(4) == 0.25);
  CHECK(h.value(101) == doctest::Approx(std::pow(0.5, 50.0)));
  CHECK_NOTHROW(h.validate());

  // The composition stays above the defining sum at the halved argument.
  for (std::uint64_t m = 0; m <= 3000; m += 7) {
    const double sum = std::min(1.0, g.value(m / 2) + g.value(m / 2));
    CHECK(h.value(m) >= sum - 1e-15);
  }

  CHECK_THROWS_AS(compose_transitive(all_ones_tail(), all_ones_tail()), std::runtime_error);
}

TEST_CASE("union bound sums the pairwise tails") {
  std::vector<TailFunction> singles{geometric_tail(1.0, 0.5)};
  const TailFunction u1 = union_dominating(singles);
  CHECK(u1.value(0) == 1.0);
  CHECK(u1.value(1) == 0.5);
  CHECK(u1.value(10) == doctest::Approx(std::pow(0.5, 10.0)));

  std::vector<TailFunction> three(3, tail_from_ccdf({1.0, 0.4, 0.0}));
  const TailFunction u3 = union_dominating(three);
  CHECK(u3.value(0) == 1.0);
  CHECK(u3.value(1) == 1.0);  // 3 * 0.4 exceeds one, cut keeps the bound honest
  CHECK(u3.value(2) == 0.0);
  for (const TailFunction& part : three) {
    for (std::uint64_t m = 0; m <= 10; ++m) CHECK(u3.value(m) >= part.value(m) - 1e-15);
  }

  std::vector<TailFunction> none;
  CHECK_THROWS_AS(union_dominating(none), std::invalid_argument);
  std::vector<TailFunction> hopeless(2, all_ones_tail());
  CHECK_THROWS_AS(union_dominating(hopeless), std::runtime_error);
}

TEST_CASE("window scaling stretches the slot axis") {
  const TailFunction g = geometric_tail(1.0, 0.5);
  const TailFunction s = scale_tail_by_window(g, 3);
  CHECK(s.value(0) == 1.0);
  CHECK(s.value(2) == 1.0);
  CHECK(s.value(3) == doctest::Approx(1.0));
  CHECK(s.value(6) == doctest::Approx(0.5));
  CHECK(s.value(9) == doctest::Approx(0.25));
  CHECK(s.value(12) == doctest::Approx(0.125));
  // eta = 0 passes the tail through untouched.
  CHECK(scale_tail_by_window(g, 0).value(5) == g.value(5));
}

TEST_CASE("moment matches a brute-force pmf oracle on random finite tails") {
  const RngKey key{424242, 0, Stream::kSelftest, 1};
  for (int trial = 0; trial < 60; ++trial) {
    const int support = 1 + static_cast<int>(key.word(trial, 0) % 30);
    std::vector<double> pmf(support);
    double total = 0.0;
    for (int k = 0; k < support; ++k) {
      pmf[k] = key.uniform01(trial, 100 + k);
      total += pmf[k];
    }
    for (double& v : pmf) v /= total;
    // P(tau > m) = sum_{k > m} pmf[k] for tau supported on 0..support-1.
    std::vector<double> tail_vals(support, 0.0);
    for (int m = support - 2; m >= 0; --m) tail_vals[m] = tail_vals[m + 1] + pmf[m + 1];
    tail_vals.push_back(0.0);
    const TailFunction tail = tail_from_ccdf(tail_vals);
    for (double p : {1.0, 1.5, 2.0, 4.0}) {
      double brute = 0.0;
      for (int k = 0; k < support; ++k) brute += std::pow(static_cast<double>(k), p) * pmf[k];
      const MomentReport rep = moment_p_report(tail, p);
      CHECK_FALSE(rep.divergent);
      CAPTURE(trial);
      CAPTURE(p);
      CHECK(rep.value == doctest::Approx(brute).epsilon(1e-12));
    }
  }
}

TEST_CASE("moment closed forms for the geometric tail") {
  const TailFunction g = geometric_tail(1.0, 0.5);
  CHECK(moment_p(g, 1.0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(moment_p(g, 2.0) == doctest::Approx(6.0).epsilon(1e-9));
  CHECK_THROWS_AS(moment_p(g, 0.0), std::invalid_argument);
}

TEST_CASE("moment divergence is decided structurally") {
  CHECK(moment_p_report(power_tail(1.0, 1.0), 1.0).divergent);
  CHECK(moment_p_report(power_tail(1.0, 2.0), 2.0).divergent);
  CHECK_FALSE(moment_p_report(power_tail(1.0, 3.0), 1.0).divergent);
  CHECK(std::isinf(moment_p(power_tail(1.0, 1.0), 1.0)));
  CHECK(moment_p_report(all_ones_tail(), 1.0).divergent);

  // A dependence term that never decays forces a divergent moment.
  TailFunction stuck{{}, MixedTail{{AlphaTailTerm{1.0, explicit_alpha({0.1}), DeltaRule::kCeilSqrt, 0.0}}}};
  CHECK(moment_p_report(stuck, 1.0).divergent);

  const MomentReport fine = moment_p_report(iid_tail_bound(0.5, 1, 4096), 4.0);
  CHECK_FALSE(fine.divergent);
  CHECK(std::isfinite(fine.value));
  CHECK(fine.truncation_bound < 1e-6 * fine.value);
}

TEST_CASE("dominance comparisons") {
  const TailFunction fast = geometric_tail(1.0, 0.5);
  const TailFunction slow = geometric_tail(1.0, 0.6);
  CHECK(dominates(fast, fast, 0.0, 2000));
  CHECK(dominates(slow, fast, 0.0, 2000));
  CHECK_FALSE(dominates(fast, slow, 0.0, 2000));
  // The worst pointwise gap 0.6^m - 0.5^m is 0.11 at m = 2.
  CHECK(dominates(fast, slow, 0.2, 2000));
  CHECK_FALSE(dominates(fast, slow, 0.1, 2000));

  const TailFunction emp = tail_from_ccdf({1.0, 0.54, 0.0});
  CHECK_FALSE(dominates(fast, emp, 0.0, 2));
  CHECK(dominates(fast, emp, 0.05, 2));
  CHECK_THROWS_AS(dominates(fast, emp, -0.1, 2), std::invalid_argument);
}

TEST_CASE("mixing bound with zero dependence collapses to the iid bound") {
  const TailFunction iid = iid_tail_bound(0.5, 1, 4096);
  const MixingTailReport rep = mixing_tail_bound(0.5, 1, zero_alpha(), 1.0, 4096);
  for (std::uint64_t m = 0; m <= 3000; ++m) {
    CAPTURE(m);
    CHECK(rep.tail.value(m) == iid.value(m));
  }
  for (std::uint64_t m : {100000ULL, 1000000ULL}) CHECK(rep.tail.value(m) == iid.value(m));
}

TEST_CASE("mixing bound with a geometric dependence envelope") {
  const AlphaFn alpha = geometric_alpha(0.253125, 0.8);
  const MixingTailReport rep = mixing_tail_bound(0.8209, 2, alpha, 1.0, 131072);
  CHECK_NOTHROW(rep.tail.validate());
  CHECK_NOTHROW(rep.stage_a.validate());

  // The refinement stage only ever improves on stage A.
  for (std::uint64_t m = 0; m <= 5000; m += 13) {
    CHECK(rep.tail.value(m) <= rep.stage_a.value(m) + 1e-15);
  }

  // The refinement gap is an admissible power of two below 1/4.
  CHECK(rep.delta > 0.0);
  CHECK(rep.delta < 0.25);
  const double k = std::log2(1.0 / rep.delta);
  CHECK(k == doctest::Approx(std::round(k)).epsilon(1e-12));
  CHECK(rep.mu_fit * (1.0 / (4.0 * rep.delta) - 1.0) >= 2.0);

  CHECK_FALSE(rep.moment.divergent);
  CHECK(std::isfinite(rep.moment.value));
  const double inc = 2.0 * rep.tail.value(100000);  // ((m+1)^1 - m^1) * u(m) at p = 1
  CHECK(inc < 1e-9);
}

TEST_CASE("mixing bound handles dependence profiles that never decay") {
  CHECK_THROWS_WITH_AS(mixing_tail_bound(0.5, 1, geometric_alpha(0.2, 1.0), 1.0, 4096),
                       doctest::Contains("does not decay"), std::runtime_error);
  // A constant positive profile still yields a valid tail bound, but the
  // dependence term floors it away from zero and the moment diverges.
  const MixingTailReport rep = mixing_tail_bound(0.5, 1, explicit_alpha({0.2}), 1.0, 4096);
  CHECK_NOTHROW(rep.tail.validate());
  CHECK(rep.tail.value(4000) > 0.4);
  CHECK(rep.moment.divergent);
}

TEST_CASE("window exceedance check on a measured curve") {
  const std::vector<double> ccdf{1.0, 0.5, 0.25, 0.125, 0.0};

  PrelimCheckResult ok = lemma_prelim_check(ccdf, 0.125, 2, 0.0);
  CHECK(ok.applicable);
  CHECK(ok.holds);
  CHECK(ok.worst_excess == doctest::Approx(0.0));
  CHECK(ok.worst_m == 3);

  PrelimCheckResult bad = lemma_prelim_check(ccdf, 0.1, 2, 0.0);
  CHECK(bad.applicable);
  CHECK_FALSE(bad.holds);
  CHECK(bad.worst_excess == doctest::Approx(0.025));
  CHECK(bad.worst_m == 3);

  PrelimCheckResult slackened = lemma_prelim_check(ccdf, 0.1, 2, 0.05);
  CHECK(slackened.holds);
  CHECK(slackened.worst_excess == doctest::Approx(0.025));

  PrelimCheckResult off = lemma_prelim_check(ccdf, 0.5, 10, 0.0);
  CHECK_FALSE(off.applicable);
}

TEST_CASE("rule tags name the analytic continuation") {
  CHECK(tail_rule_tag(geometric_tail(1.0, 0.5)) == "geometric");
  CHECK(tail_rule_tag(power_tail(1.0, 2.0)) == "power");
  CHECK(tail_rule_tag(all_ones_tail()) == "all_ones");
  CHECK(tail_rule_tag(iid_tail_bound(0.5, 1, 1024)) == "geometric_window");
}
