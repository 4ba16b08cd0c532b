#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "aoilab/alpha.hpp"

namespace aoilab {

// Tail function u(m) >= P(age > m): an explicit nonincreasing prefix on
// m = 0 .. prefix.size()-1, then a closed-form rule. Rules are closed under
// the combinators below (transitive composition, union, pointwise min), so a
// tail can be evaluated at any m without materializing an unbounded grid.

struct ZeroTail {};
struct AllOnesTail {};

// coeff * ratio^m
struct GeometricTail {
  double coeff = 1.0;
  double ratio = 0.5;
};

// coeff * m^-exponent (value 1 at m = 0)
struct PowerTail {
  double coeff = 1.0;
  double exponent = 1.0;
};

// Monotone envelope of eps_fail^{L(m)} where L(m) = floor(m / (2 ceil_sqrt(m)))
// counts disjoint full blocks of length 2*ceil_sqrt(m) inside m slots. L itself
// is not monotone in m; the envelope sup_{m' >= m} eps^{L(m')} is, and has a
// closed form evaluated in O(1).
struct GeometricWindowTail {
  double eps_fail = 0.5;
};

enum class DeltaRule { kCeilSqrt, kCeilLinear };

// scale * alpha(Delta(m)) with Delta(m) = ceil(sqrt(m)) or ceil(delta * m).
struct AlphaTailTerm {
  double scale = 1.0;
  AlphaFn alpha;
  DeltaRule delta_rule = DeltaRule::kCeilSqrt;
  double delta = 0.0;  // used by kCeilLinear
};

using TailTerm = std::variant<GeometricWindowTail, PowerTail, GeometricTail, AlphaTailTerm>;

// min(1, sum of terms)
struct MixedTail {
  std::vector<TailTerm> terms;
};

struct TailFunction;

enum class ArgMap { kIdentity, kHalf, kWindowScale };
enum class Combine { kSum, kMin };

// Combination of already-built tails: each part is evaluated at the mapped
// argument (m, floor(m/2), or floor((m - eta)/eta)), then summed or min'd.
// Sums are clamped at 1.
struct DerivedTail {
  std::vector<std::shared_ptr<const TailFunction>> parts;
  ArgMap arg = ArgMap::kIdentity;
  Combine combine = Combine::kSum;
  std::uint64_t eta = 0;  // used by kWindowScale
};

using TailRule =
    std::variant<ZeroTail, AllOnesTail, GeometricTail, PowerTail, GeometricWindowTail, MixedTail, DerivedTail>;

struct TailFunction {
  std::vector<double> prefix;
  TailRule rule = ZeroTail{};

  double value(std::uint64_t m) const;
  // Checks prefix values lie in [0, 1], the prefix is nonincreasing, and the
  // rule does not jump above the prefix at the boundary. Throws on violation.
  void validate() const;
};

// Constructors for the common shapes.
TailFunction tail_from_ccdf(std::vector<double> values);
TailFunction all_ones_tail();
TailFunction geometric_tail(double coeff, double ratio);
TailFunction power_tail(double coeff, double exponent);

std::uint64_t ceil_sqrt(std::uint64_t m);

// Disjoint-block count floor(m / (2 ceil_sqrt(m))); 0 at m = 0.
std::uint64_t block_count(std::uint64_t m);

// Closed-form monotone envelope: smallest block count achieved at any m' >= m.
std::uint64_t block_count_envelope(std::uint64_t m);

// p-th moment bound sum_{m>=0} ((m+1)^p - m^p) u(m). Exact over the explicit
// prefix; the far tail of the rule is summed term by term up to a work cap and
// closed analytically beyond it. `truncation_bound` bounds the error of that
// analytic closure; `divergent` reports value = +infinity decided structurally
// from the rule (never from truncation).
struct MomentReport {
  double value = 0.0;
  double truncation_bound = 0.0;
  bool divergent = false;
};

MomentReport moment_p_report(const TailFunction& tail, double p);
double moment_p(const TailFunction& tail, double p);

// dominated(m) <= candidate(m) + slack for all m <= m_max.
bool dominates(const TailFunction& candidate, const TailFunction& dominated, double slack,
               std::uint64_t m_max);

// Left endpoints of the L disjoint length-(2 delta) blocks packed against the
// right end of the window (n - m, n]: n_l = n - m + (2l - 1) delta, l = 1..L.
struct IndexSchedule {
  std::uint64_t n = 0;
  std::uint64_t m = 0;
  std::uint64_t delta = 0;
  std::vector<std::uint64_t> indices;
};

IndexSchedule schedule_indices(std::uint64_t n, std::uint64_t m, std::uint64_t delta);

// Monotone correction + leading-1 cut for a raw bound: the output equals 1 on
// m < M and sup_{m' >= m} raw(m') beyond, where M is the first index at which
// the corrected bound drops to cut (<= 1, or < 1 for the strict variant).
// The supremum over the rule region beyond the grid is seeded from the rule
// itself, which must be nonincreasing there. Throws if the bound never passes
// the cut within the grid.
TailFunction build_dominating(std::vector<double> raw_grid, TailRule rule, bool strict_cut = false);

// Tail bound for a single channel under the window-success certificate with
// independent slots: u(m) = eps_fail^{L(m)} once the block gap ceil_sqrt(m)
// reaches kappa, 1 before.
TailFunction iid_tail_bound(double eps_fail, std::uint64_t kappa, std::uint64_t grid_size);

// Two-stage tail bound under an alpha-mixing profile.
//   stage A: eps_fail^{L(m)} + alpha(ceil_sqrt(m)) / (1 - eps_fail)
//   stage B: (delta m)^-(p+1) + alpha(ceil(delta m)) / (1 - eps_fail)
// delta is the largest power of two 2^-k (k >= 3) with
// mu_fit * (1/(4 delta) - 1) >= p + 1, where mu_fit is a safety-deflated
// power-decay fit of stage A over the upper grid. The returned tail is the
// pointwise min of the two stages (each is a valid bound on its own). With an
// identically-zero alpha the result collapses to iid_tail_bound.
struct MixingTailReport {
  TailFunction tail;
  TailFunction stage_a;
  double mu_fit = 0.0;
  double delta = 0.0;
  MomentReport moment;
};

MixingTailReport mixing_tail_bound(double eps_fail, std::uint64_t kappa, const AlphaFn& alpha,
                                   double p, std::uint64_t grid_size);

// h(m) = a(floor(m/2)) + b(floor(m/2)), cut strictly below 1.
TailFunction compose_transitive(const TailFunction& a, const TailFunction& b);

// h(m) = sum of tails(m), cut at <= 1.
TailFunction union_dominating(std::span<const TailFunction> tails);

// Age bound for a slotted schedule whose windows span eta base slots:
// scaled(m) = 1 for m < eta, tail(floor((m - eta)/eta)) beyond.
TailFunction scale_tail_by_window(const TailFunction& tail, std::uint64_t eta);

// Empirical check of the exceedance bound P(age > m) <= eps_fail on a
// measured ccdf, over m >= kappa + 1 (an m-slot lookback contains a full
// kappa+1 window only from there). `slack` absorbs sampling noise.
struct PrelimCheckResult {
  bool applicable = false;
  bool holds = false;
  double worst_excess = 0.0;  // max over checked m of ccdf(m) - eps_fail
  std::uint64_t worst_m = 0;
};

PrelimCheckResult lemma_prelim_check(const std::vector<double>& empirical_ccdf, double eps_fail,
                                     std::uint64_t kappa, double slack);

// Short label for the analytic rule beyond the prefix, used in CSV exports.
std::string tail_rule_tag(const TailFunction& tail);

}  // namespace aoilab
