#include "aoilab/dominance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace aoilab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kDefaultGrid = std::uint64_t{1} << 17;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

std::uint64_t ceil_positive(double x) {
  if (x <= 0.0) return 0;
  return static_cast<std::uint64_t>(std::ceil(x));
}

// (m+1)^p - m^p; exact fast paths for the common integer orders.
double weight_p(std::uint64_t m, double p) {
  if (p == 1.0) return 1.0;
  double md = static_cast<double>(m);
  if (p == 2.0) return 2.0 * md + 1.0;
  return std::pow(md + 1.0, p) - std::pow(md, p);
}

std::uint64_t delta_of(const AlphaTailTerm& t, std::uint64_t m) {
  if (t.delta_rule == DeltaRule::kCeilSqrt) return ceil_sqrt(m);
  return ceil_positive(t.delta * static_cast<double>(m));
}

double term_value(const TailTerm& term, std::uint64_t m) {
  return std::visit(
      Overloaded{
          [m](const GeometricWindowTail& t) {
            return std::pow(t.eps_fail, static_cast<double>(block_count_envelope(m)));
          },
          [m](const PowerTail& t) {
            if (m == 0) return 1.0;
            return t.coeff * std::pow(static_cast<double>(m), -t.exponent);
          },
          [m](const GeometricTail& t) { return t.coeff * std::pow(t.ratio, static_cast<double>(m)); },
          [m](const AlphaTailTerm& t) { return t.scale * t.alpha.at(delta_of(t, m)); },
      },
      term);
}

double rule_value(const TailRule& rule, std::uint64_t m) {
  return std::visit(
      Overloaded{
          [](const ZeroTail&) { return 0.0; },
          [](const AllOnesTail&) { return 1.0; },
          [m](const GeometricTail& t) {
            return clamp01(t.coeff * std::pow(t.ratio, static_cast<double>(m)));
          },
          [m](const PowerTail& t) {
            if (m == 0) return 1.0;
            return clamp01(t.coeff * std::pow(static_cast<double>(m), -t.exponent));
          },
          [m](const GeometricWindowTail& t) {
            return clamp01(std::pow(t.eps_fail, static_cast<double>(block_count_envelope(m))));
          },
          [m](const MixedTail& t) {
            double s = 0.0;
            for (const TailTerm& term : t.terms) s += term_value(term, m);
            return clamp01(s);
          },
          [m](const DerivedTail& d) {
            std::uint64_t arg = m;
            if (d.arg == ArgMap::kHalf) {
              arg = m / 2;
            } else if (d.arg == ArgMap::kWindowScale) {
              if (m < d.eta) return 1.0;
              arg = (m - d.eta) / d.eta;
            }
            if (d.combine == Combine::kSum) {
              double s = 0.0;
              for (const auto& part : d.parts) s += part->value(arg);
              return clamp01(s);
            }
            double v = 1.0;
            for (const auto& part : d.parts) v = std::min(v, part->value(arg));
            return v;
          },
      },
      rule);
}

// ---- divergence classification -------------------------------------------

double alpha_tail_level(const AlphaFn& a) {
  return AlphaFn::clamp(a.values.empty() ? a.coeff : a.values.back());
}

bool alpha_term_diverges(const AlphaTailTerm& t, double p) {
  if (t.scale <= 0.0) return false;
  const AlphaFn& a = t.alpha;
  double half = (t.delta_rule == DeltaRule::kCeilSqrt) ? 0.5 : 1.0;
  switch (a.tail) {
    case AlphaFn::TailKind::kZero:
      return false;
    case AlphaFn::TailKind::kGeometric:
      return a.coeff > 0.0 && a.rate >= 1.0;
    case AlphaFn::TailKind::kRational:
      return a.coeff > 0.0 && a.mu * half <= p;
    case AlphaFn::TailKind::kConstant:
      return alpha_tail_level(a) > 0.0;
  }
  return false;
}

bool term_diverges(const TailTerm& term, double p) {
  return std::visit(Overloaded{
                        [](const GeometricWindowTail& t) { return t.eps_fail >= 1.0; },
                        [p](const PowerTail& t) { return t.coeff > 0.0 && t.exponent <= p; },
                        [](const GeometricTail& t) { return t.coeff > 0.0 && t.ratio >= 1.0; },
                        [p](const AlphaTailTerm& t) { return alpha_term_diverges(t, p); },
                    },
                    term);
}

bool rule_diverges(const TailRule& rule, double p) {
  return std::visit(
      Overloaded{
          [](const ZeroTail&) { return false; },
          [](const AllOnesTail&) { return true; },
          [p](const GeometricTail& t) { return term_diverges(TailTerm{t}, p); },
          [p](const PowerTail& t) { return term_diverges(TailTerm{t}, p); },
          [p](const GeometricWindowTail& t) { return term_diverges(TailTerm{t}, p); },
          [p](const MixedTail& t) {
            for (const TailTerm& term : t.terms) {
              if (term_diverges(term, p)) return true;
            }
            return false;
          },
          [p](const DerivedTail& d) {
            // A sum diverges with any part; a min of monotone tails converges
            // as soon as one part does.
            bool any = false, all = true;
            for (const auto& part : d.parts) {
              bool dv = rule_diverges(part->rule, p);
              any = any || dv;
              all = all && dv;
            }
            return d.combine == Combine::kSum ? any : (all && !d.parts.empty());
          },
      },
      rule);
}

// ---- analytic remainders beyond the summation cap ------------------------
//
// Each closure bounds sum_{m > M} w_p(m) * u(m) for one rule shape. `add` is
// an estimate folded into the moment value, `unc` bounds the error of that
// estimate (pure upper bounds report add = 0).

struct Rem {
  double add = 0.0;
  double unc = 0.0;
};

Rem rem_geometric(double c, double r, double p, std::uint64_t M) {
  if (c <= 0.0 || r <= 0.0) return {};
  double add = 0.0;
  std::uint64_t m = M + 1;
  double step = r * std::pow(1.0 + 1.0 / static_cast<double>(m), p);
  for (int i = 0; i < 2000000 && step >= 1.0; ++i) {
    add += weight_p(m, p) * c * std::pow(r, static_cast<double>(m));
    ++m;
    step = r * std::pow(1.0 + 1.0 / static_cast<double>(m), p);
  }
  double head = weight_p(m, p) * c * std::pow(r, static_cast<double>(m));
  double unc = step < 1.0 ? head / (1.0 - step) : kInf;
  return {add, unc};
}

Rem rem_power(double c, double mu, double p, std::uint64_t M) {
  if (c <= 0.0) return {};
  if (mu <= p) return {0.0, kInf};
  double mid = static_cast<double>(M) + 0.5;
  double add = c * p * std::pow(mid, p - mu) / (mu - p);
  double rel = std::min(1.0, 8.0 * (1.0 + p + mu) / static_cast<double>(std::max<std::uint64_t>(M, 1)));
  return {add, add * rel};
}

// Shared band iteration over t = ceil_sqrt(m): per band ((t-1)^2, t^2] the
// integrand is bounded by the band weight times a value nonincreasing in t.
template <class ValueAtBand>
Rem rem_bands(double p, std::uint64_t M, double band_ratio, ValueAtBand value_at) {
  long double ub = 0.0;
  std::uint64_t t = std::max<std::uint64_t>(ceil_sqrt(M + 1), 1);
  double last = 0.0;
  for (int i = 0; i < 400000; ++i, ++t) {
    double lo = static_cast<double>(t - 1) * static_cast<double>(t - 1);
    double hi = static_cast<double>(t) * static_cast<double>(t);
    double bw = std::pow(hi + 1.0, p) - std::pow(lo + 1.0, p);
    last = bw * value_at(t);
    ub += last;
    if (last < 1e-22 * static_cast<double>(std::max<long double>(ub, 1e-280))) {
      double rr = band_ratio * std::pow(1.0 + 2.0 / static_cast<double>(t), p + 1.0);
      if (rr < 1.0) ub += last * rr / (1.0 - rr);
      break;
    }
  }
  return {0.0, static_cast<double>(ub) * 1.02};
}

Rem rem_geom_window(double eps, double p, std::uint64_t M) {
  if (eps <= 0.0) return {};
  return rem_bands(p, M, std::sqrt(eps), [eps](std::uint64_t t) {
    std::uint64_t s = ((t - 1) * (t - 1) + 1) / (2 * t);
    return std::pow(eps, static_cast<double>(s));
  });
}

Rem rem_alpha_term(const AlphaTailTerm& tm, double p, std::uint64_t M) {
  if (tm.scale <= 0.0) return {};
  const AlphaFn& a = tm.alpha;
  // Walk past the explicit profile exactly before applying the tail-kind
  // closure.
  double add = 0.0;
  std::uint64_t m = M + 1;
  std::uint64_t guard = 0;
  while (delta_of(tm, m) < a.values.size()) {
    add += weight_p(m, p) * tm.scale * a.at(delta_of(tm, m));
    ++m;
    if (++guard > (std::uint64_t{1} << 22)) return {add, kInf};
  }
  std::uint64_t M2 = m - 1;
  bool sqrt_rule = tm.delta_rule == DeltaRule::kCeilSqrt;
  switch (a.tail) {
    case AlphaFn::TailKind::kZero:
      return {add, 0.0};
    case AlphaFn::TailKind::kGeometric: {
      if (a.coeff <= 0.0) return {add, 0.0};
      if (a.rate >= 1.0) return {add, kInf};
      Rem r = sqrt_rule ? rem_bands(p, M2, std::pow(a.rate, 0.5),
                                    [&](std::uint64_t t) {
                                      return tm.scale * a.coeff * std::pow(a.rate, static_cast<double>(t));
                                    })
                        : rem_geometric(tm.scale * a.coeff, std::pow(a.rate, tm.delta), p, M2);
      return {add + r.add, r.unc};
    }
    case AlphaFn::TailKind::kRational: {
      if (a.coeff <= 0.0) return {add, 0.0};
      Rem r;
      if (sqrt_rule) {
        r = rem_power(tm.scale * a.coeff, a.mu / 2.0, p, M2);
        r.unc += r.add * std::min(1.0, a.mu / std::sqrt(static_cast<double>(M2)));
      } else {
        double c_eff = tm.scale * a.coeff * std::pow(tm.delta, -a.mu);
        r = rem_power(c_eff, a.mu, p, M2);
        r.unc += r.add * std::min(1.0, 2.0 * a.mu / (tm.delta * static_cast<double>(M2)));
      }
      return {add + r.add, r.unc};
    }
    case AlphaFn::TailKind::kConstant:
      return alpha_tail_level(a) > 0.0 ? Rem{add, kInf} : Rem{add, 0.0};
  }
  return {add, 0.0};
}

Rem rem_term(const TailTerm& term, double p, std::uint64_t M) {
  return std::visit(
      Overloaded{
          [p, M](const GeometricWindowTail& t) { return rem_geom_window(t.eps_fail, p, M); },
          [p, M](const PowerTail& t) { return rem_power(t.coeff, t.exponent, p, M); },
          [p, M](const GeometricTail& t) { return rem_geometric(t.coeff, t.ratio, p, M); },
          [p, M](const AlphaTailTerm& t) { return rem_alpha_term(t, p, M); },
      },
      term);
}

Rem fn_tail_after(const TailFunction& t, double p, std::uint64_t M);

Rem rule_tail_after(const TailRule& rule, double p, std::uint64_t M) {
  return std::visit(
      Overloaded{
          [](const ZeroTail&) { return Rem{}; },
          [](const AllOnesTail&) { return Rem{0.0, kInf}; },
          [p, M](const GeometricTail& t) { return rem_geometric(t.coeff, t.ratio, p, M); },
          [p, M](const PowerTail& t) { return rem_power(t.coeff, t.exponent, p, M); },
          [p, M](const GeometricWindowTail& t) { return rem_geom_window(t.eps_fail, p, M); },
          [p, M](const MixedTail& t) {
            Rem acc;
            for (const TailTerm& term : t.terms) {
              Rem r = rem_term(term, p, M);
              acc.add += r.add;
              acc.unc += r.unc;
            }
            return acc;
          },
          [p, M](const DerivedTail& d) {
            if (d.combine == Combine::kMin) {
              Rem best{0.0, kInf};
              double best_total = kInf;
              for (const auto& part : d.parts) {
                Rem r = fn_tail_after(*part, p, M);
                double total = r.add + r.unc;
                if (total < best_total) {
                  best_total = total;
                  best = r;
                }
              }
              // The min's true remainder lies in [0, best_total].
              return Rem{best_total / 2.0, best_total / 2.0};
            }
            double factor = 1.0;
            std::uint64_t k0 = M + 1;
            if (d.arg == ArgMap::kHalf) {
              factor = std::pow(2.0, p);
              k0 = (M + 1) / 2;
            } else if (d.arg == ArgMap::kWindowScale) {
              factor = std::pow(2.0 * static_cast<double>(std::max<std::uint64_t>(d.eta, 1)), p);
              k0 = (M + 1 >= d.eta && d.eta > 0) ? (M + 1 - d.eta) / d.eta : 0;
            }
            Rem acc;
            for (const auto& part : d.parts) {
              Rem r = fn_tail_after(*part, p, k0 > 0 ? k0 - 1 : 0);
              double boundary = (k0 == 0) ? weight_p(0, p) * part->value(0) : 0.0;
              double contribution = factor * (r.add + boundary);
              if (d.arg == ArgMap::kWindowScale) {
                // Block bound only; report it entirely as uncertainty.
                acc.unc += contribution + factor * r.unc;
              } else {
                acc.add += contribution;
                acc.unc += factor * r.unc;
              }
            }
            return acc;
          },
      },
      rule);
}

Rem fn_tail_after(const TailFunction& t, double p, std::uint64_t M) {
  long double add = 0.0;
  for (std::uint64_t m = M + 1; m < t.prefix.size(); ++m) add += weight_p(m, p) * t.prefix[m];
  std::uint64_t M2 = std::max<std::uint64_t>(M, t.prefix.empty() ? 0 : t.prefix.size() - 1);
  Rem r = rule_tail_after(t.rule, p, M2);
  return {static_cast<double>(add) + r.add, r.unc};
}

}  // namespace

double TailFunction::value(std::uint64_t m) const {
  if (m < prefix.size()) return prefix[m];
  return rule_value(rule, m);
}

void TailFunction::validate() const {
  constexpr double kTol = 1e-9;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (!(prefix[i] >= -kTol && prefix[i] <= 1.0 + kTol)) {
      std::ostringstream os;
      os << "tail value out of [0, 1] at m=" << i << ": " << prefix[i];
      throw std::runtime_error(os.str());
    }
    if (i > 0 && prefix[i] > prefix[i - 1] + kTol) {
      std::ostringstream os;
      os << "tail increases at m=" << i << ": " << prefix[i - 1] << " -> " << prefix[i];
      throw std::runtime_error(os.str());
    }
  }
  if (!prefix.empty()) {
    double boundary = rule_value(rule, prefix.size());
    if (boundary > prefix.back() + kTol) {
      std::ostringstream os;
      os << "tail rule jumps above the prefix at m=" << prefix.size() << ": " << prefix.back()
         << " -> " << boundary;
      throw std::runtime_error(os.str());
    }
  }
}

TailFunction tail_from_ccdf(std::vector<double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0 && values[i] <= 1.0)) {
      std::ostringstream os;
      os << "ccdf value out of [0, 1] at m=" << i;
      throw std::invalid_argument(os.str());
    }
    if (i > 0 && values[i] > values[i - 1] + 1e-12) {
      std::ostringstream os;
      os << "ccdf increases at m=" << i;
      throw std::invalid_argument(os.str());
    }
  }
  return TailFunction{std::move(values), ZeroTail{}};
}

TailFunction all_ones_tail() { return TailFunction{{}, AllOnesTail{}}; }

TailFunction geometric_tail(double coeff, double ratio) {
  if (!(coeff >= 0.0)) throw std::invalid_argument("geometric tail needs a nonnegative coefficient");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("geometric tail ratio must lie in [0, 1]");
  return TailFunction{{}, GeometricTail{coeff, ratio}};
}

TailFunction power_tail(double coeff, double exponent) {
  if (!(coeff >= 0.0)) throw std::invalid_argument("power tail needs a nonnegative coefficient");
  if (!(exponent > 0.0)) throw std::invalid_argument("power tail exponent must be positive");
  return TailFunction{{}, PowerTail{coeff, exponent}};
}

std::uint64_t ceil_sqrt(std::uint64_t m) {
  if (m == 0) return 0;
  auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(m)));
  while (r > 0 && r * r >= m) --r;
  while (r * r < m) ++r;
  return r;
}

std::uint64_t block_count(std::uint64_t m) {
  if (m == 0) return 0;
  return m / (2 * ceil_sqrt(m));
}

std::uint64_t block_count_envelope(std::uint64_t m) {
  if (m == 0) return 0;
  std::uint64_t k = ceil_sqrt(m);
  std::uint64_t here = m / (2 * k);
  // Minimum over the next band onward is attained at the next band's left
  // edge, and those minima are nondecreasing in the band index.
  std::uint64_t next_band = (k * k + 1) / (2 * (k + 1));
  return std::min(here, next_band);
}

MomentReport moment_p_report(const TailFunction& tail, double p) {
  if (!(p > 0.0)) throw std::invalid_argument("moment order must be positive");
  if (rule_diverges(tail.rule, p)) return {kInf, 0.0, true};
  long double sum = 0.0;
  for (std::uint64_t m = 0; m < tail.prefix.size(); ++m) sum += weight_p(m, p) * tail.prefix[m];
  constexpr std::uint64_t kWorkCap = std::uint64_t{1} << 20;
  std::uint64_t m = tail.prefix.size();
  std::uint64_t stop = m + kWorkCap;
  int negligible = 0;
  while (m < stop) {
    double term = weight_p(m, p) * tail.value(m);
    sum += term;
    ++m;
    if (term < 1e-18 * static_cast<double>(std::max<long double>(sum, 1e-300))) {
      if (++negligible >= 256) break;
    } else {
      negligible = 0;
    }
  }
  Rem r = fn_tail_after(tail, p, m - 1);
  return {static_cast<double>(sum) + r.add, r.unc, false};
}

double moment_p(const TailFunction& tail, double p) { return moment_p_report(tail, p).value; }

bool dominates(const TailFunction& candidate, const TailFunction& dominated, double slack,
               std::uint64_t m_max) {
  if (!(slack >= 0.0)) throw std::invalid_argument("dominance slack must be nonnegative");
  for (std::uint64_t m = 0; m <= m_max; ++m) {
    if (dominated.value(m) > candidate.value(m) + slack + 1e-15) return false;
  }
  return true;
}

IndexSchedule schedule_indices(std::uint64_t n, std::uint64_t m, std::uint64_t delta) {
  if (delta < 1) throw std::invalid_argument("schedule gap must be at least 1");
  if (delta > m) throw std::invalid_argument("schedule gap exceeds the threshold m");
  if (m > n) throw std::invalid_argument("schedule threshold m exceeds the base time n");
  IndexSchedule s;
  s.n = n;
  s.m = m;
  s.delta = delta;
  for (std::uint64_t idx = n - m + delta; idx <= n; idx += 2 * delta) s.indices.push_back(idx);
  return s;
}

TailFunction build_dominating(std::vector<double> raw_grid, TailRule rule, bool strict_cut) {
  if (raw_grid.size() < 2) throw std::invalid_argument("bound grid needs at least two entries");
  // Monotone correction: suffix supremum, seeded from the rule just beyond
  // the grid (the rule is nonincreasing there).
  double carry = rule_value(rule, raw_grid.size());
  std::vector<double> corrected(raw_grid.size());
  for (std::uint64_t m = raw_grid.size(); m-- > 0;) {
    carry = std::max(carry, raw_grid[m]);
    corrected[m] = carry;
  }
  std::uint64_t cut = corrected.size();
  for (std::uint64_t m = 0; m < corrected.size(); ++m) {
    if (strict_cut ? corrected[m] < 1.0 : corrected[m] <= 1.0) {
      cut = m;
      break;
    }
  }
  if (cut == corrected.size()) {
    throw std::runtime_error("dominating bound stays above one across the evaluated range");
  }
  std::vector<double> prefix(corrected.size());
  for (std::uint64_t m = 0; m < corrected.size(); ++m) {
    prefix[m] = m < cut ? 1.0 : std::min(corrected[m], 1.0);
  }
  TailFunction out{std::move(prefix), std::move(rule)};
  out.validate();
  return out;
}

namespace {

std::uint64_t sqrt_gate(std::uint64_t kappa) {
  // Smallest m with ceil_sqrt(m) >= kappa.
  if (kappa == 0) return 0;
  return (kappa - 1) * (kappa - 1) + 1;
}

}  // namespace

TailFunction iid_tail_bound(double eps_fail, std::uint64_t kappa, std::uint64_t grid_size) {
  if (!(eps_fail > 0.0 && eps_fail < 1.0)) {
    throw std::invalid_argument("per-window failure bound must lie in (0, 1)");
  }
  std::uint64_t grid = std::max<std::uint64_t>(grid_size, 64);
  std::uint64_t gate = sqrt_gate(kappa);
  if (gate + 1 >= grid) throw std::invalid_argument("bound grid too small for the requested window length");
  std::vector<double> raw(grid);
  for (std::uint64_t m = 0; m < grid; ++m) {
    raw[m] = (ceil_sqrt(m) >= kappa)
                 ? std::pow(eps_fail, static_cast<double>(block_count(m)))
                 : 1.0;
  }
  return build_dominating(std::move(raw), GeometricWindowTail{eps_fail});
}

MixingTailReport mixing_tail_bound(double eps_fail, std::uint64_t kappa, const AlphaFn& alpha,
                                   double p, std::uint64_t grid_size) {
  if (!(eps_fail > 0.0 && eps_fail < 1.0)) {
    throw std::invalid_argument("per-window failure bound must lie in (0, 1)");
  }
  if (!(p > 0.0)) throw std::invalid_argument("moment order must be positive");
  if (alpha.tail == AlphaFn::TailKind::kGeometric && alpha.coeff > 0.0 && alpha.rate >= 1.0) {
    throw std::runtime_error("dependence envelope does not decay");
  }
  std::uint64_t grid = std::max<std::uint64_t>(grid_size, 1024);
  std::uint64_t gate = sqrt_gate(kappa);
  if (gate + 1 >= grid / 10) throw std::invalid_argument("bound grid too small for the requested window length");
  double scale = 1.0 / (1.0 - eps_fail);

  std::vector<double> raw_a(grid);
  for (std::uint64_t m = 0; m < grid; ++m) {
    raw_a[m] = (ceil_sqrt(m) >= kappa)
                   ? std::pow(eps_fail, static_cast<double>(block_count(m))) + scale * alpha.at(ceil_sqrt(m))
                   : 1.0;
  }
  MixedTail rule_a{{TailTerm{GeometricWindowTail{eps_fail}},
                    TailTerm{AlphaTailTerm{scale, alpha, DeltaRule::kCeilSqrt, 0.0}}}};
  MixingTailReport report;
  report.stage_a = build_dominating(std::move(raw_a), std::move(rule_a));

  if (alpha.is_zero()) {
    // Vanishing correction: collapse to the independent-slot bound exactly.
    report.tail = iid_tail_bound(eps_fail, kappa, grid);
    report.moment = moment_p_report(report.tail, p);
    return report;
  }

  // Power-decay fit of stage A over the upper part of the grid, deflated for
  // safety; it feeds only the block-gap choice below.
  std::uint64_t fit_lo = std::max<std::uint64_t>({gate, grid / 10, 2});
  double mu_fit = kInf;
  for (std::uint64_t m = fit_lo; m < grid; ++m) {
    double v = report.stage_a.value(m);
    if (v > 0.0 && v < 1.0) {
      mu_fit = std::min(mu_fit, -std::log(v) / std::log(static_cast<double>(m)));
    }
  }
  if (!std::isfinite(mu_fit) || mu_fit <= 0.0) {
    throw std::runtime_error("stage-A envelope shows no polynomial decay on the grid");
  }
  mu_fit /= 1.1;
  report.mu_fit = mu_fit;

  double delta = 0.0;
  for (int k = 3; k <= 40; ++k) {
    double cand = std::ldexp(1.0, -k);
    if (mu_fit * (1.0 / (4.0 * cand) - 1.0) >= p + 1.0) {
      delta = cand;
      break;
    }
  }
  if (delta == 0.0) throw std::runtime_error("no admissible delta found in (0, 1/4)");
  report.delta = delta;

  std::uint64_t gate_b = std::max<std::uint64_t>(ceil_positive(1.0 / (2.0 * delta)), 1);
  if (kappa >= 1) {
    // ceil(delta*m) >= kappa needs m > (kappa-1)/delta.
    gate_b = std::max(gate_b, static_cast<std::uint64_t>(std::floor((static_cast<double>(kappa) - 1.0) / delta)) + 1);
  }
  if (gate_b + 1 >= grid) throw std::invalid_argument("bound grid too small for the refinement stage");
  double power_coeff = std::pow(delta, -(p + 1.0));
  std::vector<double> raw_b(grid);
  for (std::uint64_t m = 0; m < grid; ++m) {
    raw_b[m] = (m >= gate_b)
                   ? power_coeff * std::pow(static_cast<double>(m), -(p + 1.0)) +
                         scale * alpha.at(ceil_positive(delta * static_cast<double>(m)))
                   : 1.0;
  }
  MixedTail rule_b{{TailTerm{PowerTail{power_coeff, p + 1.0}},
                    TailTerm{AlphaTailTerm{scale, alpha, DeltaRule::kCeilLinear, delta}}}};
  TailFunction stage_b = build_dominating(std::move(raw_b), std::move(rule_b));

  // Both stages bound the same tail; take the pointwise min.
  auto part_a = std::make_shared<const TailFunction>(report.stage_a);
  auto part_b = std::make_shared<const TailFunction>(std::move(stage_b));
  std::vector<double> prefix(grid);
  for (std::uint64_t m = 0; m < grid; ++m) prefix[m] = std::min(part_a->value(m), part_b->value(m));
  DerivedTail rule_min{{part_a, part_b}, ArgMap::kIdentity, Combine::kMin, 0};
  report.tail = TailFunction{std::move(prefix), std::move(rule_min)};
  report.tail.validate();
  report.moment = moment_p_report(report.tail, p);
  return report;
}

TailFunction compose_transitive(const TailFunction& a, const TailFunction& b) {
  a.validate();
  b.validate();
  auto pa = std::make_shared<const TailFunction>(a);
  auto pb = std::make_shared<const TailFunction>(b);
  std::uint64_t cut = kDefaultGrid;
  for (std::uint64_t m = 0; m < kDefaultGrid; ++m) {
    if (pa->value(m / 2) + pb->value(m / 2) < 1.0) {
      cut = m;
      break;
    }
  }
  if (cut == kDefaultGrid) {
    throw std::runtime_error("composed bound stays at or above one across the evaluated range");
  }
  TailFunction out{std::vector<double>(cut, 1.0),
                   DerivedTail{{pa, pb}, ArgMap::kHalf, Combine::kSum, 0}};
  out.validate();
  return out;
}

TailFunction union_dominating(std::span<const TailFunction> tails) {
  if (tails.empty()) throw std::invalid_argument("union over an empty set of tails");
  std::vector<std::shared_ptr<const TailFunction>> parts;
  parts.reserve(tails.size());
  for (const TailFunction& t : tails) {
    t.validate();
    parts.push_back(std::make_shared<const TailFunction>(t));
  }
  std::uint64_t cut = kDefaultGrid;
  for (std::uint64_t m = 0; m < kDefaultGrid; ++m) {
    double s = 0.0;
    for (const auto& part : parts) s += part->value(m);
    if (s <= 1.0) {
      cut = m;
      break;
    }
  }
  if (cut == kDefaultGrid) {
    throw std::runtime_error("union bound stays above one across the evaluated range");
  }
  TailFunction out{std::vector<double>(cut, 1.0),
                   DerivedTail{std::move(parts), ArgMap::kIdentity, Combine::kSum, 0}};
  out.validate();
  return out;
}

TailFunction scale_tail_by_window(const TailFunction& tail, std::uint64_t eta) {
  tail.validate();
  if (eta == 0) return tail;
  auto part = std::make_shared<const TailFunction>(tail);
  return TailFunction{{}, DerivedTail{{part}, ArgMap::kWindowScale, Combine::kSum, eta}};
}

std::string tail_rule_tag(const TailFunction& tail) {
  return std::visit(
      Overloaded{
          [](const ZeroTail&) { return std::string("zero"); },
          [](const AllOnesTail&) { return std::string("all_ones"); },
          [](const GeometricTail&) { return std::string("geometric"); },
          [](const PowerTail&) { return std::string("power"); },
          [](const GeometricWindowTail&) { return std::string("geometric_window"); },
          [](const MixedTail&) { return std::string("mixed"); },
          [](const DerivedTail& d) {
            std::string tag = d.combine == Combine::kMin ? "min" : "sum";
            if (d.arg == ArgMap::kHalf) tag += "_halved";
            if (d.arg == ArgMap::kWindowScale) tag += "_window_scaled";
            return tag;
          },
      },
      tail.rule);
}

PrelimCheckResult lemma_prelim_check(const std::vector<double>& empirical_ccdf, double eps_fail,
                                     std::uint64_t kappa, double slack) {
  PrelimCheckResult r;
  // An m-slot lookback contains a full kappa+1 window only from m = kappa+1;
  // a curve that ends before that cannot be checked at all.
  std::uint64_t start = kappa + 1;
  if (start >= empirical_ccdf.size()) return r;
  r.applicable = true;
  r.holds = true;
  r.worst_m = start;
  r.worst_excess = -eps_fail;
  for (std::uint64_t m = start; m < empirical_ccdf.size(); ++m) {
    double excess = empirical_ccdf[m] - eps_fail;
    if (excess > r.worst_excess) {
      r.worst_excess = excess;
      r.worst_m = m;
    }
    if (empirical_ccdf[m] > eps_fail + slack + 1e-15) r.holds = false;
  }
  return r;
}

}  // namespace aoilab
