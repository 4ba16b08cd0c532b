#include "aoilab/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace aoilab {
namespace {

// Past and future blocks are extracted at this span regardless of the
// requested dimension, so the base-position grid is identical across d and
// estimates are exactly nondecreasing in d.
constexpr std::int64_t kBlockCap = 3;

std::uint32_t block_word(const BinaryTraceSet& t, std::size_t rep, std::size_t first, int d) {
  std::uint32_t w = 0;
  for (int j = 0; j < d; ++j) w = (w << 1) | t.at(rep, first + j);
  return w;
}

}  // namespace

void BinaryTraceSet::validate() const {
  if (data.size() != replications * horizon) {
    throw std::invalid_argument("trace set: data size does not match replications x horizon");
  }
  for (std::uint8_t v : data) {
    if (v > 1) throw std::invalid_argument("trace set: entries must be binary");
  }
}

BinaryTraceSet window_indicator(const BinaryTraceSet& trace, std::uint64_t eta) {
  trace.validate();
  if (eta >= trace.horizon) {
    throw std::invalid_argument("window indicator: eta must be smaller than the horizon");
  }
  if (eta == 0) return trace;
  BinaryTraceSet out = BinaryTraceSet::zeros(trace.replications, trace.horizon - eta);
  for (std::size_t r = 0; r < trace.replications; ++r) {
    // Running count of ones inside the sliding window [n, n+eta].
    std::uint64_t ones = 0;
    for (std::uint64_t k = 0; k < eta; ++k) ones += trace.at(r, k);
    for (std::size_t n = 0; n < out.horizon; ++n) {
      ones += trace.at(r, n + eta);
      out.set(r, n, ones > 0);
      ones -= trace.at(r, n);
    }
  }
  return out;
}

AlphaEstimate empirical_alpha(const BinaryTraceSet& traces, std::uint64_t lag, int dim) {
  traces.validate();
  if (dim < 1 || dim > 3) {
    throw std::invalid_argument("dependence estimate: block dimension must be 1..3");
  }
  if (lag < 1) throw std::invalid_argument("dependence estimate: lag must be positive");

  const auto T = static_cast<std::int64_t>(traces.horizon);
  const std::int64_t lo = kBlockCap - 1;
  const std::int64_t hi = T - static_cast<std::int64_t>(lag) - kBlockCap;
  std::set<std::int64_t> grid;
  if (hi >= lo) {
    for (int i = 0; i < 8; ++i) grid.insert(lo + (hi - lo) * i / 7);
  }
  if (traces.replications * grid.size() < 1000) {
    throw std::runtime_error("insufficient samples for dependence estimation");
  }

  const int num_outcomes = 1 << dim;
  const std::uint32_t num_subsets = std::uint32_t{1} << num_outcomes;
  const auto reps = static_cast<std::int64_t>(traces.replications);
  const double inv_r2 = 1.0 / (static_cast<double>(reps) * static_cast<double>(reps));

  AlphaEstimate best;
  best.lag = lag;
  best.dim = dim;
  for (std::int64_t l : grid) {
    // Joint outcome counts across replications at this base position.  The
    // deviations below stay in integer arithmetic, scaled by reps^2, so
    // deterministic or exactly independent traces report exactly zero.
    std::vector<std::int64_t> joint(static_cast<std::size_t>(num_outcomes) * num_outcomes, 0);
    std::vector<std::int64_t> future_marg(num_outcomes, 0);
    const std::size_t past_first = static_cast<std::size_t>(l) - dim + 1;
    const std::size_t future_first = static_cast<std::size_t>(l) + lag;
    for (std::size_t r = 0; r < traces.replications; ++r) {
      const std::uint32_t a = block_word(traces, r, past_first, dim);
      const std::uint32_t b = block_word(traces, r, future_first, dim);
      joint[a * num_outcomes + b] += 1;
    }
    for (int a = 0; a < num_outcomes; ++a) {
      for (int b = 0; b < num_outcomes; ++b) future_marg[b] += joint[a * num_outcomes + b];
    }
    for (std::uint32_t A = 0; A < num_subsets; ++A) {
      std::vector<std::int64_t> w(num_outcomes, 0);
      std::int64_t count_a = 0;
      for (int a = 0; a < num_outcomes; ++a) {
        if (A & (std::uint32_t{1} << a)) {
          for (int b = 0; b < num_outcomes; ++b) w[b] += joint[a * num_outcomes + b];
        }
      }
      for (int b = 0; b < num_outcomes; ++b) count_a += w[b];
      // max over B of |P(A,B) - P(A)P(B)| = max(sum of positive deviations,
      // sum of negative deviations).
      std::int64_t pos = 0, neg = 0;
      std::uint32_t pos_mask = 0, neg_mask = 0;
      for (int b = 0; b < num_outcomes; ++b) {
        const std::int64_t c = reps * w[b] - count_a * future_marg[b];
        if (c > 0) {
          pos += c;
          pos_mask |= std::uint32_t{1} << b;
        } else if (c < 0) {
          neg -= c;
          neg_mask |= std::uint32_t{1} << b;
        }
      }
      const double here = static_cast<double>(std::max(pos, neg)) * inv_r2;
      if (here > best.value) {
        best.value = here;
        best.base_position = static_cast<std::uint64_t>(l);
        best.past_mask = A;
        best.future_mask = pos >= neg ? pos_mask : neg_mask;
      }
    }
  }
  return best;
}

MixingProfile profile_from_estimates(std::vector<double> estimates) {
  MixingProfile p;
  p.provenance = "empirical_cylinder";
  for (double& v : estimates) v = AlphaFn::clamp(v);
  // True coefficients are nonincreasing in the lag; restore that with a
  // suffix maximum, which only raises values and so stays an upper bound.
  double carry = 0.0;
  for (std::size_t i = estimates.size(); i-- > 0;) {
    carry = std::max(carry, estimates[i]);
    estimates[i] = carry;
  }
  p.estimate = estimates;
  p.alpha = explicit_alpha(std::move(estimates), AlphaFn::TailKind::kConstant);
  return p;
}

MixingProfile profile_from_envelope(double coeff, double rate, std::size_t lags) {
  if (!(coeff >= 0.0)) throw std::invalid_argument("envelope coefficient must be nonnegative");
  if (!(rate >= 0.0)) throw std::invalid_argument("envelope rate must be nonnegative");
  MixingProfile p;
  p.provenance = "analytic_envelope";
  p.envelope.resize(lags);
  for (std::size_t n = 0; n < lags; ++n) {
    p.envelope[n] = AlphaFn::clamp(coeff * std::pow(rate, static_cast<double>(n)));
  }
  p.alpha = geometric_alpha(coeff, rate);
  p.alpha.values = p.envelope;
  return p;
}

MixingDiagnostic p_mixing_diagnostic(const MixingProfile& profile, double p) {
  if (!(p >= 0.0)) throw std::invalid_argument("summability order must be nonnegative");
  const AlphaFn& a = profile.alpha;
  MixingDiagnostic d;

  std::size_t avail = std::max<std::size_t>(a.values.size(), 64);
  double running = 0.0;
  for (std::size_t n = 1; n < avail; ++n) {
    running += std::pow(static_cast<double>(n), p - 1.0) * a.at(n);
    d.partial_sums.push_back(running);
  }

  bool summable = false, divergent = false;
  switch (a.tail) {
    case AlphaFn::TailKind::kZero:
      summable = true;
      break;
    case AlphaFn::TailKind::kGeometric:
      if (a.coeff <= 0.0) summable = true;
      else if (a.rate >= 1.0) divergent = true;
      else summable = true;
      break;
    case AlphaFn::TailKind::kRational:
      if (a.coeff <= 0.0) summable = true;
      else if (a.mu > p) summable = true;
      else divergent = true;
      break;
    case AlphaFn::TailKind::kConstant: {
      double level = a.values.empty() ? a.coeff : a.values.back();
      if (AlphaFn::clamp(level) <= 0.0) summable = true;
      // A positive constant extension admits no verdict either way.
      break;
    }
  }
  if (divergent) {
    d.verdict = "divergent";
    d.total = std::numeric_limits<double>::infinity();
    return d;
  }
  if (!summable) {
    d.verdict = "indeterminate";
    d.total = running;
    return d;
  }

  // Analytic continuation of the decaying rule beyond the available lags.
  double extra = 0.0;
  std::uint64_t n = avail;
  for (std::uint64_t i = 0; i < (std::uint64_t{1} << 22); ++i, ++n) {
    const double term = std::pow(static_cast<double>(n), p - 1.0) * a.at(n);
    extra += term;
    if (term < 1e-18 * std::max(running + extra, 1e-300)) break;
  }
  if (a.tail == AlphaFn::TailKind::kRational && a.coeff > 0.0 && a.mu > p) {
    // Integral closure for the slowly decaying case.
    extra += a.coeff * std::pow(static_cast<double>(n), p - a.mu) / (a.mu - p);
  }
  d.tail_extrapolation = extra;
  d.total = running + extra;
  d.verdict = "summable";
  return d;
}

}  // namespace aoilab
