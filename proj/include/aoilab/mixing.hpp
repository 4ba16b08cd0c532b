#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "aoilab/alpha.hpp"

namespace aoilab {

// R replications x T slots of {0,1} indicators for one channel's event (or
// window-union) process, row-major by replication.
struct BinaryTraceSet {
  std::size_t replications = 0;
  std::size_t horizon = 0;
  std::vector<std::uint8_t> data;

  static BinaryTraceSet zeros(std::size_t replications, std::size_t horizon) {
    BinaryTraceSet t;
    t.replications = replications;
    t.horizon = horizon;
    t.data.assign(replications * horizon, 0);
    return t;
  }

  std::uint8_t at(std::size_t rep, std::size_t slot) const { return data[rep * horizon + slot]; }
  void set(std::size_t rep, std::size_t slot, bool v) { data[rep * horizon + slot] = v ? 1 : 0; }
  void validate() const;  // throws on shape mismatch or non-binary entries
};

// output[n] = 1 iff any input slot in [n, n+eta] fires; horizon shrinks by eta.
BinaryTraceSet window_indicator(const BinaryTraceSet& trace, std::uint64_t eta);

// Dependence estimate between a d-slot past block ending at a base position l
// and the d-slot future block starting lag slots later, maximized over
// cylinder event pairs and over a fixed grid of base positions. Probabilities
// are across-replication frequencies at fixed l, so no stationarity is
// assumed. The witness records the maximizing configuration; subset masks are
// over the 2^d block outcomes.
struct AlphaEstimate {
  double value = 0.0;
  std::uint64_t lag = 0;
  int dim = 0;
  std::uint64_t base_position = 0;
  std::uint32_t past_mask = 0;
  std::uint32_t future_mask = 0;
};

AlphaEstimate empirical_alpha(const BinaryTraceSet& traces, std::uint64_t lag, int dim);

// Per-lag dependence profile: empirical cylinder estimates and/or an analytic
// envelope, plus the AlphaFn consumed by the tail constructions. All values
// live in [0, 1/4]; reported profiles are monotone nonincreasing.
struct MixingProfile {
  std::vector<double> estimate;  // empirical, monotone corrected; may be empty
  std::vector<double> envelope;  // analytic bound per lag; may be empty
  AlphaFn alpha;
  std::string provenance;  // "analytic_envelope" | "empirical_cylinder"
};

MixingProfile profile_from_estimates(std::vector<double> estimates);
MixingProfile profile_from_envelope(double coeff, double rate, std::size_t lags);

// Summability diagnostic for sum_{n>=1} n^{p-1} alpha(n): numeric partial
// sums over the available lags, an analytic extrapolation when the profile
// carries a decaying rule, and a verdict. A constant-extension profile with
// positive level cannot be certified either way from data alone.
struct MixingDiagnostic {
  std::vector<double> partial_sums;  // cumulative over n = 1..N
  double tail_extrapolation = 0.0;
  double total = 0.0;
  std::string verdict;  // "summable" | "divergent" | "indeterminate"
};

MixingDiagnostic p_mixing_diagnostic(const MixingProfile& profile, double p);

}  // namespace aoilab
