#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "aoilab/graph.hpp"
#include "aoilab/rng.hpp"

namespace aoilab {

// Per-slot success probability q in (0,1].
struct IidChannel {
  double q = 0.5;
};

// Deterministic events at slots n with n % period == offset.
struct PeriodicChannel {
  std::uint64_t period = 1;
  std::uint64_t offset = 0;
};

// Hidden-state channel: a Markov chain over k states with row-stochastic
// transition matrix, per-state success probabilities, and an initial
// distribution over states.
struct MarkovChannel {
  std::vector<std::vector<double>> transition;
  std::vector<double> success;
  std::vector<double> initial;
  int num_states() const { return static_cast<int>(success.size()); }
};

using EdgeProcessSpec = std::variant<IidChannel, PeriodicChannel, MarkovChannel>;

struct ChannelSpec {
  int from = 0;
  int to = 0;
  EdgeProcessSpec process;
};

// The communication layout: which ordered pairs ever communicate, and how.
// Unlisted pairs never carry an event. Channels are sampled independently of
// one another.
struct NetworkSpec {
  int num_agents = 0;
  std::vector<ChannelSpec> channels;

  void validate() const;  // throws std::invalid_argument with the offending field
  DirectedGraph channel_graph() const;
};

// Samples one replication's event process slot by slot. Slots must be
// requested in order starting at 0; out-of-order requests throw.
class NetworkSampler {
 public:
  NetworkSampler(const NetworkSpec& spec, std::uint64_t seed, std::uint64_t replication);

  // Event indicator per channel for slot n, ordered as the network declares
  // its channels. This is the primitive draw; it advances hidden channel state.
  std::vector<std::uint8_t> sample_slot_bits(std::uint64_t n);

  // Realized edges for slot n, ordered as the network declares its channels.
  std::vector<Edge> sample_slot(std::uint64_t n);

  std::uint64_t next_slot() const { return next_slot_; }

 private:
  const NetworkSpec* spec_;
  std::uint64_t seed_, replication_;
  std::uint64_t next_slot_ = 0;
  std::vector<int> markov_state_;  // -1 for non-markov channels
};

struct SscCertificate {
  bool holds = false;
  double epsilon = 0;  // requested success level
  std::uint64_t kappa = 0;
  DirectedGraph witness;                    // channels whose window probability meets epsilon
  std::vector<double> window_success;       // per listed channel, worst case over initial states
};

// Checks the windowed-connectivity condition: over every window of kappa+1
// consecutive slots, each witness channel succeeds at least once with
// probability >= epsilon (worst case over the channel's initial state), and
// the witness channels form a strongly connected graph.
SscCertificate ssc_certificate(const NetworkSpec& spec, double epsilon, std::uint64_t kappa);

// Probability of at least one success over `window` consecutive slots,
// worst case over starting conditions of the process.
double worst_case_window_success(const EdgeProcessSpec& process, std::uint64_t window);

struct GeometricEnvelope {
  double coeff = 0;  // calibrated so coeff * rate^lag dominates the exact dependence
  double rate = 0;   // second-largest eigenvalue modulus of the transition matrix
  double at(std::uint64_t lag) const;
};

// Dependence envelope for the success process of a markov channel started at
// stationarity. The rate is the transition matrix's second-largest eigenvalue
// modulus; the coefficient is calibrated against exact dependence values at
// lags 1..5. Requires an irreducible, aperiodic chain.
GeometricEnvelope markov_alpha_bound(const MarkovChannel& chain);

// Exact dependence between the success indicators at two slot blocks, for a
// chain started from `initial`: the maximum over event pairs (A over the past
// block's outcomes, B over the future block's) of |P(A and B) - P(A)P(B)|.
// Computed by enumerating all state paths spanning the blocks, so the span
// must stay small.
double exact_block_dependence(const MarkovChannel& chain, const std::vector<double>& initial,
                              const std::vector<std::uint64_t>& past_slots,
                              const std::vector<std::uint64_t>& future_slots);

std::vector<double> markov_stationary(const MarkovChannel& chain);

}  // namespace aoilab
