#include "aoilab/channels.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace aoilab {

namespace {

constexpr double kRowSumTol = 1e-12;

void validate_process(const EdgeProcessSpec& process, const std::string& where) {
  if (const auto* iid = std::get_if<IidChannel>(&process)) {
    if (!(iid->q > 0.0) || iid->q > 1.0) {
      throw std::invalid_argument(where + ": iid success probability must be in (0,1]");
    }
  } else if (const auto* per = std::get_if<PeriodicChannel>(&process)) {
    if (per->period < 1) {
      throw std::invalid_argument(where + ": periodic channel needs period >= 1");
    }
    if (per->offset >= per->period) {
      throw std::invalid_argument(where + ": periodic offset must be below the period");
    }
  } else {
    const auto& mk = std::get<MarkovChannel>(process);
    const int k = mk.num_states();
    if (k < 1) {
      throw std::invalid_argument(where + ": markov channel needs at least one state");
    }
    if (static_cast<int>(mk.transition.size()) != k ||
        static_cast<int>(mk.initial.size()) != k) {
      throw std::invalid_argument(where + ": markov field sizes disagree");
    }
    for (int i = 0; i < k; ++i) {
      if (static_cast<int>(mk.transition[i].size()) != k) {
        throw std::invalid_argument(where + ": transition matrix is not square");
      }
      double row = 0;
      for (double p : mk.transition[i]) {
        if (p < 0 || p > 1) {
          throw std::invalid_argument(where + ": transition entries must be probabilities");
        }
        row += p;
      }
      if (std::abs(row - 1.0) > kRowSumTol) {
        throw std::invalid_argument(where + ": transition rows must sum to 1");
      }
      if (mk.success[i] < 0 || mk.success[i] > 1) {
        throw std::invalid_argument(where + ": success probabilities must be in [0,1]");
      }
    }
    double total = 0;
    for (double p : mk.initial) {
      if (p < 0 || p > 1) {
        throw std::invalid_argument(where + ": initial distribution entries must be probabilities");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > kRowSumTol) {
      throw std::invalid_argument(where + ": initial distribution must sum to 1");
    }
  }
}

int sample_from_distribution(const std::vector<double>& dist, double u) {
  double acc = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    acc += dist[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(dist.size()) - 1;
}

// All-failure probabilities over `window` consecutive slots, one entry per
// starting state: f, then repeatedly weighted by diag(f) * P.
std::vector<double> markov_all_fail(const MarkovChannel& mk, std::uint64_t window) {
  const int k = mk.num_states();
  std::vector<double> fail(k);
  for (int i = 0; i < k; ++i) fail[i] = 1.0 - mk.success[i];
  std::vector<double> acc = fail;
  for (std::uint64_t w = 1; w < window; ++w) {
    std::vector<double> next(k, 0.0);
    for (int i = 0; i < k; ++i) {
      double sum = 0;
      for (int j = 0; j < k; ++j) sum += mk.transition[i][j] * acc[j];
      next[i] = fail[i] * sum;
    }
    acc = std::move(next);
  }
  return acc;
}

bool markov_irreducible(const MarkovChannel& mk) {
  const int k = mk.num_states();
  auto reach = [&](bool reversed) {
    std::vector<bool> seen(k, false);
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < k; ++v) {
        const double p = reversed ? mk.transition[v][u] : mk.transition[u][v];
        if (p > 0 && !seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
    return seen;
  };
  const auto fwd = reach(false);
  const auto bwd = reach(true);
  for (int v = 0; v < k; ++v) {
    if (!fwd[v] || !bwd[v]) return false;
  }
  return true;
}

// Period of state 0 via gcd of return times, scanned through k*k+1 boolean
// matrix powers. Irreducible chains share one period across states.
bool markov_aperiodic(const MarkovChannel& mk) {
  const int k = mk.num_states();
  std::vector<std::vector<bool>> reach(k, std::vector<bool>(k, false));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) reach[i][j] = mk.transition[i][j] > 0;
  }
  auto step = [&](const std::vector<std::vector<bool>>& m) {
    std::vector<std::vector<bool>> out(k, std::vector<bool>(k, false));
    for (int i = 0; i < k; ++i) {
      for (int l = 0; l < k; ++l) {
        if (!m[i][l]) continue;
        for (int j = 0; j < k; ++j) {
          if (mk.transition[l][j] > 0) out[i][j] = true;
        }
      }
    }
    return out;
  };
  std::uint64_t g = 0;
  auto power = reach;
  for (int n = 1; n <= k * k + 1; ++n) {
    if (power[0][0]) g = std::gcd(g, static_cast<std::uint64_t>(n));
    if (g == 1) return true;
    power = step(power);
  }
  return g == 1;
}

}  // namespace

void NetworkSpec::validate() const {
  if (num_agents < 1) {
    throw std::invalid_argument("network: agent count must be positive");
  }
  std::set<std::pair<int, int>> seen;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const ChannelSpec& ch = channels[c];
    std::ostringstream where;
    where << "network channel " << c << " (" << ch.from << "->" << ch.to << ")";
    if (ch.from < 0 || ch.from >= num_agents || ch.to < 0 || ch.to >= num_agents) {
      throw std::invalid_argument(where.str() + ": endpoint out of range");
    }
    if (ch.from == ch.to) {
      throw std::invalid_argument(where.str() + ": agents do not message themselves");
    }
    if (!seen.insert({ch.from, ch.to}).second) {
      throw std::invalid_argument(where.str() + ": duplicate channel");
    }
    validate_process(ch.process, where.str());
  }
}

DirectedGraph NetworkSpec::channel_graph() const {
  std::vector<Edge> edges;
  edges.reserve(channels.size());
  for (const ChannelSpec& ch : channels) edges.push_back({ch.from, ch.to});
  return DirectedGraph(num_agents, std::move(edges));
}

NetworkSampler::NetworkSampler(const NetworkSpec& spec, std::uint64_t seed,
                               std::uint64_t replication)
    : spec_(&spec), seed_(seed), replication_(replication) {
  spec.validate();
  markov_state_.assign(spec.channels.size(), -1);
  for (std::size_t c = 0; c < spec.channels.size(); ++c) {
    if (const auto* mk = std::get_if<MarkovChannel>(&spec.channels[c].process)) {
      const RngKey key{seed_, replication_, Stream::kInit, c};
      markov_state_[c] = sample_from_distribution(mk->initial, key.uniform01(0, 0));
    }
  }
}

std::vector<std::uint8_t> NetworkSampler::sample_slot_bits(std::uint64_t n) {
  if (n != next_slot_) {
    throw std::logic_error("sampler: slots must be requested in order");
  }
  next_slot_ = n + 1;
  std::vector<std::uint8_t> bits(spec_->channels.size(), 0);
  for (std::size_t c = 0; c < spec_->channels.size(); ++c) {
    const ChannelSpec& ch = spec_->channels[c];
    const RngKey key{seed_, replication_, Stream::kChannel, c};
    bool event = false;
    if (const auto* iid = std::get_if<IidChannel>(&ch.process)) {
      event = key.bernoulli(iid->q, n, 0);
    } else if (const auto* per = std::get_if<PeriodicChannel>(&ch.process)) {
      event = (n % per->period) == per->offset;
    } else {
      const auto& mk = std::get<MarkovChannel>(ch.process);
      const int state = markov_state_[c];
      event = key.bernoulli(mk.success[state], n, 0);
      markov_state_[c] =
          sample_from_distribution(mk.transition[state], key.uniform01(n, 1));
    }
    bits[c] = event ? 1 : 0;
  }
  return bits;
}

std::vector<Edge> NetworkSampler::sample_slot(std::uint64_t n) {
  const std::vector<std::uint8_t> bits = sample_slot_bits(n);
  std::vector<Edge> realized;
  for (std::size_t c = 0; c < bits.size(); ++c) {
    if (bits[c]) realized.push_back({spec_->channels[c].from, spec_->channels[c].to});
  }
  return realized;
}

double worst_case_window_success(const EdgeProcessSpec& process, std::uint64_t window) {
  if (window < 1) {
    throw std::invalid_argument("window success: window must span at least one slot");
  }
  if (const auto* iid = std::get_if<IidChannel>(&process)) {
    return 1.0 - std::pow(1.0 - iid->q, static_cast<double>(window));
  }
  if (const auto* per = std::get_if<PeriodicChannel>(&process)) {
    return window >= per->period ? 1.0 : 0.0;
  }
  const auto& mk = std::get<MarkovChannel>(process);
  const auto fail = markov_all_fail(mk, window);
  double worst = 1.0;
  for (double f : fail) worst = std::min(worst, 1.0 - f);
  return worst;
}

SscCertificate ssc_certificate(const NetworkSpec& spec, double epsilon, std::uint64_t kappa) {
  spec.validate();
  if (!(epsilon > 0.0) || epsilon >= 1.0) {
    throw std::invalid_argument("ssc: epsilon must be in (0,1)");
  }
  SscCertificate cert;
  cert.epsilon = epsilon;
  cert.kappa = kappa;
  std::vector<Edge> witness_edges;
  for (const ChannelSpec& ch : spec.channels) {
    const double p = worst_case_window_success(ch.process, kappa + 1);
    cert.window_success.push_back(p);
    if (p >= epsilon - 1e-12) witness_edges.push_back({ch.from, ch.to});
  }
  cert.witness = DirectedGraph(spec.num_agents, std::move(witness_edges));
  cert.holds = is_strongly_connected(cert.witness);
  return cert;
}

double GeometricEnvelope::at(std::uint64_t lag) const {
  if (rate <= 0.0) return lag == 0 ? std::min(0.25, coeff) : 0.0;
  return std::min(0.25, coeff * std::pow(rate, static_cast<double>(lag)));
}

std::vector<double> markov_stationary(const MarkovChannel& chain) {
  const int k = chain.num_states();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) a(j, i) = chain.transition[i][j];
    a(i, i) -= 1.0;
  }
  for (int j = 0; j < k; ++j) a(k - 1, j) = 1.0;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  b(k - 1) = 1.0;
  const Eigen::VectorXd pi = a.fullPivLu().solve(b);
  std::vector<double> out(k);
  for (int i = 0; i < k; ++i) out[i] = std::max(0.0, pi(i));
  return out;
}

double exact_block_dependence(const MarkovChannel& chain, const std::vector<double>& initial,
                              const std::vector<std::uint64_t>& past_slots,
                              const std::vector<std::uint64_t>& future_slots) {
  const int k = chain.num_states();
  const int dp = static_cast<int>(past_slots.size());
  const int df = static_cast<int>(future_slots.size());
  if (dp == 0 || df == 0 || dp > 3 || df > 3) {
    throw std::invalid_argument("block dependence: block sizes must be in 1..3");
  }
  std::uint64_t span = 0;
  for (auto s : past_slots) span = std::max(span, s);
  for (auto s : future_slots) span = std::max(span, s);
  if (span > 16) {
    throw std::invalid_argument("block dependence: slot span too large to enumerate");
  }

  const int np = 1 << dp;
  const int nf = 1 << df;
  std::vector<std::vector<double>> joint(np, std::vector<double>(nf, 0.0));

  // Walk every state path over slots 0..span and add its probability mass to
  // each (past pattern, future pattern) cell.
  std::vector<int> path(span + 1, 0);
  std::vector<double> bit_prob(span + 1, 0.0);
  const auto accumulate_path = [&](double path_prob) {
    for (std::uint64_t s = 0; s <= span; ++s) bit_prob[s] = chain.success[path[s]];
    for (int a = 0; a < np; ++a) {
      double pa = 1.0;
      for (int i = 0; i < dp; ++i) {
        const double p1 = bit_prob[past_slots[i]];
        pa *= (a >> i) & 1 ? p1 : 1.0 - p1;
      }
      if (pa == 0.0) continue;
      for (int b = 0; b < nf; ++b) {
        double pb = 1.0;
        for (int i = 0; i < df; ++i) {
          const double p1 = bit_prob[future_slots[i]];
          pb *= (b >> i) & 1 ? p1 : 1.0 - p1;
        }
        joint[a][b] += path_prob * pa * pb;
      }
    }
  };

  const std::uint64_t total_paths = [&] {
    std::uint64_t t = 1;
    for (std::uint64_t s = 0; s <= span; ++s) t *= static_cast<std::uint64_t>(k);
    return t;
  }();
  for (std::uint64_t idx = 0; idx < total_paths; ++idx) {
    std::uint64_t rest = idx;
    double prob = 0.0;
    for (std::uint64_t s = 0; s <= span; ++s) {
      path[s] = static_cast<int>(rest % k);
      rest /= k;
      if (s == 0) {
        prob = initial[path[0]];
      } else {
        prob *= chain.transition[path[s - 1]][path[s]];
      }
      if (prob == 0.0) break;
    }
    if (prob > 0.0) accumulate_path(prob);
  }

  std::vector<double> pb(nf, 0.0);
  for (int b = 0; b < nf; ++b) {
    for (int a = 0; a < np; ++a) pb[b] += joint[a][b];
  }
  double best = 0.0;
  for (int ev_a = 0; ev_a < (1 << np); ++ev_a) {
    std::vector<double> wa(nf, 0.0);
    double prob_a = 0.0;
    for (int a = 0; a < np; ++a) {
      if (!((ev_a >> a) & 1)) continue;
      for (int b = 0; b < nf; ++b) wa[b] += joint[a][b];
    }
    for (int b = 0; b < nf; ++b) prob_a += wa[b];
    double pos = 0.0, neg = 0.0;
    for (int b = 0; b < nf; ++b) {
      const double c = wa[b] - prob_a * pb[b];
      if (c > 0) pos += c;
      else neg -= c;
    }
    best = std::max({best, pos, neg});
  }
  return best;
}

GeometricEnvelope markov_alpha_bound(const MarkovChannel& chain) {
  validate_process(EdgeProcessSpec{chain}, "alpha bound");
  if (!markov_irreducible(chain)) {
    throw std::invalid_argument("alpha bound: chain must be irreducible");
  }
  if (!markov_aperiodic(chain)) {
    throw std::invalid_argument("alpha bound: chain must be aperiodic");
  }
  const int k = chain.num_states();

  GeometricEnvelope env;
  if (k == 1) {
    env.rate = 0.0;
    env.coeff = 0.25;
    return env;
  }

  Eigen::MatrixXd p(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) p(i, j) = chain.transition[i][j];
  }
  const Eigen::EigenSolver<Eigen::MatrixXd> solver(p);
  const auto values = solver.eigenvalues();
  int unit_index = 0;
  double best_dist = std::abs(values(0) - std::complex<double>(1.0, 0.0));
  for (int i = 1; i < k; ++i) {
    const double d = std::abs(values(i) - std::complex<double>(1.0, 0.0));
    if (d < best_dist) {
      best_dist = d;
      unit_index = i;
    }
  }
  double slem = 0.0;
  for (int i = 0; i < k; ++i) {
    if (i == unit_index) continue;
    slem = std::max(slem, std::abs(values(i)));
  }
  env.rate = slem;

  const auto pi = markov_stationary(chain);
  double coeff = 0.0;
  for (std::uint64_t lag = 1; lag <= 5; ++lag) {
    const double dep = exact_block_dependence(chain, pi, {0}, {lag});
    if (env.rate > 0.0) {
      coeff = std::max(coeff, dep / std::pow(env.rate, static_cast<double>(lag)));
    } else if (dep > 0.0) {
      throw std::logic_error("alpha bound: zero rate with nonzero dependence");
    }
  }
  if (coeff == 0.0) coeff = 0.25;  // degenerate chains: keep a valid lag-0 cap
  // The max-ratio calibration touches the exact value at the binding lag;
  // a hair of headroom keeps envelope >= exact under rounding.
  env.coeff = coeff * (1.0 + 1e-9);
  return env;
}

}  // namespace aoilab
