#include "aoilab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "aoilab/aoi.hpp"
#include "aoilab/dominance.hpp"
#include "aoilab/mixing.hpp"

namespace aoilab {
namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string pair_tag(int from, int to) {
  std::ostringstream os;
  os << from << "->" << to;
  return os.str();
}

class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::string& header) : path_(path.string()) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open output file: " + path_);
    out_ << header << "\n";
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ",";
      out_ << cells[i];
    }
    out_ << "\n";
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

// Mergeable per-replication age histogram; replayed into a TailHistogram
// during the ordered reduction.
struct AgeCounts {
  std::vector<std::uint64_t> counts;

  void add(std::uint64_t age) {
    if (age >= counts.size()) counts.resize(age + 1, 0);
    ++counts[age];
  }
  void merge(const AgeCounts& other) {
    if (other.counts.size() > counts.size()) counts.resize(other.counts.size(), 0);
    for (std::size_t i = 0; i < other.counts.size(); ++i) counts[i] += other.counts[i];
  }
};

TailHistogram to_histogram(const AgeCounts& c) {
  TailHistogram h;
  for (std::size_t age = 0; age < c.counts.size(); ++age) {
    for (std::uint64_t k = 0; k < c.counts[age]; ++k) h.add(age);
  }
  return h;
}

void parallel_for_reps(std::uint64_t reps, const std::function<void(std::uint64_t)>& fn) {
  const int workers = worker_count(reps);
  if (workers <= 1) {
    for (std::uint64_t r = 0; r < reps; ++r) fn(r);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::uint64_t r = next.fetch_add(1);
        if (r >= reps) return;
        try {
          fn(r);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// ------------------------------ simulation ------------------------------

struct RepSim {
  std::vector<AgeCounts> direct;              // per channel
  std::vector<AgeCounts> flood;               // per ordered pair holder*D+subject
  std::vector<std::uint64_t> growth;          // configured pair, every slot
};

struct SimOptions {
  bool want_growth = false;
  bool want_traces = false;
};

RepSim simulate_rep(const ExperimentConfig& cfg, std::uint64_t rep, const SimOptions& opt,
                    BinaryTraceSet* traces) {
  const int d = cfg.network.num_agents;
  const int n_ch = static_cast<int>(cfg.network.channels.size());
  RepSim res;
  res.direct.resize(n_ch);
  res.flood.resize(static_cast<std::size_t>(d) * d);
  if (opt.want_growth) res.growth.reserve(cfg.horizon);

  NetworkSampler sampler(cfg.network, cfg.seed, rep);
  TimestampMatrix ts(d);
  std::vector<std::uint64_t> last_event(n_ch, 0);
  std::vector<Edge> edges;
  const bool collect_pairs = d <= 8;
  const int mix_ch = cfg.analysis.mixing_channel;

  for (std::uint64_t n = 0; n < cfg.horizon; ++n) {
    const std::vector<std::uint8_t> bits = sampler.sample_slot_bits(n);
    if (opt.want_traces && n < traces->horizon) traces->set(rep, n, bits[mix_ch] != 0);
    edges.clear();
    for (int c = 0; c < n_ch; ++c) {
      if (!bits[c]) continue;
      edges.push_back({cfg.network.channels[c].from, cfg.network.channels[c].to});
      if (n >= 1) last_event[c] = n;
    }
    if (n >= 1) ts.flood_step(edges, n);
    if (n >= 1 && n >= cfg.burn_in) {
      for (int c = 0; c < n_ch; ++c) {
        res.direct[c].add(last_event[c] >= 1 ? n - last_event[c] + 1 : n);
      }
      if (collect_pairs) {
        for (int h = 0; h < d; ++h) {
          for (int s = 0; s < d; ++s) {
            if (h != s) res.flood[static_cast<std::size_t>(h) * d + s].add(ts.age(h, s));
          }
        }
      } else if (cfg.analysis.pair_holder >= 0) {
        res.flood[static_cast<std::size_t>(cfg.analysis.pair_holder) * d +
                  cfg.analysis.pair_subject]
            .add(ts.age(cfg.analysis.pair_holder, cfg.analysis.pair_subject));
      }
    }
    if (opt.want_growth) {
      res.growth.push_back(ts.age(cfg.analysis.pair_holder, cfg.analysis.pair_subject));
    }
  }
  return res;
}

// ------------------------------ candidates ------------------------------

double channel_eps_fail(const ExperimentConfig& cfg, const ChannelSpec& ch) {
  const double ws = worst_case_window_success(ch.process, cfg.analysis.ssc_kappa + 1);
  double ef = 1.0 - ws;
  if (ef <= 0.0) {
    // Deterministic window success; fall back to the certified level so the
    // bound stays a valid (if loose) tail.
    ef = cfg.analysis.ssc_epsilon > 0.0 ? 1.0 - cfg.analysis.ssc_epsilon : 1e-12;
  }
  if (ef >= 1.0) {
    throw std::invalid_argument("channel " + pair_tag(ch.from, ch.to) +
                                " never succeeds within the certificate window");
  }
  return ef;
}

TailFunction constructed_channel_tail(const ExperimentConfig& cfg, const ChannelSpec& ch) {
  const double ef = channel_eps_fail(cfg, ch);
  const auto& a = cfg.analysis;
  if (const auto* mc = std::get_if<MarkovChannel>(&ch.process)) {
    const GeometricEnvelope env = markov_alpha_bound(*mc);
    const AlphaFn alpha = geometric_alpha(env.coeff, env.rate);
    const double p = (a.mixing_p > 0.0) ? a.mixing_p : 1.0;
    return mixing_tail_bound(ef, a.ssc_kappa, alpha, p, a.bound_grid).tail;
  }
  return iid_tail_bound(ef, a.ssc_kappa, a.bound_grid);
}

// Shortest channel path subject -> holder; empty when unreachable.
std::vector<int> channel_path(const NetworkSpec& net, int subject, int holder) {
  const int d = net.num_agents;
  std::vector<int> prev_node(d, -1), prev_ch(d, -1);
  std::vector<char> seen(d, 0);
  std::queue<int> q;
  q.push(subject);
  seen[subject] = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    if (u == holder) break;
    for (std::size_t c = 0; c < net.channels.size(); ++c) {
      const auto& ch = net.channels[c];
      if (ch.from != u || seen[ch.to]) continue;
      seen[ch.to] = 1;
      prev_node[ch.to] = u;
      prev_ch[ch.to] = static_cast<int>(c);
      q.push(ch.to);
    }
  }
  if (!seen[holder]) return {};
  std::vector<int> path;
  for (int v = holder; v != subject; v = prev_node[v]) path.push_back(prev_ch[v]);
  std::reverse(path.begin(), path.end());
  return path;
}

struct DomCheck {
  bool pass = false;
  bool strict = false;       // library dominates() with zero slack
  double worst_margin = 0.0;
  std::uint64_t worst_m = 0;
};

DomCheck check_dominance(const TailFunction& cand, const TailHistogram& hist, double sigma_mult,
                         std::uint64_t m_max) {
  const std::vector<double> ccdf = hist.ccdf();
  const double n = static_cast<double>(hist.total());
  DomCheck res;
  res.worst_margin = std::numeric_limits<double>::infinity();
  for (std::uint64_t m = 0; m <= m_max; ++m) {
    const double emp = m < ccdf.size() ? ccdf[m] : 0.0;
    const double sigma = n > 0 ? std::sqrt(emp * (1.0 - emp) / n) : 0.0;
    const double margin = cand.value(m) + sigma_mult * sigma - emp;
    if (margin < res.worst_margin) {
      res.worst_margin = margin;
      res.worst_m = m;
    }
  }
  res.pass = res.worst_margin >= -1e-15;
  res.strict = dominates(cand, tail_from_ccdf(ccdf), 0.0, m_max);
  return res;
}

// ------------------------------ sgd ------------------------------

struct SgdRep {
  double final_dist = 0.0;
  double err_first = 0.0;
  double err_last = 0.0;
  double ratio = 0.0;
  // slot, agent, coordinate, value
  std::vector<std::tuple<std::uint64_t, int, int, double>> trace_rows;
  // slot, agent, grad_error, dist
  std::vector<std::tuple<std::uint64_t, int, double, double>> error_rows;
};

SgdRep run_sgd_rep(const ExperimentConfig& cfg, const Objective& objective, std::uint64_t rep) {
  SgdRunConfig rc;
  rc.schedule = cfg.schedule;
  rc.network = cfg.network;
  rc.lambda = cfg.objective.lambda;
  rc.horizon = cfg.horizon;
  rc.seed = cfg.seed;
  rc.replication = rep;
  const RunTrace tr = run_sgd(objective, rc);

  const std::uint64_t t_max = cfg.horizon;
  const std::uint64_t window = std::max<std::uint64_t>(1, t_max / 10);
  const int d = objective.num_agents();
  auto slot_err = [&](std::uint64_t n) {
    double s = 0.0;
    for (double e : tr.grad_error[n]) s += e;
    return s / static_cast<double>(d);
  };
  SgdRep out;
  for (std::uint64_t n = 0; n < window; ++n) out.err_first += slot_err(n);
  for (std::uint64_t n = t_max - window; n < t_max; ++n) out.err_last += slot_err(n);
  out.err_first /= static_cast<double>(window);
  out.err_last /= static_cast<double>(window);
  out.ratio = out.err_first > 0.0 ? out.err_last / out.err_first : 0.0;
  out.final_dist = tr.dist_to_opt.empty() ? 0.0 : tr.dist_to_opt.back();

  const std::uint64_t stride = cfg.analysis.trace_stride;
  for (std::uint64_t n = 0; n <= t_max; n += (n + stride <= t_max ? stride : t_max - n + 1)) {
    for (int a = 0; a < d; ++a) {
      const int off = objective.block_offset(a);
      for (int k = 0; k < objective.block_size(a); ++k) {
        out.trace_rows.emplace_back(n, a, off + k, tr.x[n][off + k]);
      }
      if (n < t_max) {
        out.error_rows.emplace_back(n, a, tr.grad_error[n][a],
                                    tr.dist_to_opt.empty() ? 0.0 : tr.dist_to_opt[n]);
      }
    }
    if (n == t_max) break;
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ------------------------------ mixing ------------------------------

struct MixingInputs {
  std::vector<std::vector<double>> estimates;  // [dim-1][lag-1]; empty when no lags
  std::vector<double> exact;                   // [lag-1]; markov channels only
  std::optional<GeometricEnvelope> envelope;   // markov channels only
  MixingProfile profile;
};

MixingInputs gather_mixing(const ExperimentConfig& cfg, const BinaryTraceSet* traces) {
  const auto& a = cfg.analysis;
  MixingInputs in;
  const ChannelSpec& ch = cfg.network.channels[a.mixing_channel];
  const auto* mc = std::get_if<MarkovChannel>(&ch.process);

  if (a.mixing_lags > 0 && traces != nullptr) {
    BinaryTraceSet windowed;
    const BinaryTraceSet* use = traces;
    if (a.mixing_eta > 0) {
      windowed = window_indicator(*traces, a.mixing_eta);
      use = &windowed;
    }
    in.estimates.resize(a.mixing_dim);
    for (int dim = 1; dim <= a.mixing_dim; ++dim) {
      for (int lag = 1; lag <= a.mixing_lags; ++lag) {
        in.estimates[dim - 1].push_back(empirical_alpha(*use, lag, dim).value);
      }
    }
  }
  if (mc != nullptr) {
    in.envelope = markov_alpha_bound(*mc);
    const std::vector<double> pi = markov_stationary(*mc);
    const int lags = std::max(a.mixing_lags, 6);
    for (int lag = 1; lag <= lags; ++lag) {
      in.exact.push_back(exact_block_dependence(*mc, pi, {0}, {static_cast<std::uint64_t>(lag)}));
    }
  }

  const std::size_t lags = std::max<std::size_t>(a.mixing_lags, 8);
  if (a.alpha_override == AlphaOverrideKind::kGeometric) {
    in.profile = profile_from_envelope(a.alpha_coeff, a.alpha_rate, lags);
  } else if (a.alpha_override == AlphaOverrideKind::kRational) {
    in.profile.alpha = rational_alpha(a.alpha_coeff, a.alpha_rate);
    in.profile.provenance = "analytic_envelope";
    for (std::size_t lag = 1; lag <= lags; ++lag) {
      in.profile.envelope.push_back(in.profile.alpha.at(lag));
    }
  } else if (in.envelope) {
    in.profile = profile_from_envelope(in.envelope->coeff, in.envelope->rate, lags);
  } else if (!in.estimates.empty()) {
    in.profile = profile_from_estimates(in.estimates.back());
  } else {
    in.profile.alpha = zero_alpha();
    in.profile.provenance = "analytic_envelope";
  }
  return in;
}

// ------------------------------ selftest ------------------------------

// Random finite-support tails checked against the direct moment sum
// sum_k k^p P(tau = k); the telescoping identity makes them equal.
Verdict moment_selftest(std::uint64_t seed) {
  double worst = 0.0;
  for (std::uint64_t idx = 0; idx < 50; ++idx) {
    const RngKey key{seed, 0, Stream::kSelftest, idx};
    const std::uint64_t support = 1 + key.word(0, 0) % 20;
    std::vector<double> pmf(support + 1);
    double total = 0.0;
    for (std::uint64_t k = 0; k <= support; ++k) {
      pmf[k] = key.uniform01(1, k);
      total += pmf[k];
    }
    for (double& w : pmf) w /= total;
    std::vector<double> ccdf(support + 1);
    double acc = 0.0;
    for (std::uint64_t m = support; m-- > 0;) {
      acc += pmf[m + 1];
      ccdf[m] = acc;
    }
    ccdf[support] = 0.0;
    const TailFunction tail = tail_from_ccdf(ccdf);
    for (double p : {1.0, 1.5, 2.0}) {
      double brute = 0.0;
      for (std::uint64_t k = 1; k <= support; ++k) {
        brute += std::pow(static_cast<double>(k), p) * pmf[k];
      }
      const double lib = moment_p(tail, p);
      worst = std::max(worst, std::abs(lib - brute) / std::max(brute, 1e-300));
    }
  }
  Verdict v;
  v.name = "moment_identity";
  v.pass = worst <= 1e-12;
  v.value = worst;
  v.detail = "50 random finite-support tails, p in {1, 1.5, 2}";
  v.source = "verdicts.csv";
  return v;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

bool ReportBundle::all_pass() const {
  for (const auto& v : verdicts) {
    if (!v.pass) return false;
  }
  return true;
}

const Verdict* ReportBundle::find(const std::string& name) const {
  for (const auto& v : verdicts) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

int worker_count(std::uint64_t replications) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  std::uint64_t cap = hw;
  if (const char* env = std::getenv("AOI_LAB_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) cap = v;
  }
  if (replications == 0) replications = 1;
  return static_cast<int>(std::min(replications, cap));
}

ReportBundle run_scenario(const ExperimentConfig& config, const std::string& out_dir,
                          RunMode mode) {
  const auto t_start = std::chrono::steady_clock::now();
  config.validate();
  const auto& a = config.analysis;
  const int d = config.network.num_agents;
  const int n_ch = static_cast<int>(config.network.channels.size());

  const bool do_ssc = mode == RunMode::kCertifySsc ||
                      (mode == RunMode::kReport && a.ssc_epsilon > 0.0);
  const bool do_sgd = (mode == RunMode::kSgdRun || mode == RunMode::kReport) &&
                      config.objective.kind != ObjectiveKind::kNone;
  const bool do_mixing = (mode == RunMode::kAnalyzeMixing || mode == RunMode::kReport) &&
                         n_ch > 0 &&
                         (a.mixing_lags > 0 || a.alpha_override != AlphaOverrideKind::kNone);
  const bool needs_sim = mode == RunMode::kSimulate || mode == RunMode::kAnalyzeAoi ||
                         mode == RunMode::kAnalyzeMixing || mode == RunMode::kReport;
  const bool do_aoi = mode == RunMode::kAnalyzeAoi || mode == RunMode::kReport;
  const bool do_growth = needs_sim && a.growth_epsilon > 0.0 && a.pair_holder >= 0;

  fs::create_directories(out_dir);
  ReportBundle bundle;
  bundle.scenario = config.name;
  bundle.seed = config.seed;
  bundle.config_echo = config.echo();

  {
    std::ofstream echo(fs::path(out_dir) / "config_echo.cfg", std::ios::binary | std::ios::trunc);
    echo << bundle.config_echo;
  }

  // ---- certificate ----
  std::optional<SscCertificate> cert;
  if (do_ssc) {
    cert = ssc_certificate(config.network, a.ssc_epsilon, a.ssc_kappa);
    double min_ws = 1.0;
    for (int c = 0; c < n_ch; ++c) {
      const double ws = cert->window_success[c];
      min_ws = std::min(min_ws, ws);
      Verdict v;
      v.name = "window_success_" + std::to_string(config.network.channels[c].from) + "_" +
               std::to_string(config.network.channels[c].to);
      v.pass = ws + 1e-12 >= a.ssc_epsilon;
      v.value = ws;
      v.detail = "channel " + pair_tag(config.network.channels[c].from,
                                       config.network.channels[c].to);
      v.source = "verdicts.csv";
      bundle.verdicts.push_back(v);
    }
    Verdict v;
    v.name = "ssc_holds";
    v.pass = cert->holds;
    v.value = min_ws;
    v.detail = "epsilon=" + fmt(a.ssc_epsilon) + " kappa=" + std::to_string(a.ssc_kappa);
    v.source = "verdicts.csv";
    bundle.verdicts.push_back(v);
  }

  // ---- simulation ----
  std::vector<TailHistogram> direct_hist(n_ch);
  std::vector<TailHistogram> flood_hist(static_cast<std::size_t>(d) * d);
  std::vector<std::vector<std::uint64_t>> growth_traces;
  BinaryTraceSet traces;
  const bool want_traces = do_mixing && a.mixing_lags > 0;

  if (needs_sim && n_ch > 0) {
    if (want_traces) traces = BinaryTraceSet::zeros(config.replications, config.horizon);
    SimOptions opt{do_growth, want_traces};
    std::vector<RepSim> reps(config.replications);
    parallel_for_reps(config.replications, [&](std::uint64_t r) {
      reps[r] = simulate_rep(config, r, opt, want_traces ? &traces : nullptr);
    });
    std::vector<AgeCounts> direct_merged(n_ch);
    std::vector<AgeCounts> flood_merged(static_cast<std::size_t>(d) * d);
    for (std::uint64_t r = 0; r < config.replications; ++r) {
      for (int c = 0; c < n_ch; ++c) direct_merged[c].merge(reps[r].direct[c]);
      for (std::size_t p = 0; p < flood_merged.size(); ++p) flood_merged[p].merge(reps[r].flood[p]);
      if (do_growth) growth_traces.push_back(std::move(reps[r].growth));
    }
    for (int c = 0; c < n_ch; ++c) direct_hist[c] = to_histogram(direct_merged[c]);
    for (std::size_t p = 0; p < flood_merged.size(); ++p) flood_hist[p] = to_histogram(flood_merged[p]);
  }

  // ---- candidate tails ----
  std::vector<std::optional<TailFunction>> channel_tails(n_ch);
  std::vector<std::pair<int, int>> reachable_pairs;  // (subject, holder)
  std::vector<TailFunction> pair_tails;
  std::optional<TailFunction> union_tail;
  if (do_aoi && a.candidate != CandidateKind::kNone && n_ch > 0) {
    for (int c = 0; c < n_ch; ++c) {
      channel_tails[c] = a.candidate == CandidateKind::kGeometric
                             ? geometric_tail(a.candidate_coeff, a.candidate_rate)
                             : constructed_channel_tail(config, config.network.channels[c]);
    }
    for (int s = 0; s < d; ++s) {
      for (int h = 0; h < d; ++h) {
        if (s == h) continue;
        const std::vector<int> path = channel_path(config.network, s, h);
        if (path.empty()) continue;
        TailFunction t = *channel_tails[path[0]];
        for (std::size_t k = 1; k < path.size(); ++k) {
          t = compose_transitive(t, *channel_tails[path[k]]);
        }
        reachable_pairs.emplace_back(s, h);
        pair_tails.push_back(std::move(t));
      }
    }
    if (!pair_tails.empty()) union_tail = union_dominating(pair_tails);
  }

  // ---- aoi_tail.csv ----
  if (needs_sim && n_ch > 0) {
    CsvFile csv(fs::path(out_dir) / "aoi_tail.csv", "pair,kind,m,value,samples");
    const std::uint64_t m_top = std::max(a.tail_m_max, a.dominance_m_max);
    for (int c = 0; c < n_ch; ++c) {
      const auto& ch = config.network.channels[c];
      const std::vector<double> ccdf = direct_hist[c].ccdf();
      const std::string samples = std::to_string(direct_hist[c].total());
      for (std::uint64_t m = 0; m <= a.tail_m_max; ++m) {
        const double v = m < ccdf.size() ? ccdf[m] : 0.0;
        csv.row({pair_tag(ch.from, ch.to), "emp_direct", std::to_string(m), fmt(v), samples});
      }
      if (channel_tails[c]) {
        for (std::uint64_t m = 0; m <= m_top; ++m) {
          csv.row({pair_tag(ch.from, ch.to), "bound_direct", std::to_string(m),
                   fmt(channel_tails[c]->value(m)), "0"});
        }
      }
    }
    for (int h = 0; h < d; ++h) {
      for (int s = 0; s < d; ++s) {
        if (h == s) continue;
        const TailHistogram& hist = flood_hist[static_cast<std::size_t>(h) * d + s];
        if (hist.total() == 0) continue;
        const std::vector<double> ccdf = hist.ccdf();
        const std::string samples = std::to_string(hist.total());
        for (std::uint64_t m = 0; m <= a.tail_m_max; ++m) {
          const double v = m < ccdf.size() ? ccdf[m] : 0.0;
          csv.row({pair_tag(s, h), "emp_flood", std::to_string(m), fmt(v), samples});
        }
      }
    }
    for (std::size_t i = 0; i < reachable_pairs.size(); ++i) {
      for (std::uint64_t m = 0; m <= m_top; ++m) {
        csv.row({pair_tag(reachable_pairs[i].first, reachable_pairs[i].second), "bound_flood",
                 std::to_string(m), fmt(pair_tails[i].value(m)), "0"});
      }
    }
    if (union_tail) {
      for (std::uint64_t m = 0; m <= m_top; ++m) {
        csv.row({"union", "bound_union", std::to_string(m), fmt(union_tail->value(m)), "0"});
      }
    }
    bundle.csv_paths.push_back(csv.path());
  }

  // ---- aoi verdicts ----
  if (do_aoi && n_ch > 0) {
    for (int c = 0; c < n_ch; ++c) {
      const auto& ch = config.network.channels[c];
      if (direct_hist[c].total() == 0) continue;
      const double ef = channel_eps_fail(config, ch);
      const double n = static_cast<double>(direct_hist[c].total());
      const double slack = a.sigma_mult * std::sqrt(ef * (1.0 - ef) / n);
      const PrelimCheckResult pre =
          lemma_prelim_check(direct_hist[c].ccdf(), ef, a.ssc_kappa, slack);
      Verdict v;
      v.name = "window_exceedance_" + std::to_string(ch.from) + "_" + std::to_string(ch.to);
      v.pass = !pre.applicable || pre.holds;
      v.value = pre.worst_excess;
      v.detail = pre.applicable
                     ? "eps_fail=" + fmt(ef) + " worst_m=" + std::to_string(pre.worst_m)
                     : "not applicable at this horizon";
      v.source = "aoi_tail.csv";
      bundle.verdicts.push_back(v);
    }

    bool all_dom = true;
    bool any_dom = false;
    if (a.candidate != CandidateKind::kNone) {
      for (int c = 0; c < n_ch; ++c) {
        if (direct_hist[c].total() == 0 || !channel_tails[c]) continue;
        const auto& ch = config.network.channels[c];
        const DomCheck dc =
            check_dominance(*channel_tails[c], direct_hist[c], a.sigma_mult, a.dominance_m_max);
        any_dom = true;
        all_dom = all_dom && dc.pass && dc.strict;
        Verdict v;
        v.name = "dominance_direct_" + std::to_string(ch.from) + "_" + std::to_string(ch.to);
        v.pass = dc.pass && dc.strict;
        v.value = dc.worst_margin;
        v.detail = "worst_m=" + std::to_string(dc.worst_m) + " strict=" + bool_str(dc.strict);
        v.source = "aoi_tail.csv";
        bundle.verdicts.push_back(v);
      }
      for (std::size_t i = 0; i < reachable_pairs.size(); ++i) {
        const auto [s, h] = reachable_pairs[i];
        const TailHistogram& hist = flood_hist[static_cast<std::size_t>(h) * d + s];
        if (hist.total() == 0) continue;
        const DomCheck dc = check_dominance(pair_tails[i], hist, a.sigma_mult, a.dominance_m_max);
        any_dom = true;
        all_dom = all_dom && dc.pass && dc.strict;
        Verdict v;
        v.name = "dominance_flood_" + std::to_string(s) + "_" + std::to_string(h);
        v.pass = dc.pass && dc.strict;
        v.value = dc.worst_margin;
        v.detail = "worst_m=" + std::to_string(dc.worst_m) + " strict=" + bool_str(dc.strict);
        v.source = "aoi_tail.csv";
        bundle.verdicts.push_back(v);
      }
      if (union_tail) {
        bool pass = true;
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& [s, h] : reachable_pairs) {
          const TailHistogram& hist = flood_hist[static_cast<std::size_t>(h) * d + s];
          if (hist.total() == 0) continue;
          const DomCheck dc = check_dominance(*union_tail, hist, a.sigma_mult, a.dominance_m_max);
          pass = pass && dc.pass && dc.strict;
          worst = std::min(worst, dc.worst_margin);
        }
        any_dom = true;
        all_dom = all_dom && pass;
        Verdict v;
        v.name = "dominance_union";
        v.pass = pass;
        v.value = worst;
        v.detail = "union over " + std::to_string(pair_tails.size()) + " pair tails";
        v.source = "aoi_tail.csv";
        bundle.verdicts.push_back(v);
      }
      if (any_dom) {
        Verdict v;
        v.name = "dominance_holds";
        v.pass = all_dom;
        v.value = all_dom ? 1.0 : 0.0;
        v.detail = "all dominance checks";
        v.source = "aoi_tail.csv";
        bundle.verdicts.push_back(v);
      }

      // Moment verdicts integrate the tail backing the configured pair, or
      // the first channel tail when no pair is configured.
      const TailFunction* moment_tail = nullptr;
      if (a.pair_holder >= 0) {
        for (std::size_t i = 0; i < reachable_pairs.size(); ++i) {
          if (reachable_pairs[i].first == a.pair_subject &&
              reachable_pairs[i].second == a.pair_holder) {
            moment_tail = &pair_tails[i];
          }
        }
      }
      if (moment_tail == nullptr && n_ch > 0 && channel_tails[0]) moment_tail = &*channel_tails[0];
      if (moment_tail != nullptr) {
        for (double p : a.moment_p) {
          const MomentReport mr = moment_p_report(*moment_tail, p);
          Verdict v;
          v.name = "moment_finite_p" + fmt(p);
          v.pass = !mr.divergent;
          v.value = mr.value;
          v.detail = "truncation_bound=" + fmt(mr.truncation_bound);
          v.source = "aoi_tail.csv";
          bundle.verdicts.push_back(v);
        }
      }
    }
  }

  // ---- growth ----
  if (do_growth && !growth_traces.empty()) {
    const GrowthReport gr = empirical_growth_check(growth_traces, a.growth_p, a.growth_epsilon);
    CsvFile csv(fs::path(out_dir) / "growth_check.csv", "slot,cumulative_exceed_freq");
    const std::uint64_t stride = a.trace_stride;
    for (std::size_t n = 0; n < gr.partial_sums.size(); n += stride) {
      csv.row({std::to_string(n), fmt(gr.partial_sums[n])});
    }
    csv.row({std::to_string(gr.partial_sums.size() - 1), fmt(gr.partial_sums.back())});
    bundle.csv_paths.push_back(csv.path());

    std::int64_t worst_last = -1;
    for (std::int64_t lv : gr.last_violation) worst_last = std::max(worst_last, lv);
    Verdict v;
    v.name = "growth_converged";
    v.pass = gr.converged;
    v.value = gr.partial_sums.back();
    v.detail = "epsilon=" + fmt(a.growth_epsilon) + " p=" + fmt(a.growth_p) +
               " last_violation=" + std::to_string(worst_last);
    v.source = "growth_check.csv";
    bundle.verdicts.push_back(v);
  }

  // ---- mixing ----
  if (do_mixing) {
    const MixingInputs mix = gather_mixing(config, want_traces ? &traces : nullptr);
    const ChannelSpec& ch = config.network.channels[a.mixing_channel];

    {
      CsvFile csv(fs::path(out_dir) / "mixing_profile.csv",
                  "lag,dim,alpha_hat,alpha_exact,alpha_envelope,alpha_used,provenance");
      const int lags = std::max(a.mixing_lags,
                                static_cast<int>(std::min<std::size_t>(mix.exact.size(), 8)));
      for (int lag = 1; lag <= lags; ++lag) {
        const int dims = mix.estimates.empty() ? 1 : static_cast<int>(mix.estimates.size());
        for (int dim = 1; dim <= dims; ++dim) {
          const bool has_est = !mix.estimates.empty() && lag <= a.mixing_lags;
          const double est = has_est ? mix.estimates[dim - 1][lag - 1] : -1.0;
          const double exact =
              lag <= static_cast<int>(mix.exact.size()) ? mix.exact[lag - 1] : -1.0;
          const double env = mix.envelope ? mix.envelope->at(lag) : -1.0;
          csv.row({std::to_string(lag), std::to_string(dim), fmt(est), fmt(exact), fmt(env),
                   fmt(mix.profile.alpha.at(lag)), mix.profile.provenance});
        }
      }
      bundle.csv_paths.push_back(csv.path());
    }

    if (mix.envelope && !mix.exact.empty()) {
      bool pass = true;
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < mix.exact.size(); ++i) {
        const double margin = mix.envelope->at(i + 1) - mix.exact[i];
        pass = pass && margin >= -1e-12 && mix.exact[i] > 0.0;
        worst = std::min(worst, margin);
      }
      Verdict v;
      v.name = "alpha_envelope_valid";
      v.pass = pass;
      v.value = worst;
      v.detail = "lags 1.." + std::to_string(mix.exact.size());
      v.source = "mixing_profile.csv";
      bundle.verdicts.push_back(v);
    }
    if (!mix.exact.empty() && !mix.estimates.empty()) {
      const double sigma = std::sqrt(0.25 / static_cast<double>(config.replications));
      bool pass = true;
      double worst = 0.0;
      const int lags = std::min<int>(a.mixing_lags, static_cast<int>(mix.exact.size()));
      for (int lag = 1; lag <= lags; ++lag) {
        const double diff = std::abs(mix.estimates[0][lag - 1] - mix.exact[lag - 1]);
        worst = std::max(worst, diff);
        pass = pass && diff <= a.sigma_mult * sigma;
      }
      Verdict v;
      v.name = "alpha_estimate_close";
      v.pass = pass;
      v.value = worst;
      v.detail = "tolerance=" + fmt(a.sigma_mult * sigma) + " at dim 1";
      v.source = "mixing_profile.csv";
      bundle.verdicts.push_back(v);
    }

    const MixingDiagnostic diag = p_mixing_diagnostic(mix.profile, a.mixing_p);
    {
      Verdict v;
      v.name = "mixing_summable";
      v.pass = diag.verdict == "summable";
      v.value = diag.total;
      v.detail = "verdict=" + diag.verdict + " p=" + fmt(a.mixing_p);
      v.source = "mixing_profile.csv";
      bundle.verdicts.push_back(v);
    }

    const double ef = channel_eps_fail(config, ch);
    const double p = (a.mixing_p > 0.0) ? a.mixing_p : 1.0;
    const MixingTailReport rep = mixing_tail_bound(ef, a.ssc_kappa, mix.profile.alpha, p, a.bound_grid);
    {
      Verdict v;
      v.name = "mixing_moment_finite";
      v.pass = !rep.moment.divergent;
      v.value = rep.moment.value;
      v.detail = "mu_fit=" + fmt(rep.mu_fit) + " delta=" + fmt(rep.delta);
      v.source = "mixing_profile.csv";
      bundle.verdicts.push_back(v);

      const std::uint64_t m_star = 100000;
      const double weight = std::pow(static_cast<double>(m_star + 1), p) -
                            std::pow(static_cast<double>(m_star), p);
      const double inc = weight * rep.tail.value(m_star);
      Verdict w;
      w.name = "mixing_increment_small";
      w.pass = inc < 1e-9;
      w.value = inc;
      w.detail = "moment increment at m=" + std::to_string(m_star);
      w.source = "mixing_profile.csv";
      bundle.verdicts.push_back(w);
    }
    if (needs_sim && direct_hist[a.mixing_channel].total() > 0) {
      const DomCheck dc = check_dominance(rep.tail, direct_hist[a.mixing_channel], a.sigma_mult,
                                          a.dominance_m_max);
      Verdict v;
      v.name = "mixing_tail_dominates";
      v.pass = dc.pass && dc.strict;
      v.value = dc.worst_margin;
      v.detail = "worst_m=" + std::to_string(dc.worst_m) + " strict=" + bool_str(dc.strict);
      v.source = "aoi_tail.csv";
      bundle.verdicts.push_back(v);
    }
  }

  // ---- sgd ----
  if (do_sgd) {
    const std::unique_ptr<Objective> objective = make_objective(config);
    std::vector<SgdRep> reps(config.replications);
    parallel_for_reps(config.replications,
                      [&](std::uint64_t r) { reps[r] = run_sgd_rep(config, *objective, r); });

    CsvFile trace_csv(fs::path(out_dir) / "sgd_trace.csv",
                      "replication,slot,agent,coordinate,value");
    CsvFile err_csv(fs::path(out_dir) / "sgd_errors.csv",
                    "replication,slot,agent,grad_error,dist_to_opt");
    std::vector<double> finals;
    double worst_ratio = 0.0;
    for (std::uint64_t r = 0; r < config.replications; ++r) {
      for (const auto& [n, agent, coord, val] : reps[r].trace_rows) {
        trace_csv.row({std::to_string(r), std::to_string(n), std::to_string(agent),
                       std::to_string(coord), fmt(val)});
      }
      for (const auto& [n, agent, err, dist] : reps[r].error_rows) {
        err_csv.row({std::to_string(r), std::to_string(n), std::to_string(agent), fmt(err),
                     fmt(dist)});
      }
      finals.push_back(reps[r].final_dist);
      worst_ratio = std::max(worst_ratio, reps[r].ratio);
    }
    bundle.csv_paths.push_back(trace_csv.path());
    bundle.csv_paths.push_back(err_csv.path());

    const double med = median(finals);
    {
      Verdict v;
      v.name = "sgd_converged";
      v.pass = med < a.convergence_tol;
      v.value = med;
      v.detail = "median final distance, tol=" + fmt(a.convergence_tol);
      v.source = "sgd_errors.csv";
      bundle.verdicts.push_back(v);
    }
    {
      Verdict v;
      v.name = "sgd_error_decay";
      v.pass = worst_ratio < a.error_decay_ratio;
      v.value = worst_ratio;
      v.detail = "worst per-replication last/first mean gradient error, tol=" +
                 fmt(a.error_decay_ratio);
      v.source = "sgd_errors.csv";
      bundle.verdicts.push_back(v);
    }
    if (a.mixing_p >= 1.0 && a.mixing_p < 2.0) {
      const StepSizeReport sr = step_size_check(config.schedule, a.mixing_p);
      Verdict v;
      v.name = "step_schedule_valid";
      v.pass = sr.not_summable && sr.square_summable && sr.big_o_matches;
      v.value = config.schedule.kind == StepSchedule::Kind::kPower ? config.schedule.gamma
                                                                   : config.schedule.value;
      v.detail = std::string("not_summable=") + bool_str(sr.not_summable) +
                 " square_summable=" + bool_str(sr.square_summable) +
                 " big_o_matches=" + bool_str(sr.big_o_matches);
      v.source = "sgd_errors.csv";
      bundle.verdicts.push_back(v);
    }
  }

  // ---- selftest ----
  if (mode == RunMode::kReport && a.selftest_moments) {
    bundle.verdicts.push_back(moment_selftest(config.seed));
  }

  // ---- verdicts.csv + metadata ----
  {
    CsvFile csv(fs::path(out_dir) / "verdicts.csv", "scenario,verdict,pass,value,detail,source");
    for (const auto& v : bundle.verdicts) {
      std::string detail = v.detail;
      std::replace(detail.begin(), detail.end(), ',', ';');
      csv.row({config.name, v.name, bool_str(v.pass), fmt(v.value), detail, v.source});
    }
    bundle.csv_paths.push_back(csv.path());
  }

  bundle.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  {
    std::ofstream meta(fs::path(out_dir) / "run_meta.txt", std::ios::binary | std::ios::trunc);
    meta << "scenario " << config.name << "\n"
         << "seed " << config.seed << "\n"
         << "replications " << config.replications << "\n"
         << "horizon " << config.horizon << "\n"
         << "workers " << worker_count(config.replications) << "\n"
         << "library aoilab 0.1.0\n"
         << "wall_seconds " << fmt(bundle.wall_seconds) << "\n";
  }
  return bundle;
}

}  // namespace aoilab
