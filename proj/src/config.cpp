#include "aoilab/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace aoilab {
namespace {

struct ParseCursor {
  const std::string* origin;
  int line = 0;

  [[noreturn]] void fail(const std::string& message) const {
    std::ostringstream os;
    os << *origin << " line " << line << ": " << message;
    throw std::invalid_argument(os.str());
  }
};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double to_double(const ParseCursor& cur, const std::string& key, const std::string& tok) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE) {
    cur.fail("key '" + key + "': expected a number, got '" + tok + "'");
  }
  return v;
}

std::uint64_t to_u64(const ParseCursor& cur, const std::string& key, const std::string& tok) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE || tok.front() == '-') {
    cur.fail("key '" + key + "': expected a nonnegative integer, got '" + tok + "'");
  }
  return v;
}

int to_int(const ParseCursor& cur, const std::string& key, const std::string& tok) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE) {
    cur.fail("key '" + key + "': expected an integer, got '" + tok + "'");
  }
  return static_cast<int>(v);
}

bool to_bool(const ParseCursor& cur, const std::string& key, const std::string& tok) {
  if (tok == "true") return true;
  if (tok == "false") return false;
  cur.fail("key '" + key + "': expected true or false, got '" + tok + "'");
}

std::string one_token(const ParseCursor& cur, const std::string& key, const std::string& value) {
  const auto toks = split_ws(value);
  if (toks.size() != 1) cur.fail("key '" + key + "': expected a single value");
  return toks.front();
}

ChannelSpec parse_channel(const ParseCursor& cur, const std::string& value) {
  const auto toks = split_ws(value);
  if (toks.size() < 4) cur.fail("channel: expected 'FROM TO KIND ...'");
  ChannelSpec ch;
  ch.from = to_int(cur, "channel", toks[0]);
  ch.to = to_int(cur, "channel", toks[1]);
  const std::string& kind = toks[2];
  if (kind == "iid") {
    if (toks.size() != 4) cur.fail("channel: iid takes one parameter (success probability)");
    ch.process = IidChannel{to_double(cur, "channel", toks[3])};
  } else if (kind == "periodic") {
    if (toks.size() != 5) cur.fail("channel: periodic takes two parameters (period, offset)");
    ch.process = PeriodicChannel{to_u64(cur, "channel", toks[3]), to_u64(cur, "channel", toks[4])};
  } else if (kind == "markov") {
    const std::uint64_t k = to_u64(cur, "channel", toks[3]);
    if (k < 1 || k > 16) cur.fail("channel: markov state count must lie in 1..16");
    const std::size_t need = 4 + k * k + 2 * k;
    if (toks.size() != need) {
      std::ostringstream os;
      os << "channel: markov with " << k << " states takes " << k * k
         << " transition entries, then " << k << " success probabilities, then " << k
         << " initial weights";
      cur.fail(os.str());
    }
    MarkovChannel mc;
    std::size_t pos = 4;
    mc.transition.assign(k, std::vector<double>(k));
    for (std::uint64_t r = 0; r < k; ++r) {
      for (std::uint64_t c = 0; c < k; ++c) mc.transition[r][c] = to_double(cur, "channel", toks[pos++]);
    }
    mc.success.resize(k);
    for (std::uint64_t r = 0; r < k; ++r) mc.success[r] = to_double(cur, "channel", toks[pos++]);
    mc.initial.resize(k);
    for (std::uint64_t r = 0; r < k; ++r) mc.initial[r] = to_double(cur, "channel", toks[pos++]);
    ch.process = std::move(mc);
  } else {
    cur.fail("channel: unknown kind '" + kind + "' (expected iid, periodic, or markov)");
  }
  return ch;
}

void append_channel_line(std::ostringstream& os, const ChannelSpec& ch) {
  os << "channel = " << ch.from << " " << ch.to << " ";
  if (const auto* iid = std::get_if<IidChannel>(&ch.process)) {
    os << "iid " << iid->q;
  } else if (const auto* per = std::get_if<PeriodicChannel>(&ch.process)) {
    os << "periodic " << per->period << " " << per->offset;
  } else {
    const auto& mc = std::get<MarkovChannel>(ch.process);
    os << "markov " << mc.num_states();
    for (const auto& row : mc.transition) {
      for (double v : row) os << " " << v;
    }
    for (double v : mc.success) os << " " << v;
    for (double v : mc.initial) os << " " << v;
  }
  os << "\n";
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty()) throw std::invalid_argument("scenario name must not be empty");
  if (replications == 0) throw std::invalid_argument("replications must be positive");
  if (horizon == 0) throw std::invalid_argument("horizon must be positive");
  if (horizon <= burn_in) throw std::invalid_argument("horizon must exceed the burn-in");
  network.validate();

  const int d = network.num_agents;
  const auto& a = analysis;
  if (a.pair_holder >= 0 || a.pair_subject >= 0) {
    if (a.pair_holder < 0 || a.pair_holder >= d || a.pair_subject < 0 || a.pair_subject >= d) {
      throw std::invalid_argument("analysis pair indices must name agents");
    }
    if (a.pair_holder == a.pair_subject) throw std::invalid_argument("analysis pair must be distinct agents");
  }
  if (a.mixing_lags > 0) {
    if (a.mixing_channel < 0 || a.mixing_channel >= static_cast<int>(network.channels.size())) {
      throw std::invalid_argument("mixing_channel must index a configured channel");
    }
    if (a.mixing_dim < 1 || a.mixing_dim > 3) throw std::invalid_argument("mixing_dim must lie in 1..3");
  }
  if (a.ssc_epsilon < 0.0 || a.ssc_epsilon >= 1.0) {
    throw std::invalid_argument("ssc_epsilon must lie in [0, 1)");
  }
  if (a.candidate == CandidateKind::kGeometric) {
    if (!(a.candidate_coeff >= 0.0) || !(a.candidate_rate >= 0.0 && a.candidate_rate <= 1.0)) {
      throw std::invalid_argument("geometric candidate needs coeff >= 0 and rate in [0, 1]");
    }
  }
  if (a.growth_epsilon != 0.0) {
    if (!(a.growth_epsilon > 0.0 && a.growth_epsilon < 1.0)) {
      throw std::invalid_argument("growth_epsilon must lie in (0, 1)");
    }
    if (!(a.growth_p > 0.0)) throw std::invalid_argument("growth_p must be positive");
    if (a.pair_holder < 0) throw std::invalid_argument("growth check needs an analysis pair");
  }
  for (double p : a.moment_p) {
    if (!(p > 0.0)) throw std::invalid_argument("moment_p entries must be positive");
  }
  if (a.bound_grid < 64) throw std::invalid_argument("bound_grid must be at least 64");
  if (a.trace_stride == 0) throw std::invalid_argument("trace_stride must be positive");
  if (!(a.sigma_mult >= 0.0)) throw std::invalid_argument("sigma_mult must be nonnegative");

  const auto& o = objective;
  if (o.kind != ObjectiveKind::kNone) {
    std::vector<int> dims = o.dims;
    if (dims.empty()) dims.assign(d, 1);
    if (static_cast<int>(dims.size()) != d) {
      throw std::invalid_argument("objective dims must list one block size per agent");
    }
    int total = 0;
    for (int b : dims) {
      if (b < 1) throw std::invalid_argument("objective dims must be positive");
      total += b;
    }
    if (o.kind == ObjectiveKind::kQuadratic && static_cast<int>(o.target.size()) != total) {
      throw std::invalid_argument("quadratic target must list one value per coordinate");
    }
    if (o.kind == ObjectiveKind::kLeastSquares && o.rows < total) {
      throw std::invalid_argument("least-squares rows must be at least the coordinate count");
    }
    if (!(o.noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be nonnegative");
    if (!(o.lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  }
}

std::string ExperimentConfig::echo() const {
  std::ostringstream os;
  os.precision(17);
  os << "[scenario]\n"
     << "name = " << name << "\n"
     << "seed = " << seed << "\n"
     << "replications = " << replications << "\n"
     << "horizon = " << horizon << "\n"
     << "burn_in = " << burn_in << "\n\n";

  os << "[network]\n"
     << "agents = " << network.num_agents << "\n";
  for (const auto& ch : network.channels) append_channel_line(os, ch);
  os << "\n";

  os << "[objective]\n"
     << "kind = "
     << (objective.kind == ObjectiveKind::kNone
             ? "none"
             : objective.kind == ObjectiveKind::kQuadratic ? "quadratic" : "least_squares")
     << "\n";
  os << "target =";
  for (double v : objective.target) os << " " << v;
  os << "\n";
  os << "dims =";
  for (int v : objective.dims) os << " " << v;
  os << "\n";
  os << "noise_sigma = " << objective.noise_sigma << "\n"
     << "lambda = " << objective.lambda << "\n"
     << "rows = " << objective.rows << "\n"
     << "data_seed = " << objective.data_seed << "\n\n";

  os << "[schedule]\n";
  if (schedule.kind == StepSchedule::Kind::kPower) {
    os << "kind = power\n"
       << "a0 = " << schedule.a0 << "\n"
       << "gamma = " << schedule.gamma << "\n";
  } else {
    os << "kind = constant\n"
       << "value = " << schedule.value << "\n";
  }
  os << "\n";

  const auto& a = analysis;
  os << "[analysis]\n"
     << "ssc_epsilon = " << a.ssc_epsilon << "\n"
     << "ssc_kappa = " << a.ssc_kappa << "\n"
     << "mixing_lags = " << a.mixing_lags << "\n"
     << "mixing_dim = " << a.mixing_dim << "\n"
     << "mixing_p = " << a.mixing_p << "\n"
     << "mixing_eta = " << a.mixing_eta << "\n"
     << "mixing_channel = " << a.mixing_channel << "\n"
     << "tail_m_max = " << a.tail_m_max << "\n"
     << "bound_grid = " << a.bound_grid << "\n"
     << "dominance_m_max = " << a.dominance_m_max << "\n"
     << "sigma_mult = " << a.sigma_mult << "\n"
     << "growth_epsilon = " << a.growth_epsilon << "\n"
     << "growth_p = " << a.growth_p << "\n";
  os << "candidate = ";
  switch (a.candidate) {
    case CandidateKind::kNone: os << "none"; break;
    case CandidateKind::kConstructed: os << "constructed"; break;
    case CandidateKind::kGeometric:
      os << "geometric " << a.candidate_coeff << " " << a.candidate_rate;
      break;
  }
  os << "\n";
  os << "alpha_override = ";
  switch (a.alpha_override) {
    case AlphaOverrideKind::kNone: os << "none"; break;
    case AlphaOverrideKind::kGeometric:
      os << "geometric " << a.alpha_coeff << " " << a.alpha_rate;
      break;
    case AlphaOverrideKind::kRational:
      os << "rational " << a.alpha_coeff << " " << a.alpha_rate;
      break;
  }
  os << "\n";
  os << "moment_p =";
  for (double v : a.moment_p) os << " " << v;
  os << "\n";
  os << "pair = " << a.pair_holder << " " << a.pair_subject << "\n"
     << "convergence_tol = " << a.convergence_tol << "\n"
     << "error_decay_ratio = " << a.error_decay_ratio << "\n"
     << "trace_stride = " << a.trace_stride << "\n"
     << "selftest_moments = " << (a.selftest_moments ? "true" : "false") << "\n";
  return os.str();
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  // Schedule keys can arrive in any order; assembled at the end.
  std::string sched_kind = "power";
  double sched_a0 = 1.0, sched_gamma = 1.0, sched_value = 0.0;
  bool saw_agents = false, saw_horizon = false;

  ParseCursor cur{&origin, 0};
  std::istringstream is(text);
  std::string raw;
  std::string section;
  while (std::getline(is, raw)) {
    ++cur.line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') cur.fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "scenario" && section != "network" && section != "objective" &&
          section != "schedule" && section != "analysis") {
        cur.fail("unknown section '" + section + "'");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) cur.fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) cur.fail("empty key");
    if (section.empty()) cur.fail("key '" + key + "' appears before any section header");

    if (section == "scenario") {
      if (key == "name") cfg.name = one_token(cur, key, value);
      else if (key == "seed") cfg.seed = to_u64(cur, key, one_token(cur, key, value));
      else if (key == "replications") cfg.replications = to_u64(cur, key, one_token(cur, key, value));
      else if (key == "horizon") { cfg.horizon = to_u64(cur, key, one_token(cur, key, value)); saw_horizon = true; }
      else if (key == "burn_in") cfg.burn_in = to_u64(cur, key, one_token(cur, key, value));
      else cur.fail("unknown key '" + key + "' in [scenario]");
    } else if (section == "network") {
      if (key == "agents") { cfg.network.num_agents = to_int(cur, key, one_token(cur, key, value)); saw_agents = true; }
      else if (key == "channel") cfg.network.channels.push_back(parse_channel(cur, value));
      else cur.fail("unknown key '" + key + "' in [network]");
    } else if (section == "objective") {
      if (key == "kind") {
        const std::string k = one_token(cur, key, value);
        if (k == "none") cfg.objective.kind = ObjectiveKind::kNone;
        else if (k == "quadratic") cfg.objective.kind = ObjectiveKind::kQuadratic;
        else if (k == "least_squares") cfg.objective.kind = ObjectiveKind::kLeastSquares;
        else cur.fail("unknown objective kind '" + k + "'");
      } else if (key == "target") {
        cfg.objective.target.clear();
        for (const auto& t : split_ws(value)) cfg.objective.target.push_back(to_double(cur, key, t));
      } else if (key == "dims") {
        cfg.objective.dims.clear();
        for (const auto& t : split_ws(value)) cfg.objective.dims.push_back(to_int(cur, key, t));
      } else if (key == "noise_sigma") cfg.objective.noise_sigma = to_double(cur, key, one_token(cur, key, value));
      else if (key == "lambda") cfg.objective.lambda = to_double(cur, key, one_token(cur, key, value));
      else if (key == "rows") cfg.objective.rows = to_int(cur, key, one_token(cur, key, value));
      else if (key == "data_seed") cfg.objective.data_seed = to_u64(cur, key, one_token(cur, key, value));
      else cur.fail("unknown key '" + key + "' in [objective]");
    } else if (section == "schedule") {
      if (key == "kind") {
        sched_kind = one_token(cur, key, value);
        if (sched_kind != "power" && sched_kind != "constant") {
          cur.fail("unknown schedule kind '" + sched_kind + "'");
        }
      } else if (key == "a0") sched_a0 = to_double(cur, key, one_token(cur, key, value));
      else if (key == "gamma") sched_gamma = to_double(cur, key, one_token(cur, key, value));
      else if (key == "value") sched_value = to_double(cur, key, one_token(cur, key, value));
      else cur.fail("unknown key '" + key + "' in [schedule]");
    } else {  // analysis
      auto& a = cfg.analysis;
      if (key == "ssc_epsilon") a.ssc_epsilon = to_double(cur, key, one_token(cur, key, value));
      else if (key == "ssc_kappa") a.ssc_kappa = to_u64(cur, key, one_token(cur, key, value));
      else if (key == "mixing_lags") a.mixing_lags = to_int(cur, key, one_token(cur, key, value));
      else if (key == "mixing_dim") a.mixing_dim = to_int(cur, key, one_token(cur, key, value));
      else if (key == "mixing_p") a.mixing_p = to_double(cur, key, one_token(cur, key, value));
      else if (key == "mixing_eta") a.mixing_eta = to_u64(cur, key, one_token(cur, key, value));
      else if (key == "mixing_channel") a.mixing_channel = to_int(cur, key, one_token(cur, key, value));
      else if (key == "tail_m_max") a.tail_m_max = to_u64(cur, key, one_token(cur, key, value));
      else if (key == "bound_grid") a.bound_grid = to_u64(cur, key, one_token(cur, key, value));
      else if (key == "dominance_m_max") a.dominance_m_max = to_u64(cur, key, one_token(cur, key, value));
      else if (key == "sigma_mult") a.sigma_mult = to_double(cur, key, one_token(cur, key, value));
      else if (key == "growth_epsilon") a.growth_epsilon = to_double(cur, key, one_token(cur, key, value));
      else if (key == "growth_p") a.growth_p = to_double(cur, key, one_token(cur, key, value));
      else if (key == "candidate") {
        const auto toks = split_ws(value);
        if (toks.empty()) cur.fail("candidate: expected none, constructed, or geometric C RHO");
        if (toks[0] == "none" && toks.size() == 1) a.candidate = CandidateKind::kNone;
        else if (toks[0] == "constructed" && toks.size() == 1) a.candidate = CandidateKind::kConstructed;
        else if (toks[0] == "geometric" && toks.size() == 3) {
          a.candidate = CandidateKind::kGeometric;
          a.candidate_coeff = to_double(cur, key, toks[1]);
          a.candidate_rate = to_double(cur, key, toks[2]);
        } else cur.fail("candidate: expected none, constructed, or geometric C RHO");
      } else if (key == "alpha_override") {
        const auto toks = split_ws(value);
        if (toks.empty()) cur.fail("alpha_override: expected none, geometric C RHO, or rational C MU");
        if (toks[0] == "none" && toks.size() == 1) a.alpha_override = AlphaOverrideKind::kNone;
        else if (toks[0] == "geometric" && toks.size() == 3) {
          a.alpha_override = AlphaOverrideKind::kGeometric;
          a.alpha_coeff = to_double(cur, key, toks[1]);
          a.alpha_rate = to_double(cur, key, toks[2]);
        } else if (toks[0] == "rational" && toks.size() == 3) {
          a.alpha_override = AlphaOverrideKind::kRational;
          a.alpha_coeff = to_double(cur, key, toks[1]);
          a.alpha_rate = to_double(cur, key, toks[2]);
        } else cur.fail("alpha_override: expected none, geometric C RHO, or rational C MU");
      } else if (key == "moment_p") {
        a.moment_p.clear();
        for (const auto& t : split_ws(value)) a.moment_p.push_back(to_double(cur, key, t));
      } else if (key == "pair") {
        const auto toks = split_ws(value);
        if (toks.size() != 2) cur.fail("pair: expected 'HOLDER SUBJECT'");
        a.pair_holder = to_int(cur, key, toks[0]);
        a.pair_subject = to_int(cur, key, toks[1]);
      } else if (key == "convergence_tol") a.convergence_tol = to_double(cur, key, one_token(cur, key, value));
      else if (key == "error_decay_ratio") a.error_decay_ratio = to_double(cur, key, one_token(cur, key, value));
      else if (key == "trace_stride") a.trace_stride = to_u64(cur, key, one_token(cur, key, value));
      else if (key == "selftest_moments") a.selftest_moments = to_bool(cur, key, one_token(cur, key, value));
      else cur.fail("unknown key '" + key + "' in [analysis]");
    }
  }

  cur.line = 0;
  if (cfg.name.empty()) cur.fail("[scenario] name is required");
  if (!saw_horizon) cur.fail("[scenario] horizon is required");
  if (!saw_agents) cur.fail("[network] agents is required");

  if (sched_kind == "power") cfg.schedule = StepSchedule::power(sched_a0, sched_gamma);
  else cfg.schedule = StepSchedule::constant(sched_value);

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::unique_ptr<Objective> make_objective(const ExperimentConfig& config) {
  const auto& o = config.objective;
  if (o.kind == ObjectiveKind::kNone) return nullptr;
  std::vector<int> dims = o.dims;
  if (dims.empty()) dims.assign(config.network.num_agents, 1);
  if (o.kind == ObjectiveKind::kQuadratic) {
    return std::make_unique<NoisyQuadratic>(o.target, dims, o.noise_sigma);
  }
  return std::make_unique<LeastSquares>(dims, o.rows, o.data_seed);
}

}  // namespace aoilab
