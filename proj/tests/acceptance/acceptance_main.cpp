// Acceptance gate for the shipped scenario set. Each numbered gate re-runs
// one scenario through the library, recomputes the headline quantities from
// the emitted CSVs where they are cheap to recompute, and prints exactly one
// [PASS]/[FAIL] line. The process exits nonzero if any gate fails.

#include <sys/wait.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "aoilab/config.hpp"
#include "aoilab/harness.hpp"

using namespace aoilab;
namespace fs = std::filesystem;

namespace {

struct Args {
  fs::path cli;
  fs::path scenarios;
  fs::path out;
};

Args parse_args(int argc, char** argv) {
  Args a;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--cli") {
      a.cli = argv[i + 1];
    } else if (flag == "--scenarios") {
      a.scenarios = argv[i + 1];
    } else if (flag == "--out") {
      a.out = argv[i + 1];
    } else {
      std::fprintf(stderr, "unknown flag: %s\n", flag.c_str());
      std::exit(2);
    }
  }
  if (a.cli.empty() || a.scenarios.empty() || a.out.empty()) {
    std::fprintf(stderr, "usage: aoilab_acceptance --cli BIN --scenarios DIR --out DIR\n");
    std::exit(2);
  }
  return a;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// One acceptance gate: a label, a pass flag, and notes explaining failures.
struct Gate {
  std::string label;
  std::string summary;
  bool pass = true;
  std::vector<std::string> notes;

  explicit Gate(std::string l) : label(std::move(l)) {}

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back(what);
    }
  }
};

// Requires the named verdict to exist and pass; returns it (or null).
const Verdict* expect_verdict(Gate& g, const ReportBundle& b, const std::string& name) {
  const Verdict* v = b.find(name);
  if (v == nullptr) {
    g.expect(false, "verdict missing: " + name);
    return nullptr;
  }
  g.expect(v->pass, "verdict failed: " + name + " value=" + fmt(v->value) + " " + v->detail);
  return v;
}

// Requires the named verdict to exist and FAIL (negative controls).
const Verdict* expect_failed_verdict(Gate& g, const ReportBundle& b, const std::string& name) {
  const Verdict* v = b.find(name);
  if (v == nullptr) {
    g.expect(false, "verdict missing: " + name);
    return nullptr;
  }
  g.expect(!v->pass, "verdict unexpectedly passed: " + name);
  return v;
}

// ------------------------------ csv access ------------------------------

struct TailTable {
  // (pair tag, kind) -> tail values indexed by m, plus the sample count.
  std::map<std::pair<std::string, std::string>, std::vector<double>> curve;
  std::map<std::pair<std::string, std::string>, double> samples;

  const std::vector<double>* at(const std::string& pair, const std::string& kind) const {
    const auto it = curve.find({pair, kind});
    return it == curve.end() ? nullptr : &it->second;
  }
  double count(const std::string& pair, const std::string& kind) const {
    const auto it = samples.find({pair, kind});
    return it == samples.end() ? 0.0 : it->second;
  }
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

TailTable read_aoi_tail(Gate& g, const fs::path& path) {
  TailTable t;
  std::ifstream in(path);
  if (!in.good()) {
    g.expect(false, "cannot open " + path.string());
    return t;
  }
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto cells = split_csv(line);
    if (cells.size() != 5) continue;
    const std::pair<std::string, std::string> key{cells[0], cells[1]};
    auto& curve = t.curve[key];
    const std::size_t m = std::stoull(cells[2]);
    if (curve.size() <= m) curve.resize(m + 1, 0.0);
    curve[m] = std::stod(cells[3]);
    t.samples[key] = std::stod(cells[4]);
  }
  return t;
}

// Empirical tail within sigma_mult binomial deviations of the analytic rate^m.
void check_tail_close(Gate& g, const TailTable& t, const std::string& pair, double rate,
                      std::uint64_t m_max, double sigma_mult) {
  const std::vector<double>* emp = t.at(pair, "emp_direct");
  if (emp == nullptr) {
    g.expect(false, "no emp_direct curve for pair " + pair);
    return;
  }
  const double n = t.count(pair, "emp_direct");
  g.expect(n > 0.0, "no samples for pair " + pair);
  double worst_z = 0.0;
  for (std::uint64_t m = 0; m <= m_max && m < emp->size(); ++m) {
    const double p = std::pow(rate, static_cast<double>(m));
    const double sigma = std::sqrt(p * (1.0 - p) / n);
    const double diff = std::abs((*emp)[m] - p);
    if (sigma == 0.0) {
      g.expect(diff == 0.0, pair + " m=" + std::to_string(m) + ": expected exact value");
      continue;
    }
    worst_z = std::max(worst_z, diff / sigma);
    g.expect(diff <= sigma_mult * sigma + 1e-15,
             pair + " m=" + std::to_string(m) + ": |emp-analytic| = " + fmt(diff) + " > " +
                 fmt(sigma_mult) + " sigma = " + fmt(sigma_mult * sigma));
  }
  g.summary += " worst_z(" + pair + ")=" + fmt(worst_z);
}

// Bound curve dominates the empirical curve with sigma_mult slack at each m.
void check_dominates_csv(Gate& g, const TailTable& t, const std::string& emp_pair,
                         const std::string& emp_kind, const std::string& bound_pair,
                         const std::string& bound_kind, std::uint64_t m_max, double sigma_mult) {
  const std::vector<double>* emp = t.at(emp_pair, emp_kind);
  const std::vector<double>* bound = t.at(bound_pair, bound_kind);
  if (emp == nullptr || bound == nullptr) {
    g.expect(false, "missing curve " + emp_pair + "/" + emp_kind + " or " + bound_pair + "/" +
                        bound_kind);
    return;
  }
  const double n = t.count(emp_pair, emp_kind);
  for (std::uint64_t m = 0; m <= m_max; ++m) {
    const double e = m < emp->size() ? (*emp)[m] : 0.0;
    const double b = m < bound->size() ? bound->back() : 0.0;
    const double bv = m < bound->size() ? (*bound)[m] : b;
    const double sigma = n > 0.0 ? std::sqrt(e * (1.0 - e) / n) : 0.0;
    g.expect(bv + sigma_mult * sigma - e >= -1e-15,
             bound_kind + " " + bound_pair + " vs " + emp_pair + " m=" + std::to_string(m) +
                 ": bound " + fmt(bv) + " + slack < emp " + fmt(e));
  }
}

// ------------------------------ process spawns ------------------------------

int spawn(const std::string& command) {
  const int status = std::system(command.c_str());
  if (status == -1) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli_run(const Args& args, const std::string& subcommand, const std::string& scenario,
            const std::string& tag, std::string* stdout_text = nullptr) {
  const fs::path log = args.out / (tag + ".log");
  std::string cmd = quoted(args.cli) + " " + subcommand;
  if (!scenario.empty()) {
    cmd += " --config " + quoted(args.scenarios / scenario);
    cmd += " --out " + quoted(args.out / tag);
  }
  cmd += " > " + quoted(log) + " 2>&1";
  const int code = spawn(cmd);
  if (stdout_text != nullptr) *stdout_text = slurp(log);
  return code;
}

// ------------------------------ scenario runs ------------------------------

ExperimentConfig load_scenario(const Args& args, const std::string& name) {
  ExperimentConfig cfg = load_config((args.scenarios / name).string());
  cfg.validate();
  return cfg;
}

ReportBundle run_bundle(const Args& args, const std::string& config_name,
                        const std::string& out_tag) {
  const ExperimentConfig cfg = load_scenario(args, config_name);
  return run_scenario(cfg, (args.out / out_tag).string(), RunMode::kReport);
}

double parse_last_violation(const std::string& detail) {
  const std::string key = "last_violation=";
  const auto pos = detail.find(key);
  if (pos == std::string::npos) return -2.0;
  return std::stod(detail.substr(pos + key.size()));
}

}  // namespace

int main(int argc, char** argv) {
  const Args args = parse_args(argc, argv);
  fs::create_directories(args.out);
  std::vector<Gate> gates;

  // Gate 1: symmetric memoryless pair. The measured direct-age tail matches
  // the analytic 0.5^m rate within 3 binomial deviations through m = 10, and
  // the constructed per-channel bound dominates it with 3 sigma slack
  // through m = 100.
  ReportBundle c1;
  {
    Gate g{"criterion 1: iid pair tail matches 0.5^m and constructed bound dominates"};
    c1 = run_bundle(args, "c1_iid_pair.cfg", "c1_iid_pair");
    const TailTable t = read_aoi_tail(g, args.out / "c1_iid_pair" / "aoi_tail.csv");
    for (const std::string pair : {"0->1", "1->0"}) {
      check_tail_close(g, t, pair, 0.5, 10, 3.0);
      check_dominates_csv(g, t, pair, "emp_direct", pair, "bound_direct", 100, 3.0);
    }
    expect_verdict(g, c1, "dominance_direct_0_1");
    expect_verdict(g, c1, "dominance_direct_1_0");
    expect_verdict(g, c1, "dominance_holds");
    g.expect(c1.all_pass(), "scenario reported a failing verdict");
    g.expect(c1.wall_seconds < 30.0, "runtime " + fmt(c1.wall_seconds) + "s over the 30s target");
    g.summary += " wall=" + fmt(c1.wall_seconds) + "s";
    gates.push_back(std::move(g));
  }

  // Determinism invariant: identical configuration and seed produce
  // byte-identical CSV output on a fresh run.
  {
    Gate g{"invariant: rerun with the same seed is byte-identical"};
    run_bundle(args, "c1_iid_pair.cfg", "c1_rerun");
    for (const char* leaf : {"aoi_tail.csv", "verdicts.csv"}) {
      const std::string a = slurp(args.out / "c1_iid_pair" / leaf);
      const std::string b = slurp(args.out / "c1_rerun" / leaf);
      g.expect(!a.empty() && a == b, std::string(leaf) + " differs between identical runs");
    }
    gates.push_back(std::move(g));
  }

  // Gate 2: ring of two-state bursty channels, quadratic objective with known
  // optimum. Median final distance below 1e-2 and the mean gradient-error
  // norm over the last tenth of the run below a tenth of the first tenth.
  ReportBundle c2;
  {
    Gate g{"criterion 2: convergence on the bursty ring"};
    c2 = run_bundle(args, "c2_ring_ge.cfg", "c2_ring_ge");
    const Verdict* conv = expect_verdict(g, c2, "sgd_converged");
    if (conv != nullptr) {
      g.expect(conv->value < 1e-2, "median final distance " + fmt(conv->value) + " >= 1e-2");
      g.summary += " median=" + fmt(conv->value);
    }
    const Verdict* decay = expect_verdict(g, c2, "sgd_error_decay");
    if (decay != nullptr) {
      g.expect(decay->value < 0.1, "decay ratio " + fmt(decay->value) + " >= 0.1");
      g.summary += " decay=" + fmt(decay->value);
    }
    expect_verdict(g, c2, "step_schedule_valid");
    g.expect(c2.all_pass(), "scenario reported a failing verdict");
    g.expect(c2.wall_seconds < 120.0, "runtime " + fmt(c2.wall_seconds) + "s over the 2min target");
    g.summary += " wall=" + fmt(c2.wall_seconds) + "s";
    gates.push_back(std::move(g));
  }

  // Gate 3: same run with a bounded per-slot gradient perturbation of level
  // 0.05. Final distance stays within 0.05 + 1e-2 and is strictly worse than
  // the unperturbed run.
  {
    Gate g{"criterion 3: bounded-error run lands in the 0.05 neighbourhood"};
    const ReportBundle c3 = run_bundle(args, "c3_ring_ge_lambda.cfg", "c3_ring_ge_lambda");
    const Verdict* conv = expect_verdict(g, c3, "sgd_converged");
    const Verdict* base = c2.find("sgd_converged");
    if (conv != nullptr && base != nullptr) {
      g.expect(conv->value <= 0.05 + 1e-2,
               "median final distance " + fmt(conv->value) + " above 0.05 + 1e-2");
      g.expect(conv->value > base->value,
               "perturbed median " + fmt(conv->value) + " not worse than unperturbed " +
                   fmt(base->value));
      g.summary += " median=" + fmt(conv->value) + " vs " + fmt(base->value);
    }
    g.expect(c3.all_pass(), "scenario reported a failing verdict");
    gates.push_back(std::move(g));
  }

  // Gate 4: one-directional chain. The composed two-hop bound dominates the
  // measured flooded age of agent 0's variable at agent 2 through m = 60, and
  // the union bound dominates every reachable pair.
  {
    Gate g{"criterion 4: composed and union bounds dominate the chain tails"};
    const ReportBundle c4 = run_bundle(args, "c4_chain_iid.cfg", "c4_chain_iid");
    const TailTable t = read_aoi_tail(g, args.out / "c4_chain_iid" / "aoi_tail.csv");
    check_dominates_csv(g, t, "0->2", "emp_flood", "0->2", "bound_flood", 60, 3.0);
    for (const std::string pair : {"0->1", "0->2", "1->2"}) {
      check_dominates_csv(g, t, pair, "emp_flood", "union", "bound_union", 60, 3.0);
    }
    expect_verdict(g, c4, "dominance_flood_0_2");
    expect_verdict(g, c4, "dominance_union");
    g.expect(c4.all_pass(), "scenario reported a failing verdict");
    gates.push_back(std::move(g));
  }

  // Gate 5: p-th moments of 50 random finite-support tails agree with the
  // direct probability-mass sums to relative error 1e-12.
  {
    Gate g{"criterion 5: moment identity on random finite tails"};
    const ReportBundle c5 = run_bundle(args, "c5_moment_identity.cfg", "c5_moment_identity");
    const Verdict* v = expect_verdict(g, c5, "moment_identity");
    if (v != nullptr) {
      g.expect(v->value <= 1e-12, "worst relative error " + fmt(v->value) + " > 1e-12");
      g.summary += " worst_rel=" + fmt(v->value);
    }
    g.expect(c5.all_pass(), "scenario reported a failing verdict");
    gates.push_back(std::move(g));
  }

  // Gate 6: dependence pipeline on the bursty ring. Envelope above the exact
  // dependence at lags 1..6, estimates close to exact, refined tail bound
  // summable with vanishing moment increments, and dominating the measured
  // direct tail.
  {
    Gate g{"criterion 6: dependence envelope, estimates and refined tail bound"};
    const ReportBundle c6 = run_bundle(args, "c6_ge_mixing.cfg", "c6_ge_mixing");
    expect_verdict(g, c6, "alpha_envelope_valid");
    expect_verdict(g, c6, "alpha_estimate_close");
    expect_verdict(g, c6, "mixing_summable");
    expect_verdict(g, c6, "mixing_moment_finite");
    const Verdict* inc = expect_verdict(g, c6, "mixing_increment_small");
    if (inc != nullptr) {
      g.expect(inc->value < 1e-9, "moment increment " + fmt(inc->value) + " >= 1e-9 at m=1e5");
      g.summary += " increment=" + fmt(inc->value);
    }
    expect_verdict(g, c6, "mixing_tail_dominates");
    g.expect(c6.all_pass(), "scenario reported a failing verdict");
    gates.push_back(std::move(g));
  }

  // Gate 7: negative controls. A 1/lag dependence profile is flagged as not
  // summable, a never-connected pair fails the growth check at the end of the
  // horizon, and an undersized candidate tail fails dominance; each scenario
  // exits with status 1 through the command line.
  {
    Gate g{"criterion 7: negative controls fail loudly"};

    const ReportBundle divergent = run_bundle(args, "c7_divergent.cfg", "c7_divergent");
    const Verdict* summ = expect_failed_verdict(g, divergent, "mixing_summable");
    if (summ != nullptr) {
      g.expect(summ->detail.find("divergent") != std::string::npos,
               "summability verdict detail lacks 'divergent': " + summ->detail);
    }
    g.expect(!divergent.all_pass(), "divergent-profile scenario unexpectedly passed");

    const ReportBundle disconnected = run_bundle(args, "c7_disconnected.cfg", "c7_disconnected");
    const Verdict* growth = expect_failed_verdict(g, disconnected, "growth_converged");
    if (growth != nullptr) {
      const double last = parse_last_violation(growth->detail);
      const ExperimentConfig cfg = load_scenario(args, "c7_disconnected.cfg");
      g.expect(last == static_cast<double>(cfg.horizon - 1),
               "growth violation expected at the last slot, detail: " + growth->detail);
    }

    const ReportBundle undersized = run_bundle(args, "c7_undersized.cfg", "c7_undersized");
    expect_failed_verdict(g, undersized, "dominance_direct_0_1");
    expect_failed_verdict(g, undersized, "dominance_holds");

    for (const std::string name : {"c7_divergent", "c7_disconnected", "c7_undersized"}) {
      const int code = cli_run(args, "report", name + ".cfg", "cli_" + name);
      g.expect(code == 1, name + " exit code " + std::to_string(code) + ", expected 1");
    }
    gates.push_back(std::move(g));
  }

  // Gate 8: deterministic periodic exchange. The window certificate holds at
  // a level arbitrarily close to one, the windowed indicator carries no
  // measurable dependence, and the requested moments are all finite.
  {
    Gate g{"criterion 8: periodic channels certify and carry no dependence"};
    const ReportBundle c8 = run_bundle(args, "c8_periodic.cfg", "c8_periodic");
    const Verdict* ssc = expect_verdict(g, c8, "ssc_holds");
    if (ssc != nullptr) {
      g.expect(ssc->value == 1.0, "window success " + fmt(ssc->value) + " below 1");
    }
    expect_verdict(g, c8, "window_exceedance_0_1");
    expect_verdict(g, c8, "window_exceedance_1_0");

    // Windowed indicator dependence estimates are exactly zero on a
    // deterministic schedule; 1e-12 is the noise floor for the estimator.
    std::ifstream in(args.out / "c8_periodic" / "mixing_profile.csv");
    g.expect(in.good(), "cannot open mixing_profile.csv");
    std::string line;
    std::getline(in, line);
    int rows = 0;
    double worst = 0.0;
    while (std::getline(in, line)) {
      const auto cells = split_csv(line);
      if (cells.size() < 3) continue;
      const double est = std::stod(cells[2]);
      if (est < 0.0) continue;  // lag beyond the estimated range
      ++rows;
      worst = std::max(worst, est);
      g.expect(est <= 1e-12, "lag " + cells[0] + " estimate " + fmt(est) + " above noise floor");
    }
    g.expect(rows >= 4, "expected estimates at four lags");
    g.summary += " worst_alpha_hat=" + fmt(worst);

    for (const char* name : {"moment_finite_p1", "moment_finite_p2", "moment_finite_p4"}) {
      const Verdict* v = expect_verdict(g, c8, name);
      if (v != nullptr) g.expect(std::isfinite(v->value), std::string(name) + " not finite");
    }
    g.expect(c8.all_pass(), "scenario reported a failing verdict");
    gates.push_back(std::move(g));
  }

  // Command-line contract: certificate output and exit codes.
  {
    Gate g{"interface: certificate printout and exit codes"};
    std::string text;
    const int ring = cli_run(args, "certify-ssc", "ring.cfg", "cli_ring", &text);
    g.expect(ring == 0, "certify-ssc exit code " + std::to_string(ring) + ", expected 0");
    g.expect(text.find("0.875") != std::string::npos,
             "certify-ssc output lacks the 0.875 window probability");

    const int missing = cli_run(args, "report", "no_such_scenario.cfg", "cli_missing");
    g.expect(missing == 2, "missing config exit code " + std::to_string(missing) + ", expected 2");

    const int unknown = spawn(quoted(args.cli) + " frobnicate > " +
                              quoted(args.out / "cli_unknown.log") + " 2>&1");
    g.expect(unknown == 2, "unknown subcommand exit code " + std::to_string(unknown) +
                               ", expected 2");
    gates.push_back(std::move(g));
  }

  int failures = 0;
  for (const Gate& g : gates) {
    std::printf("[%s] %s%s\n", g.pass ? "PASS" : "FAIL", g.label.c_str(), g.summary.c_str());
    for (const std::string& note : g.notes) std::printf("    - %s\n", note.c_str());
    if (!g.pass) ++failures;
  }
  std::printf("acceptance: %zu/%zu gates pass\n", gates.size() - failures, gates.size());
  return failures == 0 ? 0 : 1;
}
