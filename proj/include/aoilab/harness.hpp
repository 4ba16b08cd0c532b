#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aoilab/config.hpp"

namespace aoilab {

struct Verdict {
  std::string name;
  bool pass = false;
  double value = 0.0;
  std::string detail;
  std::string source;  // CSV file backing the verdict
};

struct ReportBundle {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<std::string> csv_paths;
  std::vector<Verdict> verdicts;
  std::string config_echo;
  double wall_seconds = 0.0;

  bool all_pass() const;
  const Verdict* find(const std::string& name) const;  // null when absent
};

// Which slice of the pipeline a CLI subcommand runs. kReport runs everything
// the configuration asks for.
enum class RunMode { kSimulate, kAnalyzeAoi, kAnalyzeMixing, kCertifySsc, kSgdRun, kReport };

// Executes the scenario: R replications on a worker pool (capped by
// AOI_LAB_THREADS), deterministic rep-ordered reduction, CSV emission into
// out_dir. Rerunning the same config and seed rewrites byte-identical CSVs.
ReportBundle run_scenario(const ExperimentConfig& config, const std::string& out_dir,
                          RunMode mode = RunMode::kReport);

int worker_count(std::uint64_t replications);

}  // namespace aoilab
