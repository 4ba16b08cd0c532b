#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "aoilab/channels.hpp"
#include "aoilab/sgd.hpp"

namespace aoilab {

enum class ObjectiveKind { kNone, kQuadratic, kLeastSquares };

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::kNone;
  std::vector<double> target;  // quadratic center
  std::vector<int> dims;       // block size per agent; empty means all ones
  double noise_sigma = 0.0;
  double lambda = 0.0;
  int rows = 0;  // least-squares row count
  std::uint64_t data_seed = 1;
};

enum class CandidateKind { kNone, kConstructed, kGeometric };
enum class AlphaOverrideKind { kNone, kGeometric, kRational };

// Which analyses run and with what knobs. A zero / kNone value means the
// corresponding analysis is skipped.
struct AnalysisConfig {
  double ssc_epsilon = 0.0;
  std::uint64_t ssc_kappa = 0;

  int mixing_lags = 0;
  int mixing_dim = 1;
  double mixing_p = 1.0;
  std::uint64_t mixing_eta = 0;
  int mixing_channel = 0;

  std::uint64_t tail_m_max = 100;
  std::uint64_t bound_grid = 131072;
  std::uint64_t dominance_m_max = 100;
  double sigma_mult = 3.0;

  double growth_epsilon = 0.0;
  double growth_p = 1.0;

  CandidateKind candidate = CandidateKind::kNone;
  double candidate_coeff = 0.0;
  double candidate_rate = 0.0;

  AlphaOverrideKind alpha_override = AlphaOverrideKind::kNone;
  double alpha_coeff = 0.0;
  double alpha_rate = 0.0;  // geometric rate or rational exponent

  std::vector<double> moment_p;

  int pair_holder = -1;  // tail / growth target pair; -1 means none
  int pair_subject = -1;

  double convergence_tol = 1e-2;
  double error_decay_ratio = 0.1;
  std::uint64_t trace_stride = 1000;
  bool selftest_moments = false;
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 1;
  std::uint64_t replications = 1;
  std::uint64_t horizon = 0;
  std::uint64_t burn_in = 0;

  NetworkSpec network;
  ObjectiveConfig objective;
  StepSchedule schedule = StepSchedule::power(1.0, 1.0);
  AnalysisConfig analysis;

  void validate() const;  // throws std::invalid_argument naming the field
  // Canonical re-emission with every default explicit; re-parsing it yields
  // the same configuration.
  std::string echo() const;
};

// Parses the plain-text configuration grammar (see README). Errors carry the
// origin name and 1-based line number of the offending entry.
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
ExperimentConfig load_config(const std::string& path);

// Instantiates the configured objective; null for ObjectiveKind::kNone.
std::unique_ptr<Objective> make_objective(const ExperimentConfig& config);

}  // namespace aoilab
