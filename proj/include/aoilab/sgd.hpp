#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aoilab/aoi.hpp"
#include "aoilab/channels.hpp"
#include "aoilab/rng.hpp"

namespace aoilab {

// An objective split across agents: agent i owns a contiguous coordinate
// block. The noise realization xi is drawn once per slot and shared by every
// agent in that slot.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual int num_agents() const = 0;
  virtual int block_size(int agent) const = 0;

  // One shared noise realization for the slot.
  virtual std::vector<double> draw_noise(const RngKey& key, std::uint64_t slot) const = 0;

  // Stochastic block gradient grad_i(x, xi); out spans block_size(agent).
  virtual void stochastic_grad(int agent, const std::vector<double>& x,
                               const std::vector<double>& xi, std::span<double> out) const = 0;

  // Exact full gradient of F, for instrumentation.
  virtual std::vector<double> exact_grad(const std::vector<double>& x) const = 0;

  virtual std::optional<std::vector<double>> optimum() const = 0;
  virtual double grad_lipschitz() const = 0;

  int total_dim() const;
  int block_offset(int agent) const;
};

// F(x) = 1/2 ||x - target||^2; the stochastic gradient adds sigma times a
// standard Gaussian perturbation, one independent component per coordinate,
// drawn from the shared slot realization.
class NoisyQuadratic : public Objective {
 public:
  NoisyQuadratic(std::vector<double> target, std::vector<int> blocks, double sigma);

  int num_agents() const override { return static_cast<int>(blocks_.size()); }
  int block_size(int agent) const override { return blocks_[agent]; }
  std::vector<double> draw_noise(const RngKey& key, std::uint64_t slot) const override;
  void stochastic_grad(int agent, const std::vector<double>& x, const std::vector<double>& xi,
                       std::span<double> out) const override;
  std::vector<double> exact_grad(const std::vector<double>& x) const override;
  std::optional<std::vector<double>> optimum() const override { return target_; }
  double grad_lipschitz() const override { return 1.0; }

 private:
  std::vector<double> target_;
  std::vector<int> blocks_;
  double sigma_;
};

// F(x) = 1/(2R) ||A x - b||^2 over a synthetic row set generated from
// data_seed; the slot noise selects one data row uniformly.
class LeastSquares : public Objective {
 public:
  LeastSquares(std::vector<int> blocks, int rows, std::uint64_t data_seed);

  int num_agents() const override { return static_cast<int>(blocks_.size()); }
  int block_size(int agent) const override { return blocks_[agent]; }
  std::vector<double> draw_noise(const RngKey& key, std::uint64_t slot) const override;
  void stochastic_grad(int agent, const std::vector<double>& x, const std::vector<double>& xi,
                       std::span<double> out) const override;
  std::vector<double> exact_grad(const std::vector<double>& x) const override;
  std::optional<std::vector<double>> optimum() const override { return optimum_; }
  double grad_lipschitz() const override { return lipschitz_; }

 private:
  std::vector<int> blocks_;
  std::vector<std::vector<double>> rows_;
  std::vector<double> rhs_;
  std::vector<double> optimum_;
  double lipschitz_ = 0.0;
};

struct StepSchedule {
  enum class Kind { kPower, kConstant };
  Kind kind = Kind::kPower;
  double a0 = 1.0;
  double gamma = 1.0;
  double value = 0.0;

  double at(std::uint64_t n) const;
  static StepSchedule power(double a0, double gamma);  // a(n) = a0 (n+1)^-gamma
  static StepSchedule constant(double value);
};

struct StepSizeReport {
  bool not_summable = false;     // sum a(n) diverges
  bool square_summable = false;  // sum a(n)^2 converges
  bool big_o_matches = false;    // a(n) in O(n^{-1/p})
};

StepSizeReport step_size_check(const StepSchedule& schedule, double p);

struct RunTrace {
  std::uint64_t horizon = 0;
  std::vector<std::vector<double>> x;           // x[n], n = 0..horizon
  std::vector<std::vector<double>> grad_error;  // [n][agent], n = 0..horizon-1
  std::vector<double> dist_to_opt;              // per n; empty when x* unknown
  EventLog events;
  double sup_norm = 0.0;
};

struct SgdRunConfig {
  StepSchedule schedule;
  NetworkSpec network;
  double lambda = 0.0;  // additive gradient error amplitude, uniform [-lambda, lambda]
  std::uint64_t horizon = 0;
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;
  std::vector<double> x0;  // empty means the origin
};

RunTrace run_sgd(const Objective& objective, const SgdRunConfig& config);

// ||gradF(belief at time n assembled from stamps) - gradF(x^n)||, where
// stamps[j] is the slot index of the x_j block the agent holds at time n.
double gradient_error(const Objective& objective, std::span<const std::vector<double>> history,
                      const std::vector<std::uint64_t>& stamps, std::uint64_t n);

// Pathwise check that ages outgrow epsilon * n^{1/p} only finitely often.
struct GrowthReport {
  std::vector<std::int64_t> last_violation;  // per replication; -1 when none
  std::vector<double> partial_sums;          // cumulative P-hat(age > eps n^{1/p})
  bool converged = false;                    // no violation in the final 10% of slots
};

GrowthReport empirical_growth_check(const std::vector<std::vector<std::uint64_t>>& age_traces,
                                    double p, double epsilon);

}  // namespace aoilab
