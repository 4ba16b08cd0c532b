#include "aoilab/sgd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace aoilab {
namespace {

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double l2_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

int Objective::total_dim() const {
  int d = 0;
  for (int i = 0; i < num_agents(); ++i) d += block_size(i);
  return d;
}

int Objective::block_offset(int agent) const {
  int off = 0;
  for (int i = 0; i < agent; ++i) off += block_size(i);
  return off;
}

NoisyQuadratic::NoisyQuadratic(std::vector<double> target, std::vector<int> blocks, double sigma)
    : target_(std::move(target)), blocks_(std::move(blocks)), sigma_(sigma) {
  if (blocks_.empty()) throw std::invalid_argument("quadratic objective: no agents");
  int total = 0;
  for (int b : blocks_) {
    if (b < 1) throw std::invalid_argument("quadratic objective: block sizes must be positive");
    total += b;
  }
  if (static_cast<int>(target_.size()) != total) {
    throw std::invalid_argument("quadratic objective: target length does not match the layout");
  }
  if (!(sigma_ >= 0.0)) throw std::invalid_argument("quadratic objective: sigma must be nonnegative");
}

std::vector<double> NoisyQuadratic::draw_noise(const RngKey& key, std::uint64_t slot) const {
  std::vector<double> xi(target_.size());
  for (std::size_t k = 0; k < xi.size(); ++k) xi[k] = key.gaussian(slot, k);
  return xi;
}

void NoisyQuadratic::stochastic_grad(int agent, const std::vector<double>& x,
                                     const std::vector<double>& xi, std::span<double> out) const {
  const int off = block_offset(agent);
  for (int j = 0; j < blocks_[agent]; ++j) {
    out[j] = x[off + j] - target_[off + j] + sigma_ * xi[off + j];
  }
}

std::vector<double> NoisyQuadratic::exact_grad(const std::vector<double>& x) const {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) g[k] = x[k] - target_[k];
  return g;
}

LeastSquares::LeastSquares(std::vector<int> blocks, int rows, std::uint64_t data_seed)
    : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw std::invalid_argument("least squares: no agents");
  int total = 0;
  for (int b : blocks_) {
    if (b < 1) throw std::invalid_argument("least squares: block sizes must be positive");
    total += b;
  }
  if (rows < total) throw std::invalid_argument("least squares: need at least as many rows as coordinates");

  const RngKey row_key{data_seed, 0, Stream::kInit, 777};
  const RngKey rhs_key{data_seed, 0, Stream::kInit, 778};
  rows_.assign(rows, std::vector<double>(total));
  rhs_.resize(rows);
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < total; ++j) rows_[r][j] = row_key.gaussian(r, j);
    rhs_[r] = rhs_key.gaussian(r, 0);
  }

  Eigen::MatrixXd a(rows, total);
  Eigen::VectorXd b(rows);
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < total; ++j) a(r, j) = rows_[r][j];
    b(r) = rhs_[r];
  }
  Eigen::VectorXd sol = a.colPivHouseholderQr().solve(b);
  optimum_.assign(sol.data(), sol.data() + total);
  Eigen::MatrixXd gram = a.transpose() * a / static_cast<double>(rows);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  lipschitz_ = es.eigenvalues().maxCoeff();
}

std::vector<double> LeastSquares::draw_noise(const RngKey& key, std::uint64_t slot) const {
  const double u = key.uniform01(slot, 0);
  auto idx = static_cast<double>(
      std::min<std::size_t>(static_cast<std::size_t>(u * static_cast<double>(rows_.size())),
                            rows_.size() - 1));
  return {idx};
}

void LeastSquares::stochastic_grad(int agent, const std::vector<double>& x,
                                   const std::vector<double>& xi, std::span<double> out) const {
  const auto r = static_cast<std::size_t>(xi.at(0));
  const std::vector<double>& row = rows_.at(r);
  double residual = -rhs_[r];
  for (std::size_t j = 0; j < x.size(); ++j) residual += row[j] * x[j];
  const int off = block_offset(agent);
  for (int j = 0; j < blocks_[agent]; ++j) out[j] = row[off + j] * residual;
}

std::vector<double> LeastSquares::exact_grad(const std::vector<double>& x) const {
  std::vector<double> g(x.size(), 0.0);
  const double inv_rows = 1.0 / static_cast<double>(rows_.size());
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    double residual = -rhs_[r];
    for (std::size_t j = 0; j < x.size(); ++j) residual += rows_[r][j] * x[j];
    for (std::size_t j = 0; j < x.size(); ++j) g[j] += rows_[r][j] * residual * inv_rows;
  }
  return g;
}

double StepSchedule::at(std::uint64_t n) const {
  if (kind == Kind::kConstant) return value;
  return a0 * std::pow(static_cast<double>(n + 1), -gamma);
}

StepSchedule StepSchedule::power(double a0, double gamma) {
  if (!(a0 > 0.0)) throw std::invalid_argument("step scale must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("step exponent must lie in (0, 1]");
  StepSchedule s;
  s.kind = Kind::kPower;
  s.a0 = a0;
  s.gamma = gamma;
  return s;
}

StepSchedule StepSchedule::constant(double value) {
  if (!(value > 0.0)) throw std::invalid_argument("constant step must be positive");
  StepSchedule s;
  s.kind = Kind::kConstant;
  s.value = value;
  return s;
}

StepSizeReport step_size_check(const StepSchedule& schedule, double p) {
  if (!(p >= 1.0 && p < 2.0)) throw std::invalid_argument("moment order p must lie in [1, 2)");
  if (schedule.kind == StepSchedule::Kind::kConstant) {
    // Constant steps diverge in sum, fail square-summability, and do not
    // decay at any polynomial rate.
    return {true, false, false};
  }
  StepSizeReport r;
  r.not_summable = schedule.gamma <= 1.0;
  r.square_summable = schedule.gamma > 0.5;
  r.big_o_matches = schedule.gamma + 1e-12 >= 1.0 / p;
  return r;
}

RunTrace run_sgd(const Objective& objective, const SgdRunConfig& config) {
  config.network.validate();
  const int d = objective.num_agents();
  if (config.network.num_agents != d) {
    throw std::invalid_argument("sgd run: network and objective disagree on the number of agents");
  }
  if (config.horizon < 1) throw std::invalid_argument("sgd run: horizon must be positive");
  const int total = objective.total_dim();
  std::vector<double> x0 = config.x0;
  if (x0.empty()) x0.assign(total, 0.0);
  if (static_cast<int>(x0.size()) != total) {
    throw std::invalid_argument("sgd run: initial point length does not match the layout");
  }

  const std::uint64_t t_max = config.horizon;
  RunTrace trace;
  trace.horizon = t_max;
  trace.events.num_agents = d;
  trace.x.reserve(t_max + 1);
  trace.x.push_back(std::move(x0));
  trace.grad_error.reserve(t_max);

  NetworkSampler sampler(config.network, config.seed, config.replication);
  TimestampMatrix ts(d);
  const RngKey xi_key{config.seed, config.replication, Stream::kXi, 0};
  const auto opt = objective.optimum();
  if (opt) trace.dist_to_opt.push_back(l2_dist(trace.x[0], *opt));
  trace.sup_norm = l2_norm(trace.x[0]);

  std::vector<std::uint64_t> stamps(d);
  for (std::uint64_t n = 0; n < t_max; ++n) {
    // Slot-n events deliver beliefs as of n-1; the slot-0 events carry the
    // shared initial state and change nothing.
    trace.events.slots.push_back(sampler.sample_slot(n));
    if (n >= 1) ts.flood_step(trace.events.slots.back(), n);

    const std::vector<double>& x_now = trace.x.back();
    std::vector<double> errors(d);
    std::vector<double> x_next = x_now;
    const std::vector<double> xi = objective.draw_noise(xi_key, n);
    const double a_n = config.schedule.at(n);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) stamps[j] = ts.stamp(i, j);
      errors[i] = gradient_error(objective, trace.x, stamps, n);

      std::vector<double> belief = x_now;
      for (int j = 0; j < d; ++j) {
        const std::vector<double>& src = trace.x[stamps[j]];
        const int off = objective.block_offset(j);
        for (int k = 0; k < objective.block_size(j); ++k) belief[off + k] = src[off + k];
      }
      const int off = objective.block_offset(i);
      const int width = objective.block_size(i);
      std::vector<double> g(width);
      objective.stochastic_grad(i, belief, xi, g);
      if (config.lambda > 0.0) {
        const RngKey lambda_key{config.seed, config.replication, Stream::kLambda,
                                static_cast<std::uint64_t>(i)};
        for (int k = 0; k < width; ++k) {
          g[k] += config.lambda * (2.0 * lambda_key.uniform01(n, k) - 1.0);
        }
      }
      for (int k = 0; k < width; ++k) {
        x_next[off + k] = x_now[off + k] - a_n * g[k];
        if (!std::isfinite(x_next[off + k])) {
          std::ostringstream os;
          os << "sgd run diverged: non-finite value at slot " << n << ", agent " << i;
          throw std::runtime_error(os.str());
        }
      }
    }
    trace.grad_error.push_back(std::move(errors));
    trace.x.push_back(std::move(x_next));
    if (opt) trace.dist_to_opt.push_back(l2_dist(trace.x.back(), *opt));
    trace.sup_norm = std::max(trace.sup_norm, l2_norm(trace.x.back()));
  }
  return trace;
}

double gradient_error(const Objective& objective, std::span<const std::vector<double>> history,
                      const std::vector<std::uint64_t>& stamps, std::uint64_t n) {
  if (n >= history.size()) throw std::invalid_argument("gradient error: slot outside the history");
  if (static_cast<int>(stamps.size()) != objective.num_agents()) {
    throw std::invalid_argument("gradient error: one stamp per agent required");
  }
  std::vector<double> delayed = history[n];
  for (int j = 0; j < objective.num_agents(); ++j) {
    if (stamps[j] > n) throw std::invalid_argument("gradient error: stamp from the future");
    const std::vector<double>& src = history[stamps[j]];
    const int off = objective.block_offset(j);
    for (int k = 0; k < objective.block_size(j); ++k) delayed[off + k] = src[off + k];
  }
  const std::vector<double> g_delayed = objective.exact_grad(delayed);
  const std::vector<double> g_now = objective.exact_grad(history[n]);
  double s = 0.0;
  for (std::size_t k = 0; k < g_now.size(); ++k) {
    s += (g_delayed[k] - g_now[k]) * (g_delayed[k] - g_now[k]);
  }
  return std::sqrt(s);
}

GrowthReport empirical_growth_check(const std::vector<std::vector<std::uint64_t>>& age_traces,
                                    double p, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("growth check: epsilon must lie in (0, 1)");
  }
  if (!(p > 0.0)) throw std::invalid_argument("growth check: p must be positive");
  if (age_traces.empty()) throw std::invalid_argument("growth check: no traces");
  const std::size_t horizon = age_traces.front().size();
  for (const auto& t : age_traces) {
    if (t.size() != horizon) throw std::invalid_argument("growth check: ragged traces");
  }
  if (horizon == 0) throw std::invalid_argument("growth check: empty traces");

  GrowthReport report;
  report.last_violation.assign(age_traces.size(), -1);
  report.partial_sums.reserve(horizon);
  const double inv_r = 1.0 / static_cast<double>(age_traces.size());
  double running = 0.0;
  for (std::size_t n = 0; n < horizon; ++n) {
    const double threshold = epsilon * std::pow(static_cast<double>(n), 1.0 / p);
    double freq = 0.0;
    for (std::size_t r = 0; r < age_traces.size(); ++r) {
      if (static_cast<double>(age_traces[r][n]) > threshold) {
        freq += inv_r;
        report.last_violation[r] = static_cast<std::int64_t>(n);
      }
    }
    running += freq;
    report.partial_sums.push_back(running);
  }
  const auto tail_start = static_cast<std::int64_t>(0.9 * static_cast<double>(horizon - 1));
  report.converged = true;
  for (std::int64_t last : report.last_violation) {
    if (last >= tail_start) report.converged = false;
  }
  return report;
}

}  // namespace aoilab
