#include "aoilab/aoi.hpp"

#include <algorithm>
#include <stdexcept>

namespace aoilab {

TimestampMatrix::TimestampMatrix(int num_agents) : num_agents_(num_agents) {
  if (num_agents < 1) {
    throw std::invalid_argument("timestamps: agent count must be positive");
  }
  stamps_.assign(static_cast<std::size_t>(num_agents) * num_agents, 0);
}

void TimestampMatrix::flood_step(const std::vector<Edge>& edges, std::uint64_t n) {
  if (n != time_ + 1) {
    throw std::logic_error("flood: slots must advance one at a time");
  }
  const std::vector<std::uint64_t> prev = stamps_;
  for (const Edge& e : edges) {
    if (e.from < 0 || e.from >= num_agents_ || e.to < 0 || e.to >= num_agents_ ||
        e.from == e.to) {
      throw std::invalid_argument("flood: bad edge");
    }
    for (int k = 0; k < num_agents_; ++k) {
      std::uint64_t& slot = stamps_[idx(e.to, k)];
      slot = std::max(slot, prev[idx(e.from, k)]);
    }
  }
  for (int i = 0; i < num_agents_; ++i) stamps_[idx(i, i)] = n;
  time_ = n;
}

void EventLog::validate() const {
  if (num_agents < 1) {
    throw std::invalid_argument("event log: agent count must be positive");
  }
  for (const auto& slot : slots) {
    for (const Edge& e : slot) {
      if (e.from < 0 || e.from >= num_agents || e.to < 0 || e.to >= num_agents ||
          e.from == e.to) {
        throw std::invalid_argument("event log: bad edge");
      }
    }
  }
}

std::uint64_t direct_aoi(const EventLog& log, int from, int to, std::uint64_t n) {
  if (n >= log.horizon()) {
    throw std::invalid_argument("direct age: time beyond the log horizon");
  }
  for (std::uint64_t l = n; l >= 1; --l) {
    for (const Edge& e : log.slots[l]) {
      if (e.from == from && e.to == to) return n - l + 1;
    }
  }
  return n;
}

void TailHistogram::add(std::uint64_t age) {
  if (age >= value_counts_.size()) value_counts_.resize(age + 1, 0);
  ++value_counts_[age];
  ++total_;
}

std::uint64_t TailHistogram::max_age() const {
  if (total_ == 0) {
    throw std::logic_error("tail histogram: no observations");
  }
  return value_counts_.size() - 1;
}

std::uint64_t TailHistogram::exceed_count(std::uint64_t m) const {
  if (total_ == 0) {
    throw std::logic_error("tail histogram: no observations");
  }
  std::uint64_t count = 0;
  for (std::uint64_t v = m + 1; v < value_counts_.size(); ++v) count += value_counts_[v];
  return count;
}

std::vector<double> TailHistogram::ccdf() const {
  const std::uint64_t top = max_age();
  std::vector<double> out(top + 1, 0.0);
  std::uint64_t above = 0;
  for (std::uint64_t m = top + 1; m-- > 0;) {
    if (m + 1 < value_counts_.size()) above += value_counts_[m + 1];
    out[m] = static_cast<double>(above) / static_cast<double>(total_);
  }
  return out;
}

}  // namespace aoilab
