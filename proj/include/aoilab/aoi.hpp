#pragma once

#include <cstdint>
#include <vector>

#include "aoilab/graph.hpp"

namespace aoilab {

// Per-agent bookkeeping of how fresh everyone's variable is. Entry (i, j)
// stores the origination time of the copy of agent j's variable that agent i
// currently holds; the diagonal is always the current time. Time 0 starts
// synchronized: every entry is 0.
//
// An event in slot n delivers the sender's belief as of time n-1, so a fresh
// direct delivery has age 1. Slot-0 events deliver the initial state, which
// every agent already holds; the evolution therefore starts at slot 1.
class TimestampMatrix {
 public:
  explicit TimestampMatrix(int num_agents);

  int num_agents() const { return num_agents_; }
  std::uint64_t time() const { return time_; }
  std::uint64_t stamp(int holder, int subject) const {
    return stamps_[idx(holder, subject)];
  }
  // Age of agent `subject`'s variable as held by `holder`: time - stamp.
  std::uint64_t age(int holder, int subject) const {
    return time_ - stamp(holder, subject);
  }

  // Advances to slot n (which must be time()+1 and >= 1): every receiver of a
  // realized edge merges the sender's stamps componentwise by max, everyone
  // else carries values forward, then each agent restamps its own entry to n.
  void flood_step(const std::vector<Edge>& edges, std::uint64_t n);

 private:
  int idx(int holder, int subject) const { return holder * num_agents_ + subject; }

  int num_agents_ = 0;
  std::uint64_t time_ = 0;
  std::vector<std::uint64_t> stamps_;
};

// Realized edge sets for slots 0..horizon-1 of one replication.
struct EventLog {
  int num_agents = 0;
  std::vector<std::vector<Edge>> slots;

  std::uint64_t horizon() const { return slots.size(); }
  void validate() const;
};

// Age at the receiver of channel (from, to) under direct-only exchange at
// time n: n - l + 1 for the latest event slot l in [1, n], or n if the
// channel never fired by then.
std::uint64_t direct_aoi(const EventLog& log, int from, int to, std::uint64_t n);

// Exceedance counts: how many recorded ages were > m, for every m up to the
// largest age seen.
class TailHistogram {
 public:
  void add(std::uint64_t age);
  std::uint64_t total() const { return total_; }
  std::uint64_t max_age() const;
  std::uint64_t exceed_count(std::uint64_t m) const;

  // P(age > m) for m = 0..max_age; the last entry is always 0.
  std::vector<double> ccdf() const;

 private:
  std::vector<std::uint64_t> value_counts_;
  std::uint64_t total_ = 0;
};

}  // namespace aoilab
