#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edanni/types.hpp"

namespace edanni {

// Per-machine protocol state. Machine ids are 1-based; index j-1 in the
// state vector.
struct WorkerState {
  int id = 0;
  Vector cached_gradient;   // gradient of L_j at the iterate of last_arrival
  long last_arrival = 0;    // t_j
  int delay_counter = 0;    // d_j, iterations since last arrival
  double busy_until = 0.0;  // virtual time when the running computation ends
  double compute_cost = 1.0;  // virtual seconds per gradient evaluation
};

// How arrival sets are produced each round. tau is the delay bound: the
// barrier guarantees that after each round no absent worker's counter
// exceeds tau - 1.
struct ArrivalModel {
  enum class Kind { Synchronous, Bernoulli, SpeedDriven };

  Kind kind = Kind::Synchronous;
  std::vector<double> probs;  // Bernoulli: per-worker arrival probability
  std::uint64_t seed = 0;     // Bernoulli draws / SpeedDriven cost draws
  int tau = 0;

  void validate(int num_workers) const;
};

struct CommLedger {
  long uploads = 0;    // worker -> master gradient messages
  long downloads = 0;  // master -> worker iterate broadcasts
  long rounds = 0;

  bool operator==(const CommLedger&) const = default;
};

using ArrivalSet = std::vector<int>;  // ascending 1-based ids

// Workers start their first gradient computation at virtual time 0;
// SpeedDriven draws per-worker costs from uniform[1, 10].
std::vector<WorkerState> init_worker_states(int m, const ArrivalModel& model);

// Round t's arrival set. Round 0 returns every worker (the master cannot
// form an average before each machine has reported once). Afterwards:
// sampled (or finish-time) arrivals, plus every worker whose counter has
// hit tau (absent workers must keep d_j <= tau - 1). An empty draw is
// resolved by waiting for the longest-delayed worker. Deterministic per
// (seed, t).
ArrivalSet draw_arrivals(const ArrivalModel& model,
                         const std::vector<WorkerState>& states, long t);

// d_j = 0 and t_j = t for arrived workers, d_j + 1 for the rest.
void update_delay_counters(std::vector<WorkerState>& states,
                           const ArrivalSet& arrivals, long t);

struct TimeTableDelta {
  std::vector<double> compute;  // indexed by worker (0-based)
  std::vector<double> idle;
  double new_now = 0.0;
};

// Advances the clock to the latest finish time among this round's
// arrivals, charges the master solve cost, accounts per-worker compute and
// broadcast-wait idle time, and restarts the arrived workers' computations.
TimeTableDelta advance_clock(std::vector<WorkerState>& states,
                             const ArrivalSet& arrivals, double now,
                             double master_cost);

void record_comm(CommLedger& ledger, const ArrivalSet& arrivals,
                 const ArrivalSet& free_workers);

// Cumulative virtual-clock accounting for a run.
struct TimeTable {
  std::vector<double> compute_time;
  std::vector<double> idle_time;

  explicit TimeTable(int m = 0)
      : compute_time(std::size_t(m), 0.0), idle_time(std::size_t(m), 0.0) {}

  void accumulate(const TimeTableDelta& delta);
  double utilization(int worker_index) const;
  double mean_utilization() const;
};

// Append-only (t, A_t, d-vector, x-hash) log backing the replay checks.
struct EventRecord {
  long t = 0;
  ArrivalSet arrivals;
  std::vector<int> delays;
  std::uint64_t x_hash = 0;

  bool operator==(const EventRecord&) const = default;
};

class EventLog {
 public:
  void append(long t, const ArrivalSet& arrivals,
              const std::vector<WorkerState>& states, std::uint64_t x_hash);

  const std::vector<EventRecord>& records() const { return records_; }

  void save(const std::string& path) const;
  static EventLog load(const std::string& path);

  bool operator==(const EventLog&) const = default;

 private:
  std::vector<EventRecord> records_;
};

}  // namespace edanni
