#include "edanni/async_engine.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>

#include "edanni/rng.hpp"

namespace edanni {

void ArrivalModel::validate(int num_workers) const {
  if (tau < 0) throw InvalidConfigError("arrival model: tau must be >= 0");
  if (kind == Kind::Bernoulli) {
    if (int(probs.size()) != num_workers)
      throw InvalidConfigError(
          "arrival model: need one arrival probability per worker (" +
          std::to_string(num_workers) + " workers)");
    for (double p : probs)
      if (!(p >= 0.0 && p <= 1.0))
        throw InvalidConfigError(
            "arrival model: probabilities must lie in [0, 1]");
  }
}

std::vector<WorkerState> init_worker_states(int m, const ArrivalModel& model) {
  std::vector<WorkerState> states(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    auto& ws = states[std::size_t(j)];
    ws.id = j + 1;
    if (model.kind == ArrivalModel::Kind::SpeedDriven) {
      Rng rng(mix_seed(model.seed, 0xc057 + std::uint64_t(j)));
      ws.compute_cost = rng.uniform(1.0, 10.0);
    } else {
      ws.compute_cost = 1.0;
    }
    ws.busy_until = ws.compute_cost;  // everyone starts computing at time 0
  }
  return states;
}

namespace {

ArrivalSet all_workers(std::size_t m) {
  ArrivalSet a(m);
  for (std::size_t j = 0; j < m; ++j) a[j] = int(j) + 1;
  return a;
}

void merge_id(ArrivalSet& set, int id) {
  auto it = std::lower_bound(set.begin(), set.end(), id);
  if (it == set.end() || *it != id) set.insert(it, id);
}

}  // namespace

ArrivalSet draw_arrivals(const ArrivalModel& model,
                         const std::vector<WorkerState>& states, long t) {
  const std::size_t m = states.size();
  if (m == 0) throw InvalidConfigError("draw_arrivals: no workers");

  // Bootstrap round: the master has no cached gradients yet.
  if (t == 0 || model.kind == ArrivalModel::Kind::Synchronous || model.tau == 0)
    return all_workers(m);

  ArrivalSet arrivals;
  if (model.kind == ArrivalModel::Kind::Bernoulli) {
    Rng rng(mix_seed(model.seed, 0xa44 + std::uint64_t(t)));
    for (std::size_t j = 0; j < m; ++j)
      if (rng.uniform() < model.probs[j]) arrivals.push_back(int(j) + 1);
    // Barrier: absent workers must satisfy d_j <= tau - 1, so anyone at
    // tau or beyond is waited for.
    for (const auto& ws : states)
      if (ws.delay_counter >= model.tau) merge_id(arrivals, ws.id);
    if (arrivals.empty()) {
      // Nothing arrived and nothing is forced: wait for the worker that
      // has been silent the longest (lowest id on ties).
      int pick = states[0].id;
      int max_d = states[0].delay_counter;
      for (const auto& ws : states)
        if (ws.delay_counter > max_d) {
          max_d = ws.delay_counter;
          pick = ws.id;
        }
      arrivals.push_back(pick);
    }
    return arrivals;
  }

  // SpeedDriven: the deadline is the latest finish time among workers the
  // master must wait for; everyone done by then has arrived.
  double deadline = -std::numeric_limits<double>::infinity();
  bool any_forced = false;
  for (const auto& ws : states) {
    const bool forced = ws.delay_counter >= model.tau;
    if (forced) {
      any_forced = true;
      deadline = std::max(deadline, ws.busy_until);
    }
  }
  if (!any_forced) {
    deadline = std::numeric_limits<double>::infinity();
    for (const auto& ws : states) deadline = std::min(deadline, ws.busy_until);
  }
  for (const auto& ws : states)
    if (ws.busy_until <= deadline) arrivals.push_back(ws.id);
  return arrivals;
}

void update_delay_counters(std::vector<WorkerState>& states,
                           const ArrivalSet& arrivals, long t) {
  std::size_t k = 0;
  for (auto& ws : states) {
    if (k < arrivals.size() && arrivals[k] == ws.id) {
      ws.delay_counter = 0;
      ws.last_arrival = t;
      ++k;
    } else {
      ws.delay_counter += 1;
    }
  }
  if (k != arrivals.size())
    throw ProtocolViolationError("arrival set contains unknown worker ids");
}

TimeTableDelta advance_clock(std::vector<WorkerState>& states,
                             const ArrivalSet& arrivals, double now,
                             double master_cost) {
  TimeTableDelta delta;
  delta.compute.assign(states.size(), 0.0);
  delta.idle.assign(states.size(), 0.0);

  double deadline = now;
  for (int id : arrivals)
    deadline = std::max(deadline, states[std::size_t(id - 1)].busy_until);
  delta.new_now = deadline + master_cost;

  for (int id : arrivals) {
    auto& ws = states[std::size_t(id - 1)];
    delta.compute[std::size_t(id - 1)] += ws.compute_cost;
    delta.idle[std::size_t(id - 1)] +=
        std::max(0.0, delta.new_now - ws.busy_until);
    ws.busy_until = delta.new_now + ws.compute_cost;  // broadcast received
  }
  return delta;
}

void record_comm(CommLedger& ledger, const ArrivalSet& arrivals,
                 const ArrivalSet& free_workers) {
  ledger.uploads += long(arrivals.size());
  ledger.downloads += long(free_workers.size());
  ledger.rounds += 1;
}

void TimeTable::accumulate(const TimeTableDelta& delta) {
  for (std::size_t j = 0; j < compute_time.size(); ++j) {
    compute_time[j] += delta.compute[j];
    idle_time[j] += delta.idle[j];
  }
}

double TimeTable::utilization(int worker_index) const {
  const double c = compute_time[std::size_t(worker_index)];
  const double total = c + idle_time[std::size_t(worker_index)];
  return total > 0 ? c / total : 0.0;
}

double TimeTable::mean_utilization() const {
  if (compute_time.empty()) return 0.0;
  double s = 0.0;
  for (int j = 0; j < int(compute_time.size()); ++j) s += utilization(j);
  return s / double(compute_time.size());
}

// ---------------------------------------------------------------------------
// Event log
// ---------------------------------------------------------------------------

void EventLog::append(long t, const ArrivalSet& arrivals,
                      const std::vector<WorkerState>& states,
                      std::uint64_t x_hash) {
  EventRecord rec;
  rec.t = t;
  rec.arrivals = arrivals;
  rec.delays.reserve(states.size());
  for (const auto& ws : states) rec.delays.push_back(ws.delay_counter);
  rec.x_hash = x_hash;
  records_.push_back(std::move(rec));
}

namespace {

constexpr char kLogMagic[4] = {'E', 'D', 'N', 'L'};

template <typename T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void EventLog::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open event log for writing: " + path);
  os.write(kLogMagic, 4);
  put<std::uint64_t>(os, records_.size());
  for (const auto& rec : records_) {
    put<std::int64_t>(os, rec.t);
    put<std::uint32_t>(os, std::uint32_t(rec.arrivals.size()));
    for (int id : rec.arrivals) put<std::uint32_t>(os, std::uint32_t(id));
    put<std::uint32_t>(os, std::uint32_t(rec.delays.size()));
    for (int d : rec.delays) put<std::int32_t>(os, d);
    put<std::uint64_t>(os, rec.x_hash);
  }
  if (!os) throw IoError("event log write failed: " + path);
}

EventLog EventLog::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open event log: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kLogMagic, 4) != 0)
    throw IoError("bad event log magic in " + path);
  EventLog log;
  const auto count = get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    EventRecord rec;
    rec.t = get<std::int64_t>(is);
    const auto na = get<std::uint32_t>(is);
    for (std::uint32_t k = 0; k < na; ++k)
      rec.arrivals.push_back(int(get<std::uint32_t>(is)));
    const auto nd = get<std::uint32_t>(is);
    for (std::uint32_t k = 0; k < nd; ++k)
      rec.delays.push_back(get<std::int32_t>(is));
    rec.x_hash = get<std::uint64_t>(is);
    if (!is) throw IoError("event log truncated: " + path);
    log.records_.push_back(std::move(rec));
  }
  return log;
}

}  // namespace edanni
