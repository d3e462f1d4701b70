#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "edanni/async_engine.hpp"
#include "edanni/rng.hpp"

using namespace edanni;

namespace {

ArrivalSet everyone(int m) {
  ArrivalSet a;
  for (int j = 1; j <= m; ++j) a.push_back(j);
  return a;
}

}  // namespace

TEST_CASE("tau 0 is the synchronous protocol") {
  ArrivalModel model;
  model.kind = ArrivalModel::Kind::Bernoulli;
  model.probs = {0.1, 0.9, 0.5};
  model.seed = 3;
  model.tau = 0;
  auto states = init_worker_states(3, model);
  for (long t = 0; t < 50; ++t) {
    const auto arrivals = draw_arrivals(model, states, t);
    CHECK(arrivals == everyone(3));
    update_delay_counters(states, arrivals, t);
    for (const auto& ws : states) CHECK(ws.delay_counter == 0);
  }
}

TEST_CASE("probability-one workers always arrive") {
  ArrivalModel model;
  model.kind = ArrivalModel::Kind::Bernoulli;
  model.probs = {1.0, 1.0, 1.0, 1.0};
  model.seed = 5;
  model.tau = 4;
  auto states = init_worker_states(4, model);
  for (long t = 0; t < 100; ++t) {
    const auto arrivals = draw_arrivals(model, states, t);
    CHECK(arrivals == everyone(4));
    update_delay_counters(states, arrivals, t);
    for (const auto& ws : states) CHECK(ws.delay_counter == 0);
  }
}

TEST_CASE("silent workers are forced in by the barrier every other round") {
  ArrivalModel model;
  model.kind = ArrivalModel::Kind::Bernoulli;
  model.probs = {0.0, 0.0};
  model.seed = 1;
  model.tau = 2;
  auto states = init_worker_states(2, model);

  // round 0 bootstraps everyone
  auto arrivals = draw_arrivals(model, states, 0);
  CHECK(arrivals == everyone(2));
  update_delay_counters(states, arrivals, 0);

  std::vector<std::vector<int>> delays;
  std::vector<ArrivalSet> sets;
  for (long t = 1; t <= 8; ++t) {
    arrivals = draw_arrivals(model, states, t);
    update_delay_counters(states, arrivals, t);
    sets.push_back(arrivals);
    delays.push_back({states[0].delay_counter, states[1].delay_counter});
  }
  // hand simulation: the empty draw pulls in the longest-delayed worker
  // (lowest id first), after which the tau barrier alternates them
  CHECK(sets[0] == ArrivalSet{1});
  CHECK(sets[1] == ArrivalSet{2});
  CHECK(sets[2] == ArrivalSet{1});
  CHECK(sets[3] == ArrivalSet{2});
  // each worker's counter alternates 0,1,0,1,...
  for (std::size_t k = 0; k < delays.size(); ++k) {
    CHECK(delays[k][0] == int(k % 2));
    CHECK(delays[k][1] == int((k + 1) % 2));
  }
}

TEST_CASE("counters accumulate while absent") {
  ArrivalModel model;
  model.kind = ArrivalModel::Kind::Bernoulli;
  model.probs = {1.0, 0.0};
  model.seed = 2;
  model.tau = 5;
  auto states = init_worker_states(2, model);
  update_delay_counters(states, draw_arrivals(model, states, 0), 0);
  for (long t = 1; t <= 3; ++t)
    update_delay_counters(states, draw_arrivals(model, states, t), t);
  CHECK(states[1].delay_counter == 3);  // absent three consecutive draws
  CHECK(states[0].delay_counter == 0);
}

TEST_CASE("seeded replay keeps every gradient within the delay bound") {
  ArrivalModel model;
  model.kind = ArrivalModel::Kind::Bernoulli;
  model.probs = {0.2, 0.2, 0.5, 0.5, 0.1};
  model.seed = 77;
  model.tau = 3;
  auto states = init_worker_states(5, model);
  long max_age = 0;
  for (long t = 0; t < 2000; ++t) {
    update_delay_counters(states, draw_arrivals(model, states, t), t);
    for (const auto& ws : states)
      max_age = std::max(max_age, t - ws.last_arrival);
  }
  CHECK(max_age <= model.tau);
}

TEST_CASE("arrival draws are deterministic per seed and round") {
  ArrivalModel model;
  model.kind = ArrivalModel::Kind::Bernoulli;
  model.probs = {0.3, 0.6, 0.4};
  model.seed = 11;
  model.tau = 4;
  auto s1 = init_worker_states(3, model);
  auto s2 = init_worker_states(3, model);
  for (long t = 0; t < 200; ++t) {
    const auto a1 = draw_arrivals(model, s1, t);
    const auto a2 = draw_arrivals(model, s2, t);
    CHECK(a1 == a2);
    update_delay_counters(s1, a1, t);
    update_delay_counters(s2, a2, t);
  }
}

TEST_CASE("clock: homogeneous synchronous rounds have zero idle") {
  ArrivalModel model;
  model.tau = 0;
  auto states = init_worker_states(3, model);
  TimeTable table(3);
  double now = 0.0;
  for (long t = 0; t < 10; ++t) {
    const auto arrivals = draw_arrivals(model, states, t);
    const auto delta = advance_clock(states, arrivals, now, 0.0);
    now = delta.new_now;
    table.accumulate(delta);
  }
  for (int w = 0; w < 3; ++w) {
    CHECK(table.idle_time[w] == 0.0);
    CHECK(table.utilization(w) == 1.0);
  }
  CHECK(now == doctest::Approx(10.0));
}

TEST_CASE("clock: slow partner makes the fast worker idle") {
  ArrivalModel model;
  model.tau = 0;
  auto states = init_worker_states(2, model);
  states[0].compute_cost = 1.0;
  states[1].compute_cost = 10.0;
  states[0].busy_until = 1.0;
  states[1].busy_until = 10.0;
  TimeTable table(2);
  double now = 0.0;
  for (long t = 0; t < 5; ++t) {
    const auto delta =
        advance_clock(states, draw_arrivals(model, states, t), now, 0.0);
    now = delta.new_now;
    table.accumulate(delta);
  }
  CHECK(table.idle_time[0] == doctest::Approx(9.0 * 5));
  CHECK(table.idle_time[1] == 0.0);
  CHECK(table.compute_time[0] == doctest::Approx(1.0 * 5));
  CHECK(table.compute_time[1] == doctest::Approx(10.0 * 5));
}

TEST_CASE("relaxing the delay bound raises utilization") {
  auto run_mean_util = [](int tau, std::uint64_t seed) {
    ArrivalModel model;
    model.kind = ArrivalModel::Kind::SpeedDriven;
    model.seed = seed;
    model.tau = tau;
    auto states = init_worker_states(8, model);
    TimeTable table(8);
    double now = 0.0;
    for (long t = 0; t < 400; ++t) {
      const auto arrivals = draw_arrivals(model, states, t);
      update_delay_counters(states, arrivals, t);
      const auto delta = advance_clock(states, arrivals, now, 0.0);
      now = delta.new_now;
      table.accumulate(delta);
    }
    return table.mean_utilization();
  };
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL})
    CHECK(run_mean_util(3, seed) > run_mean_util(0, seed));
}

TEST_CASE("speed-driven arrivals respect the delay bound too") {
  ArrivalModel model;
  model.kind = ArrivalModel::Kind::SpeedDriven;
  model.seed = 9;
  model.tau = 4;
  auto states = init_worker_states(6, model);
  double now = 0.0;
  long max_age = 0;
  for (long t = 0; t < 500; ++t) {
    const auto arrivals = draw_arrivals(model, states, t);
    update_delay_counters(states, arrivals, t);
    now = advance_clock(states, arrivals, now, 0.0).new_now;
    for (const auto& ws : states)
      max_age = std::max(max_age, t - ws.last_arrival);
    CHECK(!arrivals.empty());
  }
  CHECK(max_age <= model.tau);
}

TEST_CASE("ledger counting") {
  CommLedger ledger;
  record_comm(ledger, {1, 2, 3}, {1, 2, 3, 4, 5});
  CHECK(ledger.uploads == 3);
  CHECK(ledger.downloads == 5);
  CHECK(ledger.rounds == 1);

  // synchronous: m uploads and m downloads per round
  CommLedger sync;
  const int m = 4, T = 7;
  for (int t = 0; t < T; ++t) record_comm(sync, everyone(m), everyone(m));
  CHECK(sync.uploads == m * T);
  CHECK(sync.downloads == m * T);
  CHECK(sync.rounds == T);

  // any run: counters never exceed m per round
  ArrivalModel model;
  model.kind = ArrivalModel::Kind::Bernoulli;
  model.probs = {0.4, 0.4, 0.9};
  model.seed = 10;
  model.tau = 3;
  auto states = init_worker_states(3, model);
  CommLedger sweep;
  long prev_uploads = 0;
  for (long t = 0; t < 300; ++t) {
    const auto arrivals = draw_arrivals(model, states, t);
    update_delay_counters(states, arrivals, t);
    record_comm(sweep, arrivals, arrivals);
    CHECK(sweep.uploads - prev_uploads == long(arrivals.size()));
    prev_uploads = sweep.uploads;
  }
  CHECK(sweep.uploads <= 3 * sweep.rounds);
  CHECK(sweep.downloads <= 3 * sweep.rounds);
}

TEST_CASE("event log round-trips") {
  ArrivalModel model;
  model.kind = ArrivalModel::Kind::Bernoulli;
  model.probs = {0.5, 0.5};
  model.seed = 13;
  model.tau = 2;
  auto states = init_worker_states(2, model);
  EventLog log;
  Rng rng(14);
  for (long t = 0; t < 20; ++t) {
    const auto arrivals = draw_arrivals(model, states, t);
    update_delay_counters(states, arrivals, t);
    log.append(t, arrivals, states, rng.next_u64());
  }
  const auto path =
      (std::filesystem::temp_directory_path() / "edanni_events.bin").string();
  log.save(path);
  const EventLog loaded = EventLog::load(path);
  CHECK(loaded == log);
  CHECK(loaded.records().size() == 20);
}
