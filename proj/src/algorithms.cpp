#include "edanni/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "edanni/prox.hpp"
#include "edanni/rng.hpp"

namespace edanni {

Vector X0Spec::make(Eigen::Index dim) const {
  switch (mode) {
    case Mode::Zeros:
      return Vector::Zero(dim);
    case Mode::RandomUnit: {
      Rng rng(mix_seed(seed, 0x1217ULL));
      return scale * rng.unit_vector(dim);
    }
    case Mode::Explicit:
      if (values.size() != dim)
        throw InvalidConfigError("x0: explicit vector has wrong dimension");
      return values;
  }
  return Vector::Zero(dim);
}

void RunConfig::validate(int m) const {
  if (max_rounds < 1) throw InvalidConfigError("config: max_rounds must be >= 1");
  if (!(target_pg_norm > 0))
    throw InvalidConfigError("config: target_pg_norm must be > 0");
  if (tau < 0) throw InvalidConfigError("config: tau must be >= 0");
  if (!(rho >= 0) || !std::isfinite(rho))
    throw InvalidConfigError("config: rho must be finite and >= 0");
  if (!(inner_tol > 0)) throw InvalidConfigError("config: inner_tol must be > 0");
  if (arrival.tau != tau)
    throw InvalidConfigError("config: arrival.tau must equal tau");
  // machine 1 is the master; the arrival model covers machines 2..m
  arrival.validate(m > 1 ? m - 1 : 0);
}

namespace {

// One driver shared by both algorithms; only the per-round update differs.
// Machine 1 is the master: it refreshes its own gradient locally every
// round (no transmission, no simulated compute time), while machines 2..m
// are the engine's workers.
RunResult run_loop(const ProblemInstance& problem, const RunConfig& config,
                   EventLog* log, Algorithm algorithm) {
  const SmoothLossSet& losses = problem.losses;
  const Regularizer& reg = problem.reg;
  const int m = losses.m;
  const int workers = m - 1;
  const Eigen::Index dim = losses.dim;
  config.validate(m);

  double effective_rho = config.rho;
  if (algorithm == Algorithm::ProxGradPS && effective_rho <= 0.0) {
    effective_rho = losses.max_lipschitz();
    if (effective_rho <= 0.0)
      throw InvalidConfigError(
          "baseline: rho is 0 and no positive gradient Lipschitz bound is "
          "available to default to");
  }
  if (algorithm == Algorithm::Edanni && !losses.losses[0]->is_convex() &&
      config.rho < losses.losses[0]->lipschitz_bound())
    throw InvalidConfigError(
        "nonconvex local loss: rho must be >= the master loss's gradient "
        "Lipschitz bound");

  Vector x = config.x0.make(dim);
  if (!reg.feasible(x))
    throw InvalidConfigError("initial point is infeasible for the regularizer");

  std::vector<WorkerState> states =
      workers > 0 ? init_worker_states(workers, config.arrival)
                  : std::vector<WorkerState>{};
  for (auto& ws : states) ws.cached_gradient = Vector::Zero(dim);

  const double L = losses.max_lipschitz();
  RunResult result;
  result.effective_rho = effective_rho;
  result.rho_validation =
      validate_rho(L, config.tau, reg.convex_modulus, effective_rho, 1.0,
                   config.inexact.c1);
  result.time_table = TimeTable(workers > 0 ? workers : 0);

  // Ring buffer of recent iterates: the barrier keeps every t_j within
  // tau of t, so this is enough to recompute any cached gradient.
  const std::size_t ring_size = std::size_t(config.tau) + 2;
  std::vector<Vector> ring(ring_size);

  InexactnessSpec inexact = config.inexact;
  double now = 0.0;
  double prev_delta = 0.0;
  bool converged = false;

  for (long t = 0; t < config.max_rounds; ++t) {
    const ProxGradReport pg = prox_gradient_map(losses, reg, x);
    if (pg.norm < config.target_pg_norm) {
      result.rounds = t;
      result.final_pg_norm = pg.norm;
      converged = true;
      break;
    }
    const double obj = objective(losses, reg, x);

    const ArrivalSet arrivals =
        workers > 0 ? draw_arrivals(config.arrival, states, t) : ArrivalSet{};
    update_delay_counters(states, arrivals, t);
    for (const auto& ws : states)
      if (t - ws.last_arrival > config.tau)
        throw ProtocolViolationError(
            "bounded-delay violation at round " + std::to_string(t) +
            ": worker " + std::to_string(ws.id) + " is " +
            std::to_string(t - ws.last_arrival) + " rounds stale");

    ring[std::size_t(t) % ring_size] = x;
    const Vector master_gradient = losses.losses[0]->gradient(x);
    for (int id : arrivals)
      states[std::size_t(id - 1)].cached_gradient =
          losses.losses[std::size_t(id)]->gradient(x);

    if (t > 0 && t % 100 == 0) {
      // Stale-gradient fidelity: every cache must equal the gradient at
      // the iterate of its arrival round.
      for (const auto& ws : states) {
        const Vector& x_then = ring[std::size_t(ws.last_arrival) % ring_size];
        const Vector fresh =
            losses.losses[std::size_t(ws.id)]->gradient(x_then);
        if ((fresh - ws.cached_gradient).norm() != 0.0)
          throw ProtocolViolationError(
              "stale-gradient cache mismatch for worker " +
              std::to_string(ws.id) + " at round " + std::to_string(t));
      }
    }

    Vector gbar = master_gradient;
    for (const auto& ws : states) gbar += ws.cached_gradient;
    gbar /= double(m);

    Vector x_next;
    double eps_norm = 0.0;
    if (algorithm == Algorithm::Edanni) {
      SubproblemSpec sub;
      sub.local_loss = losses.losses[0];
      sub.h = reg;
      sub.rho = config.rho;
      sub.x_t = x;
      sub.drift = gbar - master_gradient;
      sub.inner_tol = config.inner_tol;
      sub.inner_max_iter = config.inner_max_iter;
      SubproblemResult solved;
      try {
        solved = solve_subproblem(sub);
      } catch (const ConvergenceError& e) {
        throw ConvergenceError("round " + std::to_string(t) + ": " + e.what(),
                               e.best_iterate, e.achieved_residual,
                               e.iterations);
      }
      if (inexact.mode == InexactnessSpec::Mode::InjectedNoise &&
          inexact.c1 > 0) {
        inexact.prev_delta_norm = prev_delta;
        PerturbResult pr = perturb_inexact(solved.x, inexact, sub, t);
        eps_norm = pr.epsilon.norm();
        if (eps_norm > 0 &&
            !(eps_norm * eps_norm < inexact.c1 * prev_delta * prev_delta))
          throw ProtocolViolationError(
              "injected error exceeds its progress bound at round " +
              std::to_string(t));
        x_next = std::move(pr.x);
      } else {
        x_next = std::move(solved.x);
      }
    } else {
      x_next = prox(reg, x - gbar / effective_rho, 1.0 / effective_rho);
    }

    const double delta = (x_next - x).norm();
    const double f_val = evaluate_F(problem, effective_rho, x_next, x);

    const TimeTableDelta clock =
        advance_clock(states, arrivals, now, config.master_cost);
    now = clock.new_now;
    result.time_table.accumulate(clock);
    record_comm(result.ledger, arrivals, arrivals);
    if (log) log->append(t, arrivals, states, hash_vector(x_next));

    IterationRecord rec;
    rec.t = t;
    rec.objective = obj;
    rec.f_value = f_val;
    rec.pg_norm = pg.norm;
    rec.delta_norm = delta;
    rec.ledger = result.ledger;
    rec.virtual_time = now;
    rec.rho_valid = inexact.c1 > 0 ? result.rho_validation.pass_inexact
                                   : result.rho_validation.pass;
    result.records.push_back(rec);
    result.injected_error_norms.push_back(eps_norm);

    prev_delta = delta;
    x = std::move(x_next);
  }

  if (!converged) {
    result.rounds = config.max_rounds;
    result.final_pg_norm = prox_gradient_map(losses, reg, x).norm;
  }
  result.converged = converged;
  result.final_x = std::move(x);
  return result;
}

}  // namespace

RunResult run_edanni(const ProblemInstance& problem, const RunConfig& config,
                     EventLog* log) {
  return run_loop(problem, config, log, Algorithm::Edanni);
}

RunResult run_proxgrad_ps(const ProblemInstance& problem,
                          const RunConfig& config, EventLog* log) {
  return run_loop(problem, config, log, Algorithm::ProxGradPS);
}

double evaluate_F(const ProblemInstance& problem, double rho,
                  const Vector& x_next, const Vector& x_t) {
  if (x_next.size() != x_t.size() || x_next.size() != problem.losses.dim)
    throw DimensionError("evaluate_F: dimension mismatch");
  const double hx = problem.reg.value(x_next);
  if (std::isinf(hx)) return hx;
  return problem.losses.average_value(x_next) +
         0.5 * rho * (x_next - x_t).squaredNorm() + hx;
}

CertificateReport check_descent_certificates(
    const std::vector<IterationRecord>& records, double L, int tau, double rho,
    double mu_h, double delta, double slack) {
  if (!(delta > 0))
    throw InvalidConfigError("descent certificate: delta must be > 0");
  CertificateReport report;
  const double gamma = rho + mu_h;
  report.c = std::min(0.5 * gamma - 1.5 * L - L * delta * tau,
                      0.5 * rho - L * tau / delta);
  report.applicable = report.c > 0 && records.size() >= 2;
  if (!report.applicable) return report;

  report.lhs = records.back().f_value - records.front().f_value;
  for (const auto& rec : records)
    report.sum_delta_sq += rec.delta_norm * rec.delta_norm;
  report.summed_ok = report.lhs <= -report.c * report.sum_delta_sq + slack;

  double observed_floor = std::numeric_limits<double>::infinity();
  for (const auto& rec : records)
    observed_floor = std::min(observed_floor, rec.objective);
  report.lower_bound_ok = true;
  for (const auto& rec : records)
    if (rec.f_value < observed_floor - slack) report.lower_bound_ok = false;

  report.pass = report.summed_ok && report.lower_bound_ok;
  return report;
}

}  // namespace edanni
