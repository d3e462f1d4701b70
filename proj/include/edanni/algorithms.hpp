#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edanni/async_engine.hpp"
#include "edanni/master_solver.hpp"
#include "edanni/problems.hpp"
#include "edanni/types.hpp"

namespace edanni {

struct ProblemInstance {
  SmoothLossSet losses;
  Regularizer reg;
};

struct X0Spec {
  enum class Mode { Zeros, RandomUnit, Explicit };

  Mode mode = Mode::Zeros;
  double scale = 1.0;      // RandomUnit: x0 = scale * (random unit vector)
  std::uint64_t seed = 0;  // RandomUnit
  Vector values;           // Explicit

  Vector make(Eigen::Index dim) const;
};

enum class Algorithm { Edanni, ProxGradPS };

struct RunConfig {
  std::string name = "run";
  Algorithm algorithm = Algorithm::Edanni;
  double rho = 0.0;
  int tau = 0;
  long max_rounds = 1000;
  double target_pg_norm = 1e-8;
  ArrivalModel arrival;
  InexactnessSpec inexact;
  std::uint64_t seed = 0;
  X0Spec x0;
  double inner_tol = 1e-10;
  long inner_max_iter = 200000;
  double master_cost = 0.0;  // virtual seconds charged per master solve

  void validate(int m) const;
};

// One row of run telemetry: objective and stationarity are measured at the
// pre-update iterate x^t with fresh gradients; f_value and delta_norm
// describe the step taken this round.
struct IterationRecord {
  long t = 0;
  double objective = 0.0;   // L(x^t)
  double f_value = 0.0;     // F(x^{t+1}, x^t)
  double pg_norm = 0.0;     // ||x^t - Prox_h(x^t - mean grad)||
  double delta_norm = 0.0;  // ||x^{t+1} - x^t||
  CommLedger ledger;        // cumulative through this round
  double virtual_time = 0.0;
  bool rho_valid = false;
};

struct RunResult {
  std::vector<IterationRecord> records;
  Vector final_x;
  double final_pg_norm = 0.0;
  long rounds = 0;  // first round whose iterate met the target (or the cap)
  bool converged = false;
  CommLedger ledger;
  TimeTable time_table;
  std::vector<double> injected_error_norms;  // per round; 0 when exact
  RhoValidation rho_validation;
  double effective_rho = 0.0;
};

// Asynchronous master/worker loop: draw arrivals, refresh arrived workers'
// cached gradients at the current iterate, solve the proximal master
// subproblem against the stale average, broadcast, record telemetry.
// Terminates when the fresh stationarity norm drops below
// target_pg_norm or after max_rounds.
RunResult run_edanni(const ProblemInstance& problem, const RunConfig& config,
                     EventLog* log = nullptr);

// First-order baseline under the identical arrival protocol and ledger:
//   x^{t+1} = Prox_{h/rho}(x^t - (1/rho) * stale mean gradient)
// config.rho > 0 is the proximal weight; rho == 0 falls back to the
// largest per-machine gradient Lipschitz bound.
RunResult run_proxgrad_ps(const ProblemInstance& problem,
                          const RunConfig& config, EventLog* log = nullptr);

// F(x, x_t) = (1/m) sum_j L_j(x) + (rho/2)||x - x_t||^2 + h(x).
double evaluate_F(const ProblemInstance& problem, double rho,
                  const Vector& x_next, const Vector& x_t);

// Summed-descent certificate over a completed run's records:
//   F_last - F_first <= -c * sum_t delta_t^2 + slack,
//   c = min{gamma/2 - 3L/2 - L delta tau, rho/2 - L tau / delta},
// plus the floor check that no F value dips below the observed minimum of
// the composite objective. Advisory; inapplicable when c <= 0.
struct CertificateReport {
  bool applicable = false;
  double c = 0.0;
  double lhs = 0.0;           // F_last - F_first
  double sum_delta_sq = 0.0;
  bool summed_ok = false;
  bool lower_bound_ok = false;
  bool pass = false;
};

CertificateReport check_descent_certificates(
    const std::vector<IterationRecord>& records, double L, int tau, double rho,
    double mu_h, double delta, double slack = 1e-8);

}  // namespace edanni
