#pragma once

#include <cstdint>

#include "edanni/problems.hpp"
#include "edanni/prox.hpp"
#include "edanni/types.hpp"

namespace edanni {

// One master-side update:
//   minimize  L1(x) + h(x) + (rho/2)||x - x_t||^2 + <drift, x - x_t>
// where drift aggregates the (possibly stale) worker gradients minus the
// master's own gradient.
struct SubproblemSpec {
  LocalLossPtr local_loss;
  Regularizer h;
  double rho = 0.0;
  Vector x_t;
  Vector drift;
  double inner_tol = 1e-10;
  long inner_max_iter = 200000;

  void validate() const;
  double smooth_value(const Vector& x) const;
  Vector smooth_gradient(const Vector& x) const;
  double composite_value(const Vector& x) const;
};

struct SubproblemResult {
  Vector x;
  long inner_iters = 0;
  double residual = 0.0;
};

// Accelerated proximal gradient on the subproblem, warm-started at x_t,
// fixed step 1/(L1 + rho), restart on objective increase. Stops when the
// subproblem's own prox-gradient-map norm is <= inner_tol. Throws
// ConvergenceError (carrying the best iterate) if the budget runs out with
// residual > 10 * inner_tol.
SubproblemResult solve_subproblem(const SubproblemSpec& spec);

// Direct-factorization special case x_t - H^{-1} gbar, valid when rho = 0,
// h = none and L1 is quadratic with Hessian H (symmetric positive definite).
Vector solve_subproblem_closed_form(const Matrix& H, const Vector& gbar,
                                    const Vector& x_t);

// Controlled error injection: the returned iterate solves the subproblem
// with an extra residual eps whose norm is capped strictly below
// sqrt(c1) * prev_delta_norm.
struct InexactnessSpec {
  enum class Mode { Off, InjectedNoise };

  double c1 = 0.0;
  Mode mode = Mode::Off;
  std::uint64_t seed = 0;
  double prev_delta_norm = 0.0;
};

struct PerturbResult {
  Vector x;
  Vector epsilon;  // the injected optimality residual (zero when off)
};

PerturbResult perturb_inexact(const Vector& x_exact,
                              const InexactnessSpec& inexact,
                              const SubproblemSpec& subproblem, long round);

// Descent-parameter check: gamma(rho) = rho + mu_h must clear
//   gamma(rho) > 3L + 2 L delta tau   and   rho > 2 L tau / delta,
// plus the tightened variants used when error injection is on. Advisory:
// runs proceed regardless.
struct RhoValidation {
  double gamma = 0.0;
  double curvature_threshold = 0.0;   // 3L + 2 L delta tau
  double proximal_threshold = 0.0;    // 2 L tau / delta
  bool pass = false;
  bool pass_inexact = false;
};

RhoValidation validate_rho(double L, int tau, double mu_h, double rho,
                           double delta, double c1 = 0.0);

// Contraction-factor check for strongly convex losses. Evaluates the two
// rho inequalities and the delta1 lower bound; eta is the per-iteration
// contraction 1 + 1/((rho/2)(1+delta1) + delta1). Throws InapplicableError
// when sigma2 == 0.
struct LinearRateValidation {
  double eta = 1.0;
  double cond1_lhs = 0.0;   // must be < 0
  double cond2_lhs = 0.0;   // must be < 0
  double delta1_floor = 0.0;
  bool delta1_ok = false;
  bool pass = false;
  bool pass_inexact = false;
};

LinearRateValidation validate_linear_rate_conditions(double L, double sigma2,
                                                     int tau, double rho,
                                                     double delta,
                                                     double delta1,
                                                     double c1 = 0.0);

inline double default_delta1(double L, double rho, double sigma2) {
  return 2.0 * (2.0 * L + rho + 1.0) / sigma2;
}

}  // namespace edanni
