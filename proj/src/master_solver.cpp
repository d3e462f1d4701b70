#include "edanni/master_solver.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "edanni/rng.hpp"

namespace edanni {

void SubproblemSpec::validate() const {
  if (!local_loss) throw InvalidConfigError("subproblem: missing local loss");
  if (x_t.size() != local_loss->dim() || drift.size() != x_t.size())
    throw DimensionError("subproblem: x_t/drift dimension mismatch");
  if (!(inner_tol > 0)) throw InvalidConfigError("subproblem: inner_tol <= 0");
  if (!std::isfinite(rho) || rho < 0)
    throw InvalidConfigError("subproblem: rho must be finite and >= 0");
  if (!local_loss->is_convex() && rho < local_loss->lipschitz_bound())
    throw InvalidConfigError(
        "subproblem: nonconvex local loss needs rho >= its gradient Lipschitz "
        "bound to make the subproblem convex");
}

double SubproblemSpec::smooth_value(const Vector& x) const {
  const Vector d = x - x_t;
  return local_loss->value(x) + drift.dot(d) + 0.5 * rho * d.squaredNorm();
}

Vector SubproblemSpec::smooth_gradient(const Vector& x) const {
  return local_loss->gradient(x) + drift + rho * (x - x_t);
}

double SubproblemSpec::composite_value(const Vector& x) const {
  return smooth_value(x) + h.value(x);
}

SubproblemResult solve_subproblem(const SubproblemSpec& spec) {
  spec.validate();
  const double step_denom = spec.local_loss->lipschitz_bound() + spec.rho;

  auto residual_at = [&](const Vector& x) {
    return (x - prox(spec.h, x - spec.smooth_gradient(x), 1.0)).norm();
  };

  Vector x = spec.x_t;
  double res = residual_at(x);
  if (res <= spec.inner_tol) return {x, 0, res};

  if (step_denom <= 0.0)
    throw InvalidConfigError(
        "subproblem: zero curvature (flat loss with rho = 0) but nonzero "
        "gradient; no bounded minimizer");
  const double step = 1.0 / step_denom;

  Vector y = x;
  Vector best_x = x;
  double best_res = res;
  double momentum = 1.0;
  double prev_value = spec.composite_value(x);

  for (long it = 1; it <= spec.inner_max_iter; ++it) {
    Vector x_next = prox(spec.h, y - step * spec.smooth_gradient(y), step);
    res = residual_at(x_next);
    if (!std::isfinite(res))
      throw ConvergenceError("subproblem diverged (non-finite residual)",
                             best_x, best_res, it);
    if (res < best_res) {
      best_res = res;
      best_x = x_next;
    }
    if (res <= spec.inner_tol) return {x_next, it, res};

    const double value = spec.composite_value(x_next);
    const double next_momentum =
        0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    if (value > prev_value) {
      // restart: drop momentum, continue from the new point
      y = x_next;
      momentum = 1.0;
    } else {
      y = x_next + ((momentum - 1.0) / next_momentum) * (x_next - x);
      momentum = next_momentum;
    }
    prev_value = value;
    x = x_next;
  }

  if (best_res > 10.0 * spec.inner_tol)
    throw ConvergenceError(
        "subproblem did not converge: residual " + std::to_string(best_res) +
            " after " + std::to_string(spec.inner_max_iter) + " iterations",
        best_x, best_res, spec.inner_max_iter);
  return {best_x, spec.inner_max_iter, best_res};
}

Vector solve_subproblem_closed_form(const Matrix& H, const Vector& gbar,
                                    const Vector& x_t) {
  if (H.rows() != H.cols() || H.rows() != gbar.size() ||
      gbar.size() != x_t.size())
    throw DimensionError("closed form: dimension mismatch");
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success)
    throw NumericError("closed form: Hessian not positive definite");
  return x_t - llt.solve(gbar);
}

PerturbResult perturb_inexact(const Vector& x_exact,
                              const InexactnessSpec& inexact,
                              const SubproblemSpec& subproblem, long round) {
  PerturbResult out;
  out.epsilon = Vector::Zero(x_exact.size());
  out.x = x_exact;
  if (inexact.mode == InexactnessSpec::Mode::Off || inexact.c1 <= 0.0)
    return out;

  const double cap = 0.99 * std::sqrt(inexact.c1) * inexact.prev_delta_norm;
  if (cap <= 0.0) return out;  // no previous progress: inject nothing

  Rng rng(mix_seed(inexact.seed, std::uint64_t(round) + 0x1e5ac7ULL));
  const double draw = std::abs(rng.normal()) * 0.5 * cap;
  const double norm = std::min(draw, cap);
  Vector eps = norm * rng.unit_vector(x_exact.size());

  // A point whose optimality residual for the original subproblem equals
  // eps is exactly the minimizer of the subproblem with drift - eps.
  SubproblemSpec shifted = subproblem;
  shifted.drift = subproblem.drift - eps;
  SubproblemResult solved = solve_subproblem(shifted);

  out.x = solved.x;
  out.epsilon = std::move(eps);
  return out;
}

RhoValidation validate_rho(double L, int tau, double mu_h, double rho,
                           double delta, double c1) {
  if (!(delta > 0)) throw InvalidConfigError("validate_rho: delta must be > 0");
  RhoValidation r;
  r.gamma = rho + mu_h;
  r.curvature_threshold = 3.0 * L + 2.0 * L * delta * tau;
  r.proximal_threshold = 2.0 * L * tau / delta;
  r.pass = r.gamma > r.curvature_threshold && rho > r.proximal_threshold;
  r.pass_inexact = r.gamma > r.curvature_threshold + 1.0 &&
                   rho > r.proximal_threshold + c1;
  return r;
}

LinearRateValidation validate_linear_rate_conditions(double L, double sigma2,
                                                     int tau, double rho,
                                                     double delta,
                                                     double delta1,
                                                     double c1) {
  if (sigma2 <= 0.0)
    throw InapplicableError(
        "linear-rate conditions need strongly convex losses (sigma2 > 0)");
  if (!(delta > 0) || !(delta1 > 0))
    throw InvalidConfigError("linear-rate conditions: delta, delta1 must be > 0");

  LinearRateValidation r;
  const double D = 0.5 * rho * (1.0 + delta1) + delta1;
  r.eta = 1.0 + 1.0 / D;
  r.delta1_floor = (2.0 * L + rho + 1.0) / sigma2;
  r.delta1_ok = delta1 > r.delta1_floor;

  const double geo =
      tau == 0 ? 0.0 : (std::pow(r.eta, tau) - 1.0) / (r.eta - 1.0);
  const double stale_weight = (L / delta + 0.5 * delta1 * L * L * tau / D);

  r.cond1_lhs = (delta1 * L + 0.5 * rho * (1.0 + delta1)) / D + 1.5 * L -
                0.5 * rho + L * delta * tau;
  r.cond2_lhs = r.cond1_lhs - 0.5 * rho * r.eta + stale_weight * geo;
  r.pass = r.cond1_lhs < 0 && r.cond2_lhs < 0 && r.delta1_ok;

  const double cond1_inexact =
      (delta1 * L + 0.5 * rho * (1.0 + delta1) + 0.5) / D + 1.5 * L -
      0.5 * (rho - 1.0) + L * delta * tau;
  const double cond2_inexact = cond1_inexact - 0.5 * (rho - c1) * r.eta +
                               stale_weight * geo + c1 * r.eta / D;
  r.pass_inexact = cond1_inexact < 0 && cond2_inexact < 0 && r.delta1_ok;
  return r;
}

}  // namespace edanni
