#pragma once

#include "edanni/problems.hpp"
#include "edanni/types.hpp"

namespace edanni {

// Stationarity measure: x - Prox_h(x - gbar) with the fresh averaged
// gradient gbar; its norm is zero exactly at stationary points.
struct ProxGradReport {
  Vector map_value;
  double norm = 0.0;
};

// Exact minimizer of scale*h(x) + (1/2)||x - z||^2.
//   None   -> z
//   L1     -> componentwise soft threshold at scale*theta
//   L1Ball -> soft threshold, then euclidean projection onto the ball
Vector prox(const Regularizer& h, const Vector& z, double scale);

// ||prox(z1) - prox(z2)|| <= ||z1 - z2|| up to a 1e-12 relative allowance.
bool prox_nonexpansive_check(const Regularizer& h, const Vector& z1,
                             const Vector& z2, double scale);

ProxGradReport prox_gradient_map(const SmoothLossSet& losses,
                                 const Regularizer& h, const Vector& x);

// Norm of the minimum-norm element of grad_smooth + theta * d||x||_1
// (None and L1 kinds only); used to certify first-order optimality.
double min_norm_subgradient_residual(const Regularizer& h,
                                     const Vector& grad_smooth,
                                     const Vector& x);

}  // namespace edanni
