#include "edanni/prox.hpp"

#include <cmath>

namespace edanni {

namespace {

Vector soft_threshold(const Vector& z, double a) {
  Vector out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double zi = z[i];
    const double mag = std::abs(zi) - a;
    out[i] = mag > 0 ? (zi > 0 ? mag : -mag) : 0.0;
  }
  return out;
}

}  // namespace

Vector prox(const Regularizer& h, const Vector& z, double scale) {
  if (!(scale > 0)) throw NumericError("prox: scale must be > 0");
  if (!z.allFinite()) throw NumericError("prox: non-finite input");
  switch (h.kind) {
    case Regularizer::Kind::None:
      return z;
    case Regularizer::Kind::L1:
      return soft_threshold(z, scale * h.theta);
    case Regularizer::Kind::L1Ball: {
      Vector v = soft_threshold(z, scale * h.theta);
      const double n = v.norm();
      if (n > h.radius) v *= h.radius / n;
      return v;
    }
  }
  return z;
}

bool prox_nonexpansive_check(const Regularizer& h, const Vector& z1,
                             const Vector& z2, double scale) {
  const double lhs = (prox(h, z1, scale) - prox(h, z2, scale)).norm();
  const double rhs = (z1 - z2).norm();
  return lhs <= rhs * (1.0 + 1e-12);
}

ProxGradReport prox_gradient_map(const SmoothLossSet& losses,
                                 const Regularizer& h, const Vector& x) {
  if (x.size() != losses.dim)
    throw DimensionError("prox_gradient_map: dimension mismatch");
  const Vector gbar = losses.average_gradient(x);
  ProxGradReport report;
  report.map_value = x - prox(h, x - gbar, 1.0);
  report.norm = report.map_value.norm();
  return report;
}

double min_norm_subgradient_residual(const Regularizer& h,
                                     const Vector& grad_smooth,
                                     const Vector& x) {
  if (h.kind == Regularizer::Kind::L1Ball)
    throw InapplicableError(
        "min_norm_subgradient_residual: ball indicator not supported");
  if (h.kind == Regularizer::Kind::None) return grad_smooth.norm();
  double ss = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double g = grad_smooth[i];
    double r;
    if (x[i] > 0)
      r = g + h.theta;
    else if (x[i] < 0)
      r = g - h.theta;
    else
      r = std::max(0.0, std::abs(g) - h.theta);  // nearest point of [-t, t]
    ss += r * r;
  }
  return std::sqrt(ss);
}

}  // namespace edanni
