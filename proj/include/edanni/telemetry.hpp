#pragma once

#include <string>
#include <vector>

#include "edanni/algorithms.hpp"
#include "edanni/types.hpp"

namespace edanni {

// Fewer usable points than a fit needs.
class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& msg) : Error(msg) {}
};

struct RateFitReport {
  enum class Kind { Linear, Sublinear };

  Kind kind = Kind::Linear;
  double eta_hat = 0.0;    // fitted per-round contraction (Linear)
  double c_hat = 0.0;      // max over the grid of T(eps) * eps (Sublinear)
  double r_squared = 0.0;  // of the log-gap fit (Linear)
  long window_start = 0;
  long window_end = 0;
  bool partial = false;    // some grid levels were never reached

  struct GridEntry {
    double eps = 0.0;
    long T = 0;
    bool reached = false;
  };
  std::vector<GridEntry> grid;
};

// Least-squares fit of log(F_t - f_star) against t; eta_hat = exp(-slope).
// Points with gap <= min_gap are excluded (min_gap < 0 selects the
// floating-point floor 100 * eps * |f_star|). Needs at least 5 usable
// points.
RateFitReport fit_linear_rate(const std::vector<IterationRecord>& records,
                              double f_star, double min_gap = -1.0);

// T(eps) = first round whose stationarity norm drops below eps, per grid
// level; c_hat = max reached T(eps) * eps.
RateFitReport fit_sublinear_bound(const std::vector<IterationRecord>& records,
                                  const std::vector<double>& eps_grid);

// Header: t,objective,f_value,pg_norm,delta_norm,uploads,downloads,rounds,
// virtual_time. Floats carry 17 significant digits so parsing them back is
// lossless.
void emit_csv(const std::vector<IterationRecord>& records,
              const std::string& path);

std::vector<IterationRecord> read_csv(const std::string& path);

}  // namespace edanni
