#include "edanni/telemetry.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace edanni {

RateFitReport fit_linear_rate(const std::vector<IterationRecord>& records,
                              double f_star, double min_gap) {
  if (min_gap < 0)
    min_gap = 100.0 * std::numeric_limits<double>::epsilon() * std::abs(f_star);

  std::vector<double> ts, logs;
  long first_t = 0, last_t = 0;
  for (const auto& rec : records) {
    const double gap = rec.f_value - f_star;
    if (!(gap > min_gap) || !std::isfinite(gap)) continue;
    if (ts.empty()) first_t = rec.t;
    last_t = rec.t;
    ts.push_back(double(rec.t));
    logs.push_back(std::log(gap));
  }
  if (ts.size() < 5)
    throw InsufficientDataError(
        "linear-rate fit needs at least 5 points above the gap floor, got " +
        std::to_string(ts.size()));

  const double n = double(ts.size());
  double st = 0, sy = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sy += logs[i];
  }
  const double mt = st / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxx += (ts[i] - mt) * (ts[i] - mt);
    sxy += (ts[i] - mt) * (logs[i] - my);
  }
  const double slope = sxx > 0 ? sxy / sxx : 0.0;
  const double intercept = my - slope * mt;

  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double fit = intercept + slope * ts[i];
    ss_res += (logs[i] - fit) * (logs[i] - fit);
    ss_tot += (logs[i] - my) * (logs[i] - my);
  }

  RateFitReport report;
  report.kind = RateFitReport::Kind::Linear;
  report.eta_hat = std::exp(-slope);
  report.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot
                                : 1.0;  // constant series: perfect fit
  report.window_start = first_t;
  report.window_end = last_t;
  return report;
}

RateFitReport fit_sublinear_bound(const std::vector<IterationRecord>& records,
                                  const std::vector<double>& eps_grid) {
  RateFitReport report;
  report.kind = RateFitReport::Kind::Sublinear;
  report.c_hat = 0.0;
  if (!records.empty()) {
    report.window_start = records.front().t;
    report.window_end = records.back().t;
  }
  for (double eps : eps_grid) {
    RateFitReport::GridEntry entry;
    entry.eps = eps;
    for (const auto& rec : records) {
      if (rec.pg_norm < eps) {
        entry.T = rec.t;
        entry.reached = true;
        break;
      }
    }
    if (entry.reached)
      report.c_hat = std::max(report.c_hat, double(entry.T) * eps);
    else
      report.partial = true;
    report.grid.push_back(entry);
  }
  return report;
}

namespace {

constexpr const char* kCsvHeader =
    "t,objective,f_value,pg_norm,delta_norm,uploads,downloads,rounds,"
    "virtual_time";

void append_double(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

void emit_csv(const std::vector<IterationRecord>& records,
              const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open CSV for writing: " + path);
  os << kCsvHeader << '\n';
  std::string line;
  for (const auto& rec : records) {
    line.clear();
    line += std::to_string(rec.t);
    line += ',';
    append_double(line, rec.objective);
    line += ',';
    append_double(line, rec.f_value);
    line += ',';
    append_double(line, rec.pg_norm);
    line += ',';
    append_double(line, rec.delta_norm);
    line += ',';
    line += std::to_string(rec.ledger.uploads);
    line += ',';
    line += std::to_string(rec.ledger.downloads);
    line += ',';
    line += std::to_string(rec.ledger.rounds);
    line += ',';
    append_double(line, rec.virtual_time);
    os << line << '\n';
  }
  if (!os) throw IoError("CSV write failed: " + path);
}

std::vector<IterationRecord> read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open CSV: " + path);
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader)
    throw IoError("unexpected CSV header in " + path);

  std::vector<IterationRecord> records;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    IterationRecord rec;
    auto next = [&]() -> std::string {
      if (!std::getline(ss, field, ','))
        throw IoError("short CSV row in " + path);
      return field;
    };
    rec.t = std::strtol(next().c_str(), nullptr, 10);
    rec.objective = std::strtod(next().c_str(), nullptr);
    rec.f_value = std::strtod(next().c_str(), nullptr);
    rec.pg_norm = std::strtod(next().c_str(), nullptr);
    rec.delta_norm = std::strtod(next().c_str(), nullptr);
    rec.ledger.uploads = std::strtol(next().c_str(), nullptr, 10);
    rec.ledger.downloads = std::strtol(next().c_str(), nullptr, 10);
    rec.ledger.rounds = std::strtol(next().c_str(), nullptr, 10);
    rec.virtual_time = std::strtod(next().c_str(), nullptr);
    records.push_back(rec);
  }
  return records;
}

}  // namespace edanni
