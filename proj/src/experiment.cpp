#include "edanni/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

#include "edanni/master_solver.hpp"
#include "edanni/telemetry.hpp"

namespace edanni {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int log_level() {
  static int level = [] {
    const char* env = std::getenv("EDANNI_LOG");
    if (!env) return 1;
    const std::string v(env);
    if (v == "quiet") return 0;
    if (v == "debug") return 2;
    return 1;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[edanni] " << msg << "\n";
}

template <typename T>
T require_field(const json& j, const char* field, const char* ctx) {
  if (!j.contains(field))
    throw InvalidSpecError(std::string(ctx) + ": missing required field '" +
                           field + "'");
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    throw InvalidSpecError(std::string(ctx) + ": bad value for '" + field +
                           "': " + e.what());
  }
}

template <typename T>
T optional_field(const json& j, const char* field, T fallback,
                 const char* ctx) {
  if (!j.contains(field)) return fallback;
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    throw InvalidSpecError(std::string(ctx) + ": bad value for '" + field +
                           "': " + e.what());
  }
}

ProblemSpecAny parse_problem(const json& j) {
  ProblemSpecAny out;
  const auto type = require_field<std::string>(j, "type", "problem");
  if (type == "lasso") {
    out.kind = ProblemKind::Lasso;
    auto& s = out.lasso;
    s.m = require_field<int>(j, "m", "lasso problem");
    s.n = require_field<int>(j, "n", "lasso problem");
    s.p = require_field<int>(j, "p", "lasso problem");
    s.s = require_field<int>(j, "s", "lasso problem");
    s.theta = require_field<double>(j, "theta", "lasso problem");
    s.noise_std = optional_field<double>(j, "noise_std", 0.1, "lasso problem");
    s.covariance_decay =
        optional_field<double>(j, "covariance_decay", 0.5, "lasso problem");
    s.seed = require_field<std::uint64_t>(j, "seed", "lasso problem");
    s.validate();
  } else if (type == "spca") {
    out.kind = ProblemKind::Spca;
    auto& s = out.spca;
    s.m = require_field<int>(j, "m", "spca problem");
    s.n = require_field<int>(j, "n", "spca problem");
    s.p = require_field<int>(j, "p", "spca problem");
    s.q = require_field<int>(j, "q", "spca problem");
    s.nnz = require_field<int>(j, "nnz", "spca problem");
    s.theta = require_field<double>(j, "theta", "spca problem");
    s.seed = require_field<std::uint64_t>(j, "seed", "spca problem");
    s.validate();
  } else if (type == "quad") {
    out.kind = ProblemKind::Quad;
    auto& s = out.quad;
    s.m = require_field<int>(j, "m", "quad problem");
    s.p = require_field<int>(j, "p", "quad problem");
    s.sigma2 = require_field<double>(j, "sigma2", "quad problem");
    s.seed = require_field<std::uint64_t>(j, "seed", "quad problem");
    s.validate();
  } else {
    throw InvalidSpecError("problem: unknown type '" + type +
                           "' (expected lasso, spca or quad)");
  }
  return out;
}

ArrivalModel parse_arrival(const json& j, int tau, const std::string& run) {
  ArrivalModel model;
  model.tau = tau;
  const auto ctx = run + ".arrival";
  const auto kind = require_field<std::string>(j, "kind", ctx.c_str());
  if (kind == "synchronous") {
    model.kind = ArrivalModel::Kind::Synchronous;
  } else if (kind == "bernoulli") {
    model.kind = ArrivalModel::Kind::Bernoulli;
    model.probs =
        require_field<std::vector<double>>(j, "probs", ctx.c_str());
    model.seed = require_field<std::uint64_t>(j, "seed", ctx.c_str());
  } else if (kind == "speed_driven") {
    model.kind = ArrivalModel::Kind::SpeedDriven;
    model.seed = require_field<std::uint64_t>(j, "seed", ctx.c_str());
  } else {
    throw InvalidSpecError(ctx + ": unknown kind '" + kind + "'");
  }
  return model;
}

RunConfig parse_run(const json& j) {
  RunConfig config;
  config.name = require_field<std::string>(j, "name", "run");
  const std::string ctx = "run '" + config.name + "'";

  const auto algo = require_field<std::string>(j, "algorithm", ctx.c_str());
  if (algo == "edanni")
    config.algorithm = Algorithm::Edanni;
  else if (algo == "ps")
    config.algorithm = Algorithm::ProxGradPS;
  else
    throw InvalidSpecError(ctx + ": unknown algorithm '" + algo +
                           "' (expected edanni or ps)");

  config.rho = require_field<double>(j, "rho", ctx.c_str());
  config.tau = optional_field<int>(j, "tau", 0, ctx.c_str());
  config.max_rounds = require_field<long>(j, "max_rounds", ctx.c_str());
  config.target_pg_norm =
      require_field<double>(j, "target_pg_norm", ctx.c_str());
  config.seed = require_field<std::uint64_t>(j, "seed", ctx.c_str());
  config.inner_tol = optional_field<double>(j, "inner_tol", 1e-10, ctx.c_str());
  config.inner_max_iter =
      optional_field<long>(j, "inner_max_iter", 200000L, ctx.c_str());
  config.master_cost =
      optional_field<double>(j, "master_cost", 0.0, ctx.c_str());

  if (!j.contains("arrival"))
    throw InvalidSpecError(ctx + ": missing required field 'arrival'");
  config.arrival = parse_arrival(j.at("arrival"), config.tau, config.name);

  if (j.contains("inexact")) {
    const auto& ij = j.at("inexact");
    config.inexact.c1 =
        optional_field<double>(ij, "c1", 0.0, ctx.c_str());
    if (config.inexact.c1 < 0)
      throw InvalidSpecError(ctx + ": inexact.c1 must be >= 0");
    if (config.inexact.c1 > 0) {
      config.inexact.mode = InexactnessSpec::Mode::InjectedNoise;
      config.inexact.seed =
          require_field<std::uint64_t>(ij, "seed", ctx.c_str());
    }
  }

  if (j.contains("x0")) {
    const auto& xj = j.at("x0");
    const auto mode = require_field<std::string>(xj, "mode", ctx.c_str());
    if (mode == "zeros") {
      config.x0.mode = X0Spec::Mode::Zeros;
    } else if (mode == "random_unit") {
      config.x0.mode = X0Spec::Mode::RandomUnit;
      config.x0.scale = optional_field<double>(xj, "scale", 1.0, ctx.c_str());
      config.x0.seed = require_field<std::uint64_t>(xj, "seed", ctx.c_str());
    } else if (mode == "explicit") {
      config.x0.mode = X0Spec::Mode::Explicit;
      const auto values =
          require_field<std::vector<double>>(xj, "values", ctx.c_str());
      config.x0.values =
          Eigen::Map<const Vector>(values.data(), Eigen::Index(values.size()));
    } else {
      throw InvalidSpecError(ctx + ": unknown x0 mode '" + mode + "'");
    }
  }
  return config;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["name"] = c.name;
  j["algorithm"] = c.algorithm == Algorithm::Edanni ? "edanni" : "ps";
  j["rho"] = c.rho;
  j["tau"] = c.tau;
  j["max_rounds"] = c.max_rounds;
  j["target_pg_norm"] = c.target_pg_norm;
  j["seed"] = c.seed;
  j["inner_tol"] = c.inner_tol;
  j["inner_max_iter"] = c.inner_max_iter;
  j["master_cost"] = c.master_cost;
  j["inexact_c1"] = c.inexact.c1;
  switch (c.arrival.kind) {
    case ArrivalModel::Kind::Synchronous:
      j["arrival"] = "synchronous";
      break;
    case ArrivalModel::Kind::Bernoulli:
      j["arrival"] = "bernoulli";
      j["arrival_probs"] = c.arrival.probs;
      j["arrival_seed"] = c.arrival.seed;
      break;
    case ArrivalModel::Kind::SpeedDriven:
      j["arrival"] = "speed_driven";
      j["arrival_seed"] = c.arrival.seed;
      break;
  }
  return j;
}

std::string dataset_path(const ExperimentSpec& spec, const std::string& dir) {
  return (fs::path(dir) / (spec.name + ".dataset")).string();
}

json problem_to_json(const ProblemSpecAny& p) {
  json j;
  switch (p.kind) {
    case ProblemKind::Lasso:
      j["type"] = "lasso";
      j["m"] = p.lasso.m;
      j["n"] = p.lasso.n;
      j["p"] = p.lasso.p;
      j["s"] = p.lasso.s;
      j["theta"] = p.lasso.theta;
      j["noise_std"] = p.lasso.noise_std;
      j["covariance_decay"] = p.lasso.covariance_decay;
      j["seed"] = p.lasso.seed;
      break;
    case ProblemKind::Spca:
      j["type"] = "spca";
      j["m"] = p.spca.m;
      j["n"] = p.spca.n;
      j["p"] = p.spca.p;
      j["q"] = p.spca.q;
      j["nnz"] = p.spca.nnz;
      j["theta"] = p.spca.theta;
      j["seed"] = p.spca.seed;
      break;
    case ProblemKind::Quad:
      j["type"] = "quad";
      j["m"] = p.quad.m;
      j["p"] = p.quad.p;
      j["sigma2"] = p.quad.sigma2;
      j["seed"] = p.quad.seed;
      break;
  }
  return j;
}

}  // namespace

int ProblemSpecAny::machines() const {
  switch (kind) {
    case ProblemKind::Lasso:
      return lasso.m;
    case ProblemKind::Spca:
      return spca.m;
    case ProblemKind::Quad:
      return quad.m;
  }
  return 0;
}

ExperimentSpec parse_experiment(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidSpecError(std::string("spec is not valid JSON: ") + e.what());
  }
  ExperimentSpec spec;
  spec.name = require_field<std::string>(j, "name", "experiment");
  spec.output_dir =
      optional_field<std::string>(j, "output_dir", ".", "experiment");
  if (!j.contains("problem"))
    throw InvalidSpecError("experiment: missing required field 'problem'");
  spec.problem = parse_problem(j.at("problem"));

  if (j.contains("runs")) {
    std::set<std::string> names;
    for (const auto& rj : j.at("runs")) {
      RunConfig config = parse_run(rj);
      if (!names.insert(config.name).second)
        throw InvalidSpecError("experiment: duplicate run name '" +
                               config.name + "'");
      try {
        config.validate(spec.problem.machines());
      } catch (const Error& e) {
        throw InvalidSpecError("run '" + config.name + "': " + e.what());
      }
      spec.runs.push_back(std::move(config));
    }
  }
  return spec;
}

ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidSpecError("cannot open spec file: " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return parse_experiment(text);
}

ProblemInstance instantiate_problem(const ProblemSpecAny& spec,
                                    const std::string&) {
  ProblemInstance problem;
  switch (spec.kind) {
    case ProblemKind::Lasso: {
      LassoDataset data = generate_lasso_dataset(spec.lasso);
      problem.reg = Regularizer::l1(spec.lasso.theta);
      problem.losses = make_losses(data);
      break;
    }
    case ProblemKind::Spca: {
      SpcaDataset data = generate_spca_dataset(spec.spca);
      problem.losses = make_losses(data);
      problem.reg = Regularizer::l1_ball(spec.spca.theta, 1.0);
      break;
    }
    case ProblemKind::Quad: {
      QuadDataset data = generate_quad_dataset(spec.quad);
      problem.losses = make_losses(data);
      problem.reg = Regularizer::none();
      break;
    }
  }
  return problem;
}

namespace {

// Loads the saved container when present so runs replay the exact bytes;
// falls back to in-memory generation.
ProblemInstance problem_for_runs(const ExperimentSpec& spec,
                                 const std::string& out_dir) {
  const std::string path = dataset_path(spec, out_dir);
  if (fs::exists(path)) {
    log_info("loading dataset " + path);
    switch (spec.problem.kind) {
      case ProblemKind::Lasso: {
        LassoDataset data = load_lasso_dataset(path, spec.problem.lasso);
        return {make_losses(data), Regularizer::l1(spec.problem.lasso.theta)};
      }
      case ProblemKind::Spca: {
        SpcaDataset data = load_spca_dataset(path, spec.problem.spca);
        return {make_losses(data),
                Regularizer::l1_ball(spec.problem.spca.theta, 1.0)};
      }
      case ProblemKind::Quad: {
        QuadDataset data = load_quad_dataset(path, spec.problem.quad);
        return {make_losses(data), Regularizer::none()};
      }
    }
  }
  log_info("generating problem instance in memory");
  return instantiate_problem(spec.problem, out_dir);
}

void apply_overrides(ExperimentSpec& spec, const CliOverrides& overrides) {
  if (overrides.output_dir) spec.output_dir = *overrides.output_dir;
  for (auto& run : spec.runs) {
    if (overrides.max_rounds) run.max_rounds = *overrides.max_rounds;
    if (overrides.target_pg_norm) run.target_pg_norm = *overrides.target_pg_norm;
  }
}

}  // namespace

int cmd_generate(const std::string& spec_path, const CliOverrides& overrides) {
  ExperimentSpec spec;
  try {
    spec = load_experiment(spec_path);
    apply_overrides(spec, overrides);
  } catch (const InvalidSpecError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return 2;
  }
  try {
    fs::create_directories(spec.output_dir);
    const std::string path = dataset_path(spec, spec.output_dir);
    switch (spec.problem.kind) {
      case ProblemKind::Lasso:
        save_dataset(path, generate_lasso_dataset(spec.problem.lasso));
        break;
      case ProblemKind::Spca:
        save_dataset(path, generate_spca_dataset(spec.problem.spca));
        break;
      case ProblemKind::Quad:
        save_dataset(path, generate_quad_dataset(spec.problem.quad));
        break;
    }
    std::ofstream side(path + ".json", std::ios::trunc);
    json sidecar;
    sidecar["name"] = spec.name;
    sidecar["problem"] = problem_to_json(spec.problem);
    side << sidecar.dump(2) << "\n";
    if (!side) throw IoError("cannot write sidecar for " + path);
    log_info("wrote " + path + " (+ sidecar)");
  } catch (const InvalidSpecError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "generate failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_run(const std::string& spec_path, const CliOverrides& overrides) {
  ExperimentSpec spec;
  try {
    spec = load_experiment(spec_path);
    apply_overrides(spec, overrides);
  } catch (const InvalidSpecError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return 2;
  }

  ProblemInstance problem;
  try {
    fs::create_directories(spec.output_dir);
    problem = problem_for_runs(spec, spec.output_dir);
  } catch (const Error& e) {
    std::cerr << "problem setup failed: " << e.what() << "\n";
    return 1;
  }

  struct Summary {
    std::string name;
    Algorithm algorithm;
    long rounds = 0;
    bool converged = false;
    bool failed = false;
    long uploads = 0;
    double mean_utilization = 0.0;
    bool speed_driven = false;
  };
  std::vector<Summary> summaries;
  bool any_failed = false;

  for (const auto& config : spec.runs) {
    Summary summary;
    summary.name = config.name;
    summary.algorithm = config.algorithm;
    summary.speed_driven =
        config.arrival.kind == ArrivalModel::Kind::SpeedDriven;
    const auto started = std::chrono::steady_clock::now();
    try {
      EventLog log;
      RunResult result = config.algorithm == Algorithm::Edanni
                             ? run_edanni(problem, config, &log)
                             : run_proxgrad_ps(problem, config, &log);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        started)
              .count();

      const fs::path base = fs::path(spec.output_dir) / config.name;
      emit_csv(result.records, base.string() + ".csv");
      log.save(base.string() + ".events");

      json manifest;
      manifest["experiment"] = spec.name;
      manifest["config"] = config_to_json(config);
      manifest["rounds"] = result.rounds;
      manifest["converged"] = result.converged;
      manifest["final_pg_norm"] = result.final_pg_norm;
      manifest["wall_time_s"] = wall;
      manifest["effective_rho"] = result.effective_rho;
      manifest["ledger"] = {{"uploads", result.ledger.uploads},
                            {"downloads", result.ledger.downloads},
                            {"rounds", result.ledger.rounds}};
      manifest["rho_conditions_pass"] = result.rho_validation.pass;
      if (!result.records.empty())
        manifest["virtual_time"] = result.records.back().virtual_time;
      std::vector<double> utils;
      for (int w = 0; w < int(result.time_table.compute_time.size()); ++w)
        utils.push_back(result.time_table.utilization(w));
      manifest["utilization"] = utils;
      manifest["mean_utilization"] = result.time_table.mean_utilization();
      std::ofstream mf(base.string() + ".manifest.json", std::ios::trunc);
      mf << manifest.dump(2) << "\n";
      if (!mf) throw IoError("cannot write manifest for " + config.name);

      summary.rounds = result.rounds;
      summary.converged = result.converged;
      summary.uploads = result.ledger.uploads;
      summary.mean_utilization = result.time_table.mean_utilization();
      log_info("run '" + config.name + "': rounds=" +
               std::to_string(result.rounds) +
               (result.converged ? "" : " (target not reached)"));
    } catch (const Error& e) {
      std::cerr << "run '" << config.name << "' failed: " << e.what() << "\n";
      summary.failed = true;
      any_failed = true;
    }
    summaries.push_back(summary);
  }

  // Rounds-to-target normalized to the first converged reference run.
  long baseline = 0;
  for (const auto& s : summaries)
    if (!s.failed && s.converged && s.algorithm == Algorithm::Edanni) {
      baseline = s.rounds;
      break;
    }
  std::printf("%-24s %-8s %10s %10s %10s\n", "run", "algo", "rounds",
              "uploads", "ratio");
  for (const auto& s : summaries) {
    if (s.failed) {
      std::printf("%-24s %-8s %10s %10s %10s\n", s.name.c_str(), "-", "failed",
                  "-", "-");
      continue;
    }
    std::string rounds = std::to_string(s.rounds);
    if (!s.converged) rounds += "*";
    std::string ratio = "-";
    if (baseline > 0 && s.converged) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f",
                    double(s.rounds) / double(baseline));
      ratio = buf;
    }
    std::printf("%-24s %-8s %10s %10ld %10s\n", s.name.c_str(),
                s.algorithm == Algorithm::Edanni ? "edanni" : "ps",
                rounds.c_str(), s.uploads, ratio.c_str());
  }
  bool any_speed = false;
  for (const auto& s : summaries) any_speed |= s.speed_driven && !s.failed;
  if (any_speed) {
    std::printf("\ntime table (virtual clock)\n%-24s %18s\n", "run",
                "mean utilization");
    for (const auto& s : summaries)
      if (s.speed_driven && !s.failed)
        std::printf("%-24s %18.4f\n", s.name.c_str(), s.mean_utilization);
  }
  if (baseline == 0)
    std::printf("(* = target not reached; no converged reference run for "
                "ratios)\n");

  return any_failed ? 1 : 0;
}

int cmd_validate(const std::string& spec_path, const CliOverrides& overrides) {
  ExperimentSpec spec;
  try {
    spec = load_experiment(spec_path);
    apply_overrides(spec, overrides);
  } catch (const InvalidSpecError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return 2;
  }

  ProblemInstance problem;
  try {
    problem = problem_for_runs(spec, spec.output_dir);
  } catch (const Error& e) {
    std::cerr << "problem setup failed: " << e.what() << "\n";
    return 2;
  }
  const double L = problem.losses.max_lipschitz();
  const double sigma2 = problem.losses.min_strong_convexity();
  const double mu_h = problem.reg.convex_modulus;

  std::printf("L = %.6g, sigma2 = %.6g\n", L, sigma2);
  for (const auto& config : spec.runs) {
    double rho = config.rho;
    if (config.algorithm == Algorithm::ProxGradPS && rho <= 0) rho = L;
    const RhoValidation rv =
        validate_rho(L, config.tau, mu_h, rho, 1.0, config.inexact.c1);
    std::printf("%-24s rho=%-10.4g descent conditions: %s (advisory)\n",
                config.name.c_str(), rho,
                (config.inexact.c1 > 0 ? rv.pass_inexact : rv.pass) ? "PASS"
                                                                    : "FAIL");
    if (sigma2 > 0) {
      const double delta1 = default_delta1(L, rho, sigma2);
      const LinearRateValidation lv = validate_linear_rate_conditions(
          L, sigma2, config.tau, rho, 1.0, delta1, config.inexact.c1);
      std::printf("%-24s linear-rate conditions: %s (eta=%.8g)\n", "",
                  (config.inexact.c1 > 0 ? lv.pass_inexact : lv.pass)
                      ? "PASS"
                      : "FAIL",
                  lv.eta);
    } else {
      std::printf("%-24s linear-rate conditions: inapplicable (sigma2=0)\n",
                  "");
    }
  }
  return 0;
}

}  // namespace edanni
