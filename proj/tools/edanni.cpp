#include <CLI11.hpp>
#include <string>

#include "edanni/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "edanni: asynchronous master/worker optimization simulator.\n"
      "Subcommands take an experiment spec (JSON) describing a problem "
      "instance and a list of runs."};
  app.require_subcommand(1);

  std::string spec_path;
  edanni::CliOverrides overrides;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("spec", spec_path, "experiment spec file (JSON)")
        ->required();
    cmd->add_option("--output-dir", [&](const CLI::results_t& r) {
      overrides.output_dir = r.front();
      return true;
    }, "override the spec's output directory");
    cmd->add_option("--max-rounds", [&](const CLI::results_t& r) {
      overrides.max_rounds = std::stol(r.front());
      return true;
    }, "override every run's round cap");
    cmd->add_option("--target-eps", [&](const CLI::results_t& r) {
      overrides.target_pg_norm = std::stod(r.front());
      return true;
    }, "override every run's stationarity target");
  };

  auto* generate = app.add_subcommand(
      "generate", "generate and persist the problem dataset");
  add_common(generate);
  auto* run = app.add_subcommand(
      "run", "execute every run; write CSVs, event logs and manifests");
  add_common(run);
  auto* validate = app.add_subcommand(
      "validate", "report the descent/rate parameter conditions per run");
  add_common(validate);

  CLI11_PARSE(app, argc, argv);

  if (generate->parsed()) return edanni::cmd_generate(spec_path, overrides);
  if (run->parsed()) return edanni::cmd_run(spec_path, overrides);
  return edanni::cmd_validate(spec_path, overrides);
}
