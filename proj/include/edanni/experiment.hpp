#pragma once

#include <optional>
#include <string>
#include <vector>

#include "edanni/algorithms.hpp"
#include "edanni/problems.hpp"

namespace edanni {

enum class ProblemKind { Lasso, Spca, Quad };

struct ProblemSpecAny {
  ProblemKind kind = ProblemKind::Lasso;
  LassoGenSpec lasso;
  SpcaGenSpec spca;
  QuadGenSpec quad;

  int machines() const;
};

// One experiment file: a problem plus a list of runs over it. All seeds are
// explicit so any run can be replayed exactly.
struct ExperimentSpec {
  std::string name;
  std::string output_dir = ".";
  ProblemSpecAny problem;
  std::vector<RunConfig> runs;
};

ExperimentSpec load_experiment(const std::string& path);
ExperimentSpec parse_experiment(const std::string& json_text);

// Builds losses + regularizer, loading the dataset container when present
// under dir (otherwise generating in memory).
ProblemInstance instantiate_problem(const ProblemSpecAny& spec,
                                    const std::string& dir);

struct CliOverrides {
  std::optional<std::string> output_dir;
  std::optional<long> max_rounds;
  std::optional<double> target_pg_norm;
};

// Exit codes: 0 ok, 1 at least one run failed, 2 bad spec.
int cmd_generate(const std::string& spec_path, const CliOverrides& overrides);
int cmd_run(const std::string& spec_path, const CliOverrides& overrides);
int cmd_validate(const std::string& spec_path, const CliOverrides& overrides);

}  // namespace edanni
