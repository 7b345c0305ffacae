#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "cashband/model.hpp"
#include "cashband/simulator.hpp"
#include "cashband/solver.hpp"
#include "cashband/sweep.hpp"

namespace cashband {

// configuration and solution file problems (missing file, malformed JSON,
// unknown or missing keys, wrong value types)
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One configuration document with optional sections {model, solver,
// simulation, sweep}.  Unknown keys are rejected at every level.  Absent
// solver/simulation sections fall back to defaults; a sweep section requires
// the model section for its base parameters.
struct RunConfig {
  std::optional<ModelParams> model;
  SolverConfig solver;
  SimConfig simulation;
  GeneratorMode mode = GeneratorMode::WorstCase;
  std::optional<SweepSpec> sweep;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Solution files embed the model parameters, so they round-trip on their
// own; reading one rebuilds the model assets for evaluation.
std::string solution_to_json(const BandSolution& sol);
BandSolution solution_from_json(const std::string& json_text);
BandSolution load_solution(const std::string& path);

// columns t,x,dl,du with 9 significant digits
void write_path_csv(const PathRecord& rec, std::ostream& out);

}  // namespace cashband
