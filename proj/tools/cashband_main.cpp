#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "cashband/io.hpp"
#include "cashband/simulator.hpp"
#include "cashband/solver.hpp"
#include "cashband/sweep.hpp"
#include "cashband/verifier.hpp"

using namespace cashband;

namespace {

struct CliOptions {
  std::string config;
  std::string out;
  int threads = 0;  // 0 = use hardware concurrency
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
};

int worker_count(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write output file: " + path);
  f << text;
  if (!f) throw ConfigError("failed while writing: " + path);
}

SolverConfig solver_from(const RunConfig& rc, const CliOptions& o) {
  SolverConfig sc = rc.solver;
  if (o.tol) sc.newton_tol = *o.tol;
  return sc;
}

int run_solve(const CliOptions& o) {
  const RunConfig rc = load_run_config(o.config);
  if (!rc.model) throw ConfigError("solve requires a model section");
  const BandSolution sol = solve_band(*rc.model, solver_from(rc, o));
  const std::string text = solution_to_json(sol);
  std::cout << text;
  if (!o.out.empty()) write_text_file(o.out, text);
  return 0;
}

void print_condition(const char* name, const ConditionCheck& c) {
  std::printf("%-18s %s  worst %.3e at %.9g\n", name, c.pass ? "PASS" : "FAIL", c.worst,
              c.location);
}

int run_verify(const CliOptions& o) {
  BandSolution sol;
  if (!o.out.empty()) {
    sol = load_solution(o.out);
  } else {
    const RunConfig rc = load_run_config(o.config);
    if (!rc.model) throw ConfigError("verify requires a model section");
    sol = solve_band(*rc.model, solver_from(rc, o));
  }
  const VerificationReport rep = verify(sol);
  if (!rep.error.empty()) {
    std::printf("audit error: %s\n", rep.error.c_str());
    return 1;
  }
  std::printf("band               %s  [%.9g, %.9g] switch %.9g\n", rep.ordered ? "PASS" : "FAIL",
              sol.x_lower, sol.x_upper, sol.x_star);
  print_condition("equation", rep.equation);
  print_condition("switch_continuity", rep.switch_continuity);
  print_condition("gradient_sign", rep.gradient_sign);
  print_condition("barrier_slope", rep.barrier_slope);
  print_condition("barrier_curvature", rep.barrier_curvature);
  print_condition("convexity", rep.convexity);
  print_condition("pricing_lower", rep.pricing_lower);
  print_condition("pricing_upper", rep.pricing_upper);
  print_condition("transversality", rep.transversality);
  std::printf("overall            %s\n", rep.pass ? "PASS" : "FAIL");
  return rep.pass ? 0 : 1;
}

int run_simulate(const CliOptions& o) {
  const RunConfig rc = load_run_config(o.config);
  if (!rc.model) throw ConfigError("simulate requires a model section");
  SimConfig cfg = rc.simulation;
  if (o.seed) cfg.seed = *o.seed;
  const BandSolution sol = solve_band(*rc.model, solver_from(rc, o));
  const SimEstimate est = simulate_cost(sol, cfg, rc.mode, worker_count(o.threads));
  const double target = sol.cost(cfg.x0).value;
  double z = 0.0;
  if (est.std_error > 0.0)
    z = (est.mean_cost - target) / est.std_error;
  else if (est.mean_cost != target)
    z = std::numeric_limits<double>::infinity();
  std::printf("mean_cost        %.9g\n", est.mean_cost);
  std::printf("std_error        %.9g\n", est.std_error);
  std::printf("mean_l_total     %.9g\n", est.mean_l_total);
  std::printf("mean_u_total     %.9g\n", est.mean_u_total);
  std::printf("truncation_bound %.9g\n", est.truncation_bound);
  std::printf("analytic_cost    %.9g\n", target);
  std::printf("z_score          %.9g\n", z);
  if (!o.out.empty()) {
    std::ofstream f(o.out);
    if (!f) throw ConfigError("cannot write output file: " + o.out);
    write_path_csv(simulate_path(sol, cfg, 0, rc.mode), f);
  }
  return std::fabs(z) <= 3.0 ? 0 : 1;
}

int run_sweep_cmd(const CliOptions& o) {
  const RunConfig rc = load_run_config(o.config);
  if (!rc.sweep) throw ConfigError("sweep requires a sweep section");
  const std::vector<SweepRow> rows = run_sweep(*rc.sweep, solver_from(rc, o));
  if (o.out.empty()) {
    write_sweep_csv(rows, std::cout);
  } else {
    std::ofstream f(o.out);
    if (!f) throw ConfigError("cannot write output file: " + o.out);
    write_sweep_csv(rows, f);
  }
  int failed = 0;
  for (const SweepRow& r : rows)
    if (!r.converged) ++failed;
  if (failed > 0) {
    std::fprintf(stderr, "%d of %zu rows failed\n", failed, rows.size());
    return 5;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimal cash reserve band: solve, verify, simulate, sweep"};
  app.require_subcommand(1);

  CliOptions o;
  auto add_common = [&](const char* name, const char* desc) {
    CLI::App* c = app.add_subcommand(name, desc);
    c->add_option("--config", o.config, "JSON configuration file")->required();
    c->add_option("--out", o.out,
                  "output path; for verify: an existing solution file to audit");
    c->add_option("--threads", o.threads, "worker cap, 0 = hardware concurrency");
    c->add_option("--seed", o.seed, "override the simulation seed");
    c->add_option("--tol", o.tol, "override the solver tolerance");
    return c;
  };
  CLI::App* c_solve = add_common("solve", "compute the optimal control band");
  CLI::App* c_verify = add_common("verify", "audit a band against the optimality conditions");
  CLI::App* c_simulate = add_common("simulate", "Monte Carlo check of the solved band cost");
  CLI::App* c_sweep = add_common("sweep", "comparative statics over a parameter grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_solve->parsed()) return run_solve(o);
    if (c_verify->parsed()) return run_verify(o);
    if (c_simulate->parsed()) return run_simulate(o);
    if (c_sweep->parsed()) return run_sweep_cmd(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const FeasibilityError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const ModelError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const SolveError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const ConstructionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const SimulationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
