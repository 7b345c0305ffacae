#include "cashband/io.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace cashband {

namespace {

using nlohmann::json;

json parse_text(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError(std::string("malformed JSON in ") + what);
  return j;
}

void expect_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (item.key() == a) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("unknown key '" + item.key() + "' in " + section);
  }
}

double need_num(const json& j, const char* section, const char* key) {
  if (!j.contains(key))
    throw ConfigError(std::string("missing key '") + key + "' in " + section);
  const json& v = j.at(key);
  if (!v.is_number())
    throw ConfigError(std::string("key '") + key + "' in " + section + " must be a number");
  return v.get<double>();
}

double opt_num(const json& j, const char* section, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number())
    throw ConfigError(std::string("key '") + key + "' in " + section + " must be a number");
  return v.get<double>();
}

std::int64_t opt_int(const json& j, const char* section, const char* key, std::int64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer())
    throw ConfigError(std::string("key '") + key + "' in " + section + " must be an integer");
  return v.get<std::int64_t>();
}

bool opt_bool(const json& j, const char* section, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean())
    throw ConfigError(std::string("key '") + key + "' in " + section + " must be a boolean");
  return v.get<bool>();
}

ModelParams parse_model(const json& j) {
  expect_keys(j, "model",
              {"rho", "sigma", "kappa", "c_neg", "c_pos", "l_cost", "u_cost", "alpha", "eta"});
  ModelParams p;
  p.rho = need_num(j, "model", "rho");
  p.sigma = need_num(j, "model", "sigma");
  p.kappa = need_num(j, "model", "kappa");
  p.c_neg = need_num(j, "model", "c_neg");
  p.c_pos = need_num(j, "model", "c_pos");
  p.l_cost = need_num(j, "model", "l_cost");
  p.u_cost = need_num(j, "model", "u_cost");
  const bool has_alpha = j.contains("alpha");
  const bool has_eta = j.contains("eta");
  if (has_alpha == has_eta)
    throw ConfigError("model needs exactly one of 'alpha' or 'eta'");
  p.diffusion = has_alpha ? DiffusionSpec::abm(need_num(j, "model", "alpha"))
                          : DiffusionSpec::ou(need_num(j, "model", "eta"));
  p.validate();
  return p;
}

SolverConfig parse_solver(const json& j) {
  expect_keys(j, "solver", {"newton_tol", "max_iters", "damping", "scan_grid", "fd_step"});
  SolverConfig c;
  c.newton_tol = opt_num(j, "solver", "newton_tol", c.newton_tol);
  c.max_iters = static_cast<int>(opt_int(j, "solver", "max_iters", c.max_iters));
  c.damping = opt_num(j, "solver", "damping", c.damping);
  c.scan_grid = static_cast<int>(opt_int(j, "solver", "scan_grid", c.scan_grid));
  c.fd_step = opt_num(j, "solver", "fd_step", c.fd_step);
  c.validate();
  return c;
}

GeneratorMode parse_mode(const std::string& name) {
  if (name == "worst_case") return GeneratorMode::WorstCase;
  if (name == "fixed_minus") return GeneratorMode::FixedMinus;
  if (name == "fixed_reference") return GeneratorMode::FixedReference;
  if (name == "fixed_plus") return GeneratorMode::FixedPlus;
  throw ConfigError("unknown simulation mode '" + name + "'");
}

void parse_simulation(const json& j, SimConfig& cfg, GeneratorMode& mode) {
  expect_keys(j, "simulation", {"n_paths", "dt", "horizon", "seed", "x0", "mode"});
  cfg.n_paths = opt_int(j, "simulation", "n_paths", cfg.n_paths);
  cfg.dt = opt_num(j, "simulation", "dt", cfg.dt);
  cfg.horizon = opt_num(j, "simulation", "horizon", cfg.horizon);
  if (j.contains("seed")) {
    const json& v = j.at("seed");
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0 &&
                                   !v.is_number_unsigned()))
      throw ConfigError("key 'seed' in simulation must be a non-negative integer");
    cfg.seed = v.get<std::uint64_t>();
  }
  cfg.x0 = opt_num(j, "simulation", "x0", cfg.x0);
  if (j.contains("mode")) {
    const json& v = j.at("mode");
    if (!v.is_string()) throw ConfigError("key 'mode' in simulation must be a string");
    mode = parse_mode(v.get<std::string>());
  }
}

std::vector<double> parse_grid(const json& g) {
  std::vector<double> grid;
  if (g.is_array()) {
    for (const json& v : g) {
      if (!v.is_number()) throw ConfigError("sweep grid entries must be numbers");
      grid.push_back(v.get<double>());
    }
    return grid;
  }
  expect_keys(g, "sweep grid", {"lo", "hi", "count"});
  const double lo = need_num(g, "sweep grid", "lo");
  const double hi = need_num(g, "sweep grid", "hi");
  const auto count = opt_int(g, "sweep grid", "count", 2);
  if (count < 1) throw ConfigError("sweep grid count must be at least 1");
  if (count == 1) return {lo};
  for (std::int64_t i = 0; i < count; ++i)
    grid.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  return grid;
}

SweepSpec parse_sweep(const json& j, const ModelParams& base) {
  expect_keys(j, "sweep", {"axis", "grid", "overlays", "warm_start", "verify_rows"});
  SweepSpec spec;
  spec.base = base;
  if (!j.contains("axis") || !j.at("axis").is_string())
    throw ConfigError("sweep needs a string 'axis'");
  spec.axis = j.at("axis").get<std::string>();
  if (!j.contains("grid")) throw ConfigError("sweep needs a 'grid'");
  spec.grid = parse_grid(j.at("grid"));
  if (j.contains("overlays")) {
    const json& arr = j.at("overlays");
    if (!arr.is_array()) throw ConfigError("sweep overlays must be an array");
    for (const json& o : arr) {
      expect_keys(o, "sweep overlay", {"parameter", "value"});
      if (!o.contains("parameter") || !o.at("parameter").is_string())
        throw ConfigError("sweep overlay needs a string 'parameter'");
      SweepOverlay overlay;
      overlay.parameter = o.at("parameter").get<std::string>();
      overlay.value = need_num(o, "sweep overlay", "value");
      spec.overlays.push_back(std::move(overlay));
    }
  }
  spec.warm_start = opt_bool(j, "sweep", "warm_start", spec.warm_start);
  spec.verify_rows = opt_bool(j, "sweep", "verify_rows", spec.verify_rows);
  spec.validate();
  return spec;
}

json model_to_json(const ModelParams& p) {
  json j;
  j["rho"] = p.rho;
  j["sigma"] = p.sigma;
  j["kappa"] = p.kappa;
  j["c_neg"] = p.c_neg;
  j["c_pos"] = p.c_pos;
  j["l_cost"] = p.l_cost;
  j["u_cost"] = p.u_cost;
  if (p.is_ou())
    j["eta"] = p.diffusion.eta;
  else
    j["alpha"] = p.diffusion.alpha;
  return j;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  const json j = parse_text(text, "config");
  expect_keys(j, "config", {"model", "solver", "simulation", "sweep"});
  RunConfig rc;
  if (j.contains("model")) rc.model = parse_model(j.at("model"));
  if (j.contains("solver")) rc.solver = parse_solver(j.at("solver"));
  if (j.contains("simulation")) parse_simulation(j.at("simulation"), rc.simulation, rc.mode);
  if (j.contains("sweep")) {
    if (!rc.model) throw ConfigError("sweep section requires a model section");
    rc.sweep = parse_sweep(j.at("sweep"), *rc.model);
  }
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string solution_to_json(const BandSolution& sol) {
  json j;
  j["model"] = model_to_json(sol.params);
  j["x_lower"] = sol.x_lower;
  j["x_star"] = sol.x_star;
  j["x_upper"] = sol.x_upper;
  j["coeff_a"] = sol.coeff_a;
  j["coeff_b"] = sol.coeff_b;
  j["coeff_c"] = sol.coeff_c;
  j["coeff_d"] = sol.coeff_d;
  j["residual_norm"] = sol.residual_norm;
  j["iterations"] = sol.iterations;
  j["j_at_origin"] = sol.cost(0.0).value;
  return j.dump(2) + "\n";
}

BandSolution solution_from_json(const std::string& text) {
  const json j = parse_text(text, "solution");
  expect_keys(j, "solution",
              {"model", "x_lower", "x_star", "x_upper", "coeff_a", "coeff_b", "coeff_c",
               "coeff_d", "residual_norm", "iterations", "j_at_origin"});
  BandSolution sol;
  if (!j.contains("model")) throw ConfigError("solution file lacks a model section");
  sol.params = parse_model(j.at("model"));
  sol.x_lower = need_num(j, "solution", "x_lower");
  sol.x_star = need_num(j, "solution", "x_star");
  sol.x_upper = need_num(j, "solution", "x_upper");
  sol.coeff_a = need_num(j, "solution", "coeff_a");
  sol.coeff_b = need_num(j, "solution", "coeff_b");
  sol.coeff_c = need_num(j, "solution", "coeff_c");
  sol.coeff_d = need_num(j, "solution", "coeff_d");
  sol.residual_norm = opt_num(j, "solution", "residual_norm", 0.0);
  sol.iterations = static_cast<int>(opt_int(j, "solution", "iterations", 0));
  sol.assets = ModelAssets::build(sol.params, default_working_interval(sol.params));
  return sol;
}

BandSolution load_solution(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read solution file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return solution_from_json(buf.str());
}

void write_path_csv(const PathRecord& rec, std::ostream& out) {
  out << "t,x,dl,du\n";
  char buf[140];
  for (std::size_t k = 0; k < rec.t.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g\n", rec.t[k], rec.x[k], rec.dl[k],
                  rec.du[k]);
    out << buf;
  }
}

}  // namespace cashband
