#include "cashband/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "cashband/verifier.hpp"

namespace cashband {

namespace {

const char* const kAdjustable[] = {"sigma", "kappa", "alpha", "c_neg",
                                   "c_pos", "l_cost", "u_cost"};

bool known_parameter(const std::string& name) {
  for (const char* k : kAdjustable)
    if (name == k) return true;
  return false;
}

void set_parameter(ModelParams& p, const std::string& name, double v) {
  if (name == "sigma") {
    p.sigma = v;
  } else if (name == "kappa") {
    p.kappa = v;
  } else if (name == "alpha") {
    if (p.is_ou()) throw ModelError("alpha only applies to the constant-drift model");
    p.diffusion.alpha = v;
  } else if (name == "c_neg") {
    p.c_neg = v;
  } else if (name == "c_pos") {
    p.c_pos = v;
  } else if (name == "l_cost") {
    p.l_cost = v;
  } else if (name == "u_cost") {
    p.u_cost = v;
  } else {
    throw ModelError("unknown sweep parameter: " + name);
  }
}

SweepRow solve_row(const ModelParams& p, const SolverConfig& solver, bool verify_row,
                   std::optional<std::array<double, 3>>& warm) {
  SweepRow row;
  row.params = p;
  try {
    BandSolution sol;
    if (warm) {
      try {
        sol = solve_band(p, solver, warm);
      } catch (const std::exception&) {
        sol = solve_band(p, solver);
        row.cold_fallback = true;
      }
    } else {
      sol = solve_band(p, solver);
    }
    row.converged = true;
    row.x_lower = sol.x_lower;
    row.x_star = sol.x_star;
    row.x_upper = sol.x_upper;
    row.residual_norm = sol.residual_norm;
    const double probes[5] = {sol.x_lower, 0.5 * sol.x_lower, 0.0, 0.5 * sol.x_upper,
                              sol.x_upper};
    for (int i = 0; i < 5; ++i) row.j_probes[static_cast<std::size_t>(i)] = sol.cost(probes[i]).value;
    warm = std::array<double, 3>{sol.x_lower, sol.x_star, sol.x_upper};
    if (verify_row) row.verified = verify(sol, 1001, VerifyTolerances::uniform(1e-6)).pass;
  } catch (const std::exception& e) {
    row.converged = false;
    row.message = e.what();
    const double nan = std::nan("");
    row.x_lower = row.x_star = row.x_upper = nan;
    row.j_probes.fill(nan);
    row.residual_norm = nan;
    warm.reset();  // do not chain a failed point into the next solve
  }
  return row;
}

void put_float(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  out << buf;
}

}  // namespace

void SweepSpec::validate() const {
  if (!known_parameter(axis)) throw ModelError("unknown sweep axis: " + axis);
  if (grid.empty()) throw ModelError("sweep grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ModelError("sweep grid must be strictly increasing");
  for (const SweepOverlay& o : overlays)
    if (!known_parameter(o.parameter))
      throw ModelError("unknown overlay parameter: " + o.parameter);
  if (axis == "alpha" && base.is_ou())
    throw ModelError("alpha only applies to the constant-drift model");
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, const SolverConfig& solver) {
  spec.validate();
  solver.validate();
  std::vector<SweepRow> rows;
  const std::size_t n_passes = spec.overlays.empty() ? 1 : spec.overlays.size();
  rows.reserve(n_passes * spec.grid.size());

  for (std::size_t pass = 0; pass < n_passes; ++pass) {
    const SweepOverlay* overlay = spec.overlays.empty() ? nullptr : &spec.overlays[pass];
    std::optional<std::array<double, 3>> warm;
    for (double g : spec.grid) {
      if (!spec.warm_start) warm.reset();
      SweepRow row;
      ModelParams p = spec.base;
      try {
        if (overlay) set_parameter(p, overlay->parameter, overlay->value);
        set_parameter(p, spec.axis, g);
        p.validate();
        row = solve_row(p, solver, spec.verify_rows, warm);
      } catch (const std::exception& e) {
        row.converged = false;
        row.message = e.what();
        row.params = p;
        const double nan = std::nan("");
        row.x_lower = row.x_star = row.x_upper = nan;
        row.j_probes.fill(nan);
        row.residual_norm = nan;
        warm.reset();
      }
      if (overlay) {
        row.overlay_parameter = overlay->parameter;
        row.overlay_value = overlay->value;
      }
      row.axis_value = g;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "axis_value,sigma,kappa,alpha_or_eta,c_neg,c_pos,l_cost,u_cost,"
         "x_lower,x_star,x_upper,j_at_lower,j_at_lower_half,j_at_zero,"
         "j_at_upper_half,j_at_upper,converged,residual_norm\n";
  for (const SweepRow& r : rows) {
    const ModelParams& p = r.params;
    const double drift = p.is_ou() ? p.diffusion.eta : p.diffusion.alpha;
    const double cells[16] = {r.axis_value, p.sigma,      p.kappa,       drift,
                              p.c_neg,      p.c_pos,      p.l_cost,      p.u_cost,
                              r.x_lower,    r.x_star,     r.x_upper,     r.j_probes[0],
                              r.j_probes[1], r.j_probes[2], r.j_probes[3], r.j_probes[4]};
    for (double v : cells) {
      put_float(out, v);
      out << ',';
    }
    out << (r.converged ? 1 : 0) << ',';
    put_float(out, r.residual_norm);
    out << '\n';
  }
}

}  // namespace cashband
