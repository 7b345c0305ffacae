#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "cashband/model.hpp"
#include "cashband/solver.hpp"

namespace cashband {

// One variant computed at every grid point, e.g. {"kappa", 0.5}.
struct SweepOverlay {
  std::string parameter;
  double value = 0.0;
};

// Comparative-statics run: `axis` is adjusted along `grid` once per overlay
// variant of the base parameters, or once for the base set alone when no
// overlays are given.  Adjustable names: sigma, kappa, alpha, c_neg, c_pos,
// l_cost, u_cost.
struct SweepSpec {
  ModelParams base;
  std::string axis;
  std::vector<double> grid;  // strictly increasing
  std::vector<SweepOverlay> overlays;
  bool warm_start = true;   // init each solve from the previous grid point
  bool verify_rows = true;  // audit every converged row

  void validate() const;  // throws ModelError
};

struct SweepRow {
  std::string overlay_parameter;  // empty when the row comes from the base set
  double overlay_value = 0.0;
  double axis_value = 0.0;
  ModelParams params;
  bool converged = false;
  bool cold_fallback = false;  // warm start failed, cold start succeeded
  bool verified = false;
  double x_lower = 0.0;
  double x_star = 0.0;
  double x_upper = 0.0;
  // minimal cost at {x_lower, x_lower/2, 0, x_upper/2, x_upper}
  std::array<double, 5> j_probes{};
  double residual_norm = 0.0;
  std::string message;  // diagnostic for rows that failed
};

// Solves every (overlay, grid point) combination in deterministic order:
// overlays outermost, grid points in sequence.  Failures are recorded on the
// row and never abort the sweep.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, const SolverConfig& solver = {});

// Header plus one line per row; floats carry 9 significant digits.
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

}  // namespace cashband
