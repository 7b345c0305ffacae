#pragma once

// Free-boundary solver for the control band: the no-ambiguity two-barrier
// problem and the ambiguous three-unknown problem (lower barrier, drift
// switch point, upper barrier), plus evaluation of the resulting piecewise
// minimal cost function.

#include <array>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cashband/model.hpp"

namespace cashband {

// numerical failure: no bracket found, Newton non-convergence, degenerate system
class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// parameters violate the cost conditions required for band optimality
class FeasibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  double newton_tol = 1e-10;  // infinity-norm target for the residual vector
  int max_iters = 100;
  double damping = 0.5;  // step-scaling factor when a Newton step is rejected, in (0,1]
  int scan_grid = 48;    // coarse bracketing resolution per axis, >= 8
  double fd_step = 1e-6;  // Jacobian finite-difference step scale

  void validate() const;  // throws ModelError
};

// a further converged band found from a different bracket (non-uniqueness report)
struct AlternateBand {
  double x_lower = 0.0;
  double x_star = 0.0;
  double x_upper = 0.0;
  double cost_at_origin = 0.0;
};

struct BandSolution {
  double x_lower = 0.0;
  double x_star = 0.0;  // drift switch point; cost minimizer
  double x_upper = 0.0;
  double coeff_a = 0.0, coeff_b = 0.0;  // weights on the Minus-sign increasing/decreasing solutions (lower region)
  double coeff_c = 0.0, coeff_d = 0.0;  // weights on the Plus-sign pair (upper region)
  double residual_norm = 0.0;           // infinity norm over all optimality-system residuals
  int iterations = 0;
  ModelParams params;
  std::shared_ptr<const ModelAssets> assets;
  std::vector<AlternateBand> alternates;

  // minimal cost and derivatives: linear with slope -l_cost below x_lower and
  // +u_cost above x_upper; analytic branches inside, switching at x_star
  // (the switch point itself evaluates on the upper branch)
  CurveEval cost(double x) const;
};

namespace detail {
// solve [[m00 m01],[m10 m11]] x = b; throws SolveError on a singular system
std::pair<double, double> solve2(double m00, double m01, double m10, double m11, double b0,
                                 double b1);
}  // namespace detail

// barrier-condition coefficients: weights (a, b) on the Minus-sign pair making
// the lower branch satisfy slope -l_cost and zero curvature at x_lower
std::pair<double, double> coeffs_lower(double x_lower, const ModelAssets& assets);
// weights (c, d) on the Plus-sign pair: slope +u_cost, zero curvature at x_upper
std::pair<double, double> coeffs_upper(double x_upper, const ModelAssets& assets);

// switch-point residuals given trial barriers: both one-sided slopes and the
// curvature mismatch at x_star; all three vanish at a solution.
// Throws ModelError unless x_lower < x_star < x_upper.
std::array<double, 3> residuals(double x_lower, double x_star, double x_upper,
                                const ModelAssets& assets);

// no-ambiguity problem (kappa must be 0): damped Newton on the two barriers
// after eliminating the branch weights; x_star is set to the cost minimizer.
// `initial` optionally seeds (x_lower, x_upper). Throws FeasibilityError /
// SolveError / ModelError.
BandSolution solve_classical(const ModelParams& p, const SolverConfig& cfg = {},
                             std::optional<std::array<double, 2>> initial = std::nullopt);

// general problem: damped Newton on (x_lower, x_star, x_upper), seeded from
// the no-ambiguity solution (or `initial` when given); kappa below 1e-10
// delegates to solve_classical
BandSolution solve_band(const ModelParams& p, const SolverConfig& cfg = {},
                        std::optional<std::array<double, 3>> initial = std::nullopt);

}  // namespace cashband
