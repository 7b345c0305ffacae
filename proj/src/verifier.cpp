#include "cashband/verifier.hpp"

#include <algorithm>
#include <cmath>

#include "cashband/model.hpp"
#include "cashband/simulator.hpp"

namespace cashband {

VerifyTolerances VerifyTolerances::uniform(double t) {
  VerifyTolerances v;
  v.equation = t;
  v.slope = t;
  v.curvature = t;
  v.convexity = t;
  v.pricing = t;
  v.transversality = t;
  return v;
}

namespace {

void track(ConditionCheck& c, double violation, double x) {
  if (violation > c.worst) {
    c.worst = violation;
    c.location = x;
  }
}

void settle(ConditionCheck& c, double tol) { c.pass = c.worst <= tol; }

// short coarse worst-case run; only boundedness of the terminal value matters
double simulated_tail_value(const BandSolution& sol) {
  const ModelParams& p = sol.params;
  SimConfig cfg;
  cfg.n_paths = 64;
  cfg.seed = 97531;
  cfg.x0 = 0.0;
  cfg.horizon = 50.0 / p.rho;
  const double rate = p.is_ou() ? std::max(p.rho, p.diffusion.eta) : p.rho;
  cfg.dt = 0.05 / rate;
  const std::vector<double> finals = simulate_terminal_states(sol, cfg);
  double mean_abs = 0.0;
  for (double x : finals) mean_abs += std::fabs(sol.cost(x).value);
  mean_abs /= static_cast<double>(finals.size());
  return std::exp(-p.rho * cfg.horizon) * mean_abs;
}

}  // namespace

VerificationReport verify(const BandSolution& sol, int grid_points,
                          const VerifyTolerances& tol) try {
  VerificationReport rep;
  rep.grid_points = std::max(grid_points, 3);
  if (!sol.assets) {
    rep.error = "solution carries no model assets";
    return rep;
  }
  const ModelParams& p = sol.params;
  const ModelAssets& assets = *sol.assets;
  const double xl = sol.x_lower, xs = sol.x_star, xu = sol.x_upper;

  rep.ordered = xl < xs && xs < xu;
  if (!rep.ordered) return rep;

  auto lower = [&](double x) { return assets.branch(DriftSign::Minus, sol.coeff_a, sol.coeff_b, x); };
  auto upper = [&](double x) { return assets.branch(DriftSign::Plus, sol.coeff_c, sol.coeff_d, x); };

  const double half_sig2 = 0.5 * p.sigma * p.sigma;
  const double ambiguity = p.kappa * p.sigma;
  const double slope_scale = 1.0 + p.l_cost + p.u_cost;

  // grid sweep per region: generator equation with the adversarial drift
  // tilt along the cost gradient, slope-sign consistency, and convexity
  double max_abs_d2 = 0.0, max_abs_value = 0.0;
  const int n = rep.grid_points;
  for (int region = 0; region < 2; ++region) {
    const double a = region == 0 ? xl : xs;
    const double b = region == 0 ? xs : xu;
    const double dx = (b - a) / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) {
      const double x = i == n - 1 ? b : a + dx * static_cast<double>(i);
      const CurveEval e = region == 0 ? lower(x) : upper(x);
      const double drift_part = p.reference_drift(x) * e.d1 + ambiguity * std::fabs(e.d1);
      const double res = half_sig2 * e.d2 + drift_part - p.rho * e.value + holding_cost(x, p);
      const double scale = 1.0 + std::fabs(half_sig2 * e.d2) + std::fabs(drift_part) +
                           std::fabs(p.rho * e.value) + holding_cost(x, p);
      track(rep.equation, std::fabs(res) / scale, x);
      const double wrong_way = region == 0 ? e.d1 : -e.d1;
      track(rep.gradient_sign, std::max(0.0, wrong_way) / slope_scale, x);
      max_abs_d2 = std::max(max_abs_d2, std::fabs(e.d2));
      max_abs_value = std::max(max_abs_value, std::fabs(e.value));
      if (e.d2 < -rep.convexity.worst) {
        rep.convexity.worst = -e.d2;
        rep.convexity.location = x;
      }
    }
  }
  const double curv_scale = 1.0 + max_abs_d2;
  settle(rep.equation, tol.equation);
  settle(rep.gradient_sign, tol.slope);
  rep.convexity.pass = rep.convexity.worst <= tol.convexity * curv_scale;

  // both branches must agree through second order at the switch point
  {
    const CurveEval lo = lower(xs);
    const CurveEval hi = upper(xs);
    track(rep.switch_continuity, std::fabs(lo.value - hi.value) / (1.0 + std::fabs(hi.value)), xs);
    track(rep.switch_continuity, std::fabs(lo.d1 - hi.d1) / slope_scale, xs);
    const double curv_gap = std::fabs(lo.d2 - hi.d2) / curv_scale;
    rep.switch_continuity.pass =
        rep.switch_continuity.worst <= tol.slope && curv_gap <= tol.curvature;
    rep.switch_continuity.worst = std::max(rep.switch_continuity.worst, curv_gap);
  }

  // barrier pasting: analytic gradients, cross-checked by one-sided
  // differences pointing into the band
  {
    const CurveEval at_l = lower(xl);
    const CurveEval at_u = upper(xu);
    const double hl = 1e-6 * (1.0 + std::fabs(xl));
    const double hu = 1e-6 * (1.0 + std::fabs(xu));
    const double fd_l = (lower(xl + hl).value - at_l.value) / hl;
    const double fd_u = (at_u.value - upper(xu - hu).value) / hu;
    track(rep.barrier_slope, std::fabs(at_l.d1 + p.l_cost) / (1.0 + p.l_cost), xl);
    track(rep.barrier_slope, std::fabs(fd_l + p.l_cost) / (1.0 + p.l_cost), xl);
    track(rep.barrier_slope, std::fabs(at_u.d1 - p.u_cost) / (1.0 + p.u_cost), xu);
    track(rep.barrier_slope, std::fabs(fd_u - p.u_cost) / (1.0 + p.u_cost), xu);
    settle(rep.barrier_slope, tol.slope);

    const double fd2_l =
        (-3.0 * at_l.d1 + 4.0 * lower(xl + hl).d1 - lower(xl + 2.0 * hl).d1) / (2.0 * hl);
    const double fd2_u =
        (3.0 * at_u.d1 - 4.0 * upper(xu - hu).d1 + upper(xu - 2.0 * hu).d1) / (2.0 * hu);
    track(rep.barrier_curvature, std::fabs(at_l.d2) / curv_scale, xl);
    track(rep.barrier_curvature, std::fabs(fd2_l) / curv_scale, xl);
    track(rep.barrier_curvature, std::fabs(at_u.d2) / curv_scale, xu);
    track(rep.barrier_curvature, std::fabs(fd2_u) / curv_scale, xu);
    settle(rep.barrier_curvature, tol.curvature);
  }

  // intervention prices must cover the perpetual value of a unit of state
  {
    const double rate = p.rho + (p.is_ou() ? p.diffusion.eta : 0.0);
    const double margin_lo = p.c_neg - rate * p.l_cost;
    const double margin_hi = p.c_pos - rate * p.u_cost;
    rep.pricing_lower.worst = std::max(0.0, -margin_lo) / (1.0 + p.c_neg);
    rep.pricing_lower.location = xl;
    settle(rep.pricing_lower, tol.pricing);
    rep.pricing_upper.worst = std::max(0.0, -margin_hi) / (1.0 + p.c_pos);
    rep.pricing_upper.location = xu;
    settle(rep.pricing_upper, tol.pricing);
  }

  // discounted value decay: the controlled state never leaves the band, so
  // the analytic bound uses the band maximum; a short simulation confirms
  {
    const double horizon = 50.0 / p.rho;
    const double structural = std::exp(-p.rho * horizon) * max_abs_value;
    const double simulated = simulated_tail_value(sol);
    rep.transversality.worst = std::max(structural, simulated);
    rep.transversality.location = horizon;
    settle(rep.transversality, tol.transversality);
  }

  rep.pass = rep.ordered && rep.equation.pass && rep.switch_continuity.pass &&
             rep.gradient_sign.pass && rep.barrier_slope.pass && rep.barrier_curvature.pass &&
             rep.convexity.pass && rep.pricing_lower.pass && rep.pricing_upper.pass &&
             rep.transversality.pass;
  return rep;
} catch (const std::exception& e) {
  VerificationReport rep;
  rep.grid_points = grid_points;
  rep.error = e.what();
  return rep;
}

}  // namespace cashband
