#include "cashband/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace cashband {

namespace {

constexpr double kOrderEps = 1e-10;  // minimal gap enforced between the unknowns
constexpr int kMaxBacktracks = 20;

bool finite(double x) { return std::isfinite(x); }

void require_feasible(const ModelParams& p) {
  const auto rep = feasibility_check(p);
  if (rep.pass) return;
  std::string msg = "parameters violate the band-optimality cost conditions:";
  for (const auto& v : rep.violations) msg += " " + v + ";";
  throw FeasibilityError(msg);
}

// residual vector plus the magnitude scale of its constituent terms (used for
// the roundoff floor when damped steps stall)
struct ResidualEval {
  std::array<double, 3> r{};
  double scale = 1.0;
  bool ok = false;  // all contributing evaluations finite
};

ResidualEval eval_residuals(double x_lower, double x_star, double x_upper,
                            const ModelAssets& assets) try {
  ResidualEval out;
  const auto& p = assets.params();
  double a, b, c, d;
  std::tie(a, b) = coeffs_lower(x_lower, assets);
  std::tie(c, d) = coeffs_upper(x_upper, assets);
  const auto im = assets.pair(DriftSign::Minus).increasing().at(x_star);
  const auto dm = assets.pair(DriftSign::Minus).decreasing().at(x_star);
  const auto rm = assets.perpetual(DriftSign::Minus).at(x_star);
  const auto ip = assets.pair(DriftSign::Plus).increasing().at(x_star);
  const auto dp = assets.pair(DriftSign::Plus).decreasing().at(x_star);
  const auto rp = assets.perpetual(DriftSign::Plus).at(x_star);
  out.r[0] = rm.d1 + a * im.d1 + b * dm.d1;
  out.r[1] = rp.d1 + c * ip.d1 + d * dp.d1;
  out.r[2] = (rm.d2 + a * im.d2 + b * dm.d2) - (rp.d2 + c * ip.d2 + d * dp.d2);
  const double s1 = std::abs(rm.d1) + std::abs(a * im.d1) + std::abs(b * dm.d1);
  const double s2 = std::abs(rp.d1) + std::abs(c * ip.d1) + std::abs(d * dp.d1);
  const double s3 = std::abs(rm.d2) + std::abs(a * im.d2) + std::abs(b * dm.d2) +
                    std::abs(rp.d2) + std::abs(c * ip.d2) + std::abs(d * dp.d2);
  out.scale = std::max({s1, s2, s3, p.l_cost, p.u_cost, 1.0});
  out.ok = finite(out.r[0]) && finite(out.r[1]) && finite(out.r[2]);
  return out;
} catch (const SolveError&) {
  return {};
} catch (const std::domain_error&) {
  return {};  // trial point left the working interval; treated as a rejected step
}

// residuals of the no-ambiguity system reduced to the two barriers: branch
// weights are pinned by the lower-barrier conditions, leaving the slope and
// curvature mismatches at the upper barrier
struct ClassicalEval {
  std::array<double, 2> g{};
  double scale = 1.0;
  bool ok = false;
};

ClassicalEval eval_classical(double x_lower, double x_upper, const ModelAssets& assets) try {
  ClassicalEval out;
  const auto& p = assets.params();
  double a, b;
  std::tie(a, b) = coeffs_lower(x_lower, assets);
  const auto iu = assets.pair(DriftSign::Minus).increasing().at(x_upper);
  const auto du = assets.pair(DriftSign::Minus).decreasing().at(x_upper);
  const auto ru = assets.perpetual(DriftSign::Minus).at(x_upper);
  out.g[0] = ru.d1 + a * iu.d1 + b * du.d1 - p.u_cost;
  out.g[1] = ru.d2 + a * iu.d2 + b * du.d2;
  const double s0 =
      std::abs(ru.d1) + std::abs(a * iu.d1) + std::abs(b * du.d1) + std::abs(p.u_cost);
  const double s1 = std::abs(ru.d2) + std::abs(a * iu.d2) + std::abs(b * du.d2);
  out.scale = std::max({s0, s1, 1.0});
  out.ok = finite(out.g[0]) && finite(out.g[1]);
  return out;
} catch (const SolveError&) {
  return {};
} catch (const std::domain_error&) {
  return {};
}

double norm_inf(const std::array<double, 2>& v) { return std::max(std::abs(v[0]), std::abs(v[1])); }
double norm_inf(const std::array<double, 3>& v) {
  return std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])});
}

// solve a 3x3 system by Gaussian elimination with partial pivoting
std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> m, std::array<double, 3> b) {
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    std::swap(m[col], m[piv]);
    std::swap(b[col], b[piv]);
    if (m[col][col] == 0.0 || !finite(m[col][col]))
      throw SolveError("singular Jacobian in Newton step");
    for (int r = col + 1; r < 3; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int k = col; k < 3; ++k) m[r][k] -= f * m[col][k];
      b[r] -= f * b[col];
    }
  }
  std::array<double, 3> x{};
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < 3; ++k) s -= m[r][k] * x[k];
    x[r] = s / m[r][r];
  }
  return x;
}

// locate the minimizer of the converged no-ambiguity branch: its slope runs
// from -l_cost at the lower barrier to +u_cost at the upper one
double locate_minimizer(const ModelAssets& assets, double a, double b, double x_lower,
                        double x_upper) {
  auto slope = [&](double x) { return assets.branch(DriftSign::Minus, a, b, x).d1; };
  double lo = x_lower, hi = x_upper;
  double flo = slope(lo);
  if (!(flo < 0.0)) return lo;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (slope(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 3; ++i) {
    const auto e = assets.branch(DriftSign::Minus, a, b, x);
    if (!(e.d2 > 0.0)) break;
    const double step = e.d1 / e.d2;
    const double next = std::clamp(x - step, x_lower, x_upper);
    if (!finite(next)) break;
    x = next;
  }
  return x;
}

struct NewtonOutcome {
  bool converged = false;
  double norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

}  // namespace

void SolverConfig::validate() const {
  if (!finite(newton_tol) || newton_tol <= 0.0) throw ModelError("newton_tol must be positive");
  if (max_iters <= 0) throw ModelError("max_iters must be positive");
  if (!finite(damping) || damping <= 0.0 || damping > 1.0)
    throw ModelError("damping must lie in (0,1]");
  if (scan_grid < 8) throw ModelError("scan_grid must be at least 8");
  if (!finite(fd_step) || fd_step <= 0.0) throw ModelError("fd_step must be positive");
}

namespace detail {

std::pair<double, double> solve2(double m00, double m01, double m10, double m11, double b0,
                                 double b1) {
  const double det = m00 * m11 - m01 * m10;
  const double mag = std::abs(m00 * m11) + std::abs(m01 * m10);
  if (!finite(det) || std::abs(det) <= 1e-15 * mag || det == 0.0)
    throw SolveError("singular 2x2 barrier-condition system");
  return {(b0 * m11 - b1 * m01) / det, (m00 * b1 - m10 * b0) / det};
}

}  // namespace detail

std::pair<double, double> coeffs_lower(double x_lower, const ModelAssets& assets) {
  const auto i = assets.pair(DriftSign::Minus).increasing().at(x_lower);
  const auto d = assets.pair(DriftSign::Minus).decreasing().at(x_lower);
  const auto r = assets.perpetual(DriftSign::Minus).at(x_lower);
  const auto& p = assets.params();
  return detail::solve2(i.d1, d.d1, i.d2, d.d2, -p.l_cost - r.d1, -r.d2);
}

std::pair<double, double> coeffs_upper(double x_upper, const ModelAssets& assets) {
  const auto i = assets.pair(DriftSign::Plus).increasing().at(x_upper);
  const auto d = assets.pair(DriftSign::Plus).decreasing().at(x_upper);
  const auto r = assets.perpetual(DriftSign::Plus).at(x_upper);
  const auto& p = assets.params();
  return detail::solve2(i.d1, d.d1, i.d2, d.d2, p.u_cost - r.d1, -r.d2);
}

std::array<double, 3> residuals(double x_lower, double x_star, double x_upper,
                                const ModelAssets& assets) {
  if (!(x_lower < x_star && x_star < x_upper)) {
    std::ostringstream os;
    os << "ordering violation: need x_lower < x_star < x_upper, got (" << x_lower << ", "
       << x_star << ", " << x_upper << ")";
    throw ModelError(os.str());
  }
  const auto ev = eval_residuals(x_lower, x_star, x_upper, assets);
  if (!ev.ok) throw SolveError("residual evaluation produced non-finite values");
  return ev.r;
}

CurveEval BandSolution::cost(double x) const {
  if (x < x_lower) {
    const auto at_barrier = assets->branch(DriftSign::Minus, coeff_a, coeff_b, x_lower);
    return {at_barrier.value + params.l_cost * (x_lower - x), -params.l_cost, 0.0};
  }
  if (x >= x_upper) {
    const auto at_barrier = assets->branch(DriftSign::Plus, coeff_c, coeff_d, x_upper);
    return {at_barrier.value + params.u_cost * (x - x_upper), params.u_cost, 0.0};
  }
  if (x < x_star) return assets->branch(DriftSign::Minus, coeff_a, coeff_b, x);
  return assets->branch(DriftSign::Plus, coeff_c, coeff_d, x);
}

namespace {

// damped Newton on (x_lower, x_upper) for the no-ambiguity system
NewtonOutcome newton_classical(double& xl, double& xu, const ModelAssets& assets,
                               const SolverConfig& cfg) {
  NewtonOutcome out;
  auto project = [](double& a, double& c) {
    a = std::min(a, -kOrderEps);
    c = std::max(c, kOrderEps);
  };
  project(xl, xu);
  ClassicalEval cur = eval_classical(xl, xu, assets);
  if (!cur.ok) return out;
  for (int it = 0; it < cfg.max_iters; ++it) {
    out.iterations = it + 1;
    out.norm = norm_inf(cur.g);
    if (out.norm <= cfg.newton_tol) {
      out.converged = true;
      return out;
    }
    const double h0 = cfg.fd_step * (1.0 + std::abs(xl));
    const double h1 = cfg.fd_step * (1.0 + std::abs(xu));
    const auto gl_p = eval_classical(xl + h0, xu, assets);
    const auto gl_m = eval_classical(xl - h0, xu, assets);
    const auto gu_p = eval_classical(xl, xu + h1, assets);
    const auto gu_m = eval_classical(xl, xu - h1, assets);
    if (!(gl_p.ok && gl_m.ok && gu_p.ok && gu_m.ok)) return out;
    const double j00 = (gl_p.g[0] - gl_m.g[0]) / (2.0 * h0);
    const double j10 = (gl_p.g[1] - gl_m.g[1]) / (2.0 * h0);
    const double j01 = (gu_p.g[0] - gu_m.g[0]) / (2.0 * h1);
    const double j11 = (gu_p.g[1] - gu_m.g[1]) / (2.0 * h1);
    double sl, su;
    try {
      std::tie(sl, su) = detail::solve2(j00, j01, j10, j11, cur.g[0], cur.g[1]);
    } catch (const SolveError&) {
      return out;
    }
    double lambda = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= kMaxBacktracks; ++bt) {
      double nl = xl - lambda * sl;
      double nu = xu - lambda * su;
      project(nl, nu);
      const auto nxt = eval_classical(nl, nu, assets);
      if (nxt.ok && norm_inf(nxt.g) < out.norm) {
        xl = nl;
        xu = nu;
        cur = nxt;
        accepted = true;
        break;
      }
      lambda *= cfg.damping;
    }
    if (!accepted) {
      // stalled: accept only if already at the evaluation roundoff floor
      out.converged = out.norm <= 1e3 * std::numeric_limits<double>::epsilon() * cur.scale;
      return out;
    }
  }
  out.norm = norm_inf(cur.g);
  out.converged = out.norm <= cfg.newton_tol;
  return out;
}

// damped Newton on (x_lower, x_star, x_upper) for the ambiguous system
NewtonOutcome newton_band(std::array<double, 3>& v, const ModelAssets& assets,
                          const SolverConfig& cfg, bool* ended_on_projection) {
  NewtonOutcome out;
  *ended_on_projection = false;
  auto project = [](std::array<double, 3>& w) {
    bool moved = false;
    auto clamp_to = [&](double& t, double val) {
      if (t == val) return;
      t = val;
      moved = true;
    };
    if (w[0] > -kOrderEps) clamp_to(w[0], -kOrderEps);
    if (w[2] < kOrderEps) clamp_to(w[2], kOrderEps);
    if (w[1] < w[0] + kOrderEps) clamp_to(w[1], w[0] + kOrderEps);
    if (w[1] > w[2] - kOrderEps) clamp_to(w[1], w[2] - kOrderEps);
    return moved;
  };
  bool projected = project(v);
  ResidualEval cur = eval_residuals(v[0], v[1], v[2], assets);
  if (!cur.ok) return out;
  for (int it = 0; it < cfg.max_iters; ++it) {
    out.iterations = it + 1;
    out.norm = norm_inf(cur.r);
    if (out.norm <= cfg.newton_tol) {
      out.converged = true;
      *ended_on_projection = projected;
      return out;
    }
    std::array<std::array<double, 3>, 3> jac{};
    bool jac_ok = true;
    for (int k = 0; k < 3 && jac_ok; ++k) {
      const double h = cfg.fd_step * (1.0 + std::abs(v[k]));
      auto vp = v, vm = v;
      vp[k] += h;
      vm[k] -= h;
      const auto rp = eval_residuals(vp[0], vp[1], vp[2], assets);
      const auto rm = eval_residuals(vm[0], vm[1], vm[2], assets);
      jac_ok = rp.ok && rm.ok;
      for (int row = 0; row < 3; ++row) jac[row][k] = (rp.r[row] - rm.r[row]) / (2.0 * h);
    }
    if (!jac_ok) return out;
    std::array<double, 3> step{};
    try {
      step = solve3(jac, cur.r);
    } catch (const SolveError&) {
      return out;
    }
    double lambda = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= kMaxBacktracks; ++bt) {
      std::array<double, 3> nv{v[0] - lambda * step[0], v[1] - lambda * step[1],
                               v[2] - lambda * step[2]};
      const bool moved = project(nv);
      const auto nxt = eval_residuals(nv[0], nv[1], nv[2], assets);
      if (nxt.ok && norm_inf(nxt.r) < out.norm) {
        v = nv;
        cur = nxt;
        projected = moved;
        accepted = true;
        break;
      }
      lambda *= cfg.damping;
    }
    if (!accepted) {
      out.converged = out.norm <= 1e3 * std::numeric_limits<double>::epsilon() * cur.scale;
      *ended_on_projection = projected;
      return out;
    }
  }
  out.norm = norm_inf(cur.r);
  out.converged = out.norm <= cfg.newton_tol;
  *ended_on_projection = projected;
  return out;
}

// coarse bracketing: cells of the (x_lower, x_upper) grid on which both
// residual components change sign are Newton starting points
std::vector<std::array<double, 2>> scan_candidates(
    const ModelAssets& assets, const SolverConfig& cfg,
    const std::function<ClassicalEval(double, double)>& eval) {
  const Interval w = assets.inner();
  const int n = cfg.scan_grid;
  const double gap = 1e-4 * (1.0 + std::max(std::abs(w.lo), std::abs(w.hi)));
  const double lo_beg = w.lo * 0.98, lo_end = -gap;
  const double hi_beg = gap, hi_end = w.hi * 0.98;
  std::vector<double> xls(n), xus(n);
  for (int i = 0; i < n; ++i) {
    xls[i] = lo_beg + (lo_end - lo_beg) * i / (n - 1);
    xus[i] = hi_beg + (hi_end - hi_beg) * i / (n - 1);
  }
  struct Node {
    double g0 = 0.0, g1 = 0.0;
    bool ok = false;
  };
  std::vector<Node> grid(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const auto e = eval(xls[i], xus[j]);
      grid[static_cast<std::size_t>(i) * n + j] = {e.g[0], e.g[1], e.ok};
    }
  struct Cand {
    double xl, xu, merit;
  };
  std::vector<Cand> cands;
  for (int i = 0; i + 1 < n; ++i)
    for (int j = 0; j + 1 < n; ++j) {
      const Node* c[4] = {&grid[static_cast<std::size_t>(i) * n + j],
                          &grid[static_cast<std::size_t>(i + 1) * n + j],
                          &grid[static_cast<std::size_t>(i) * n + j + 1],
                          &grid[static_cast<std::size_t>(i + 1) * n + j + 1]};
      if (!(c[0]->ok && c[1]->ok && c[2]->ok && c[3]->ok)) continue;
      auto straddles = [&](auto pick) {
        double mn = pick(*c[0]), mx = mn;
        for (int k = 1; k < 4; ++k) {
          mn = std::min(mn, pick(*c[k]));
          mx = std::max(mx, pick(*c[k]));
        }
        return mn <= 0.0 && mx >= 0.0;
      };
      if (!straddles([](const Node& d) { return d.g0; })) continue;
      if (!straddles([](const Node& d) { return d.g1; })) continue;
      double merit = 0.0;
      for (int k = 0; k < 4; ++k) merit += std::abs(c[k]->g0) + std::abs(c[k]->g1);
      cands.push_back({0.5 * (xls[i] + xls[i + 1]), 0.5 * (xus[j] + xus[j + 1]), merit});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.merit < b.merit; });
  std::vector<std::array<double, 2>> out;
  out.reserve(cands.size());
  for (const auto& cd : cands) out.push_back({cd.xl, cd.xu});
  return out;
}

BandSolution finish_classical(const ModelAssets& assets, double xl, double xu, int iterations,
                              std::shared_ptr<const ModelAssets> owner) {
  const auto& p = assets.params();
  const auto [a, b] = coeffs_lower(xl, assets);
  BandSolution sol;
  sol.x_lower = xl;
  sol.x_upper = xu;
  sol.coeff_a = a;
  sol.coeff_b = b;
  sol.coeff_c = a;
  sol.coeff_d = b;
  sol.x_star = locate_minimizer(assets, a, b, xl, xu);
  sol.iterations = iterations;
  sol.params = p;
  sol.assets = std::move(owner);
  const auto at_l = assets.branch(DriftSign::Minus, a, b, xl);
  const auto at_u = assets.branch(DriftSign::Minus, a, b, xu);
  sol.residual_norm = std::max({std::abs(at_l.d1 + p.l_cost), std::abs(at_l.d2),
                                std::abs(at_u.d1 - p.u_cost), std::abs(at_u.d2)});
  return sol;
}

}  // namespace

BandSolution solve_classical(const ModelParams& p, const SolverConfig& cfg,
                             std::optional<std::array<double, 2>> initial) {
  p.validate();
  cfg.validate();
  if (p.kappa != 0.0) throw ModelError("solve_classical requires kappa = 0");
  require_feasible(p);

  auto assets = ModelAssets::build(p, default_working_interval(p));
  auto run_from = [&](double xl, double xu, NewtonOutcome& oc) {
    oc = newton_classical(xl, xu, *assets, cfg);
    return std::array<double, 2>{xl, xu};
  };

  std::vector<std::array<double, 2>> starts;
  if (initial) starts.push_back(*initial);

  int spent_iterations = 0;
  std::vector<std::array<double, 2>> found;
  auto try_start = [&](const std::array<double, 2>& s) {
    NewtonOutcome oc;
    const auto end = run_from(s[0], s[1], oc);
    spent_iterations += oc.iterations;
    if (!oc.converged) return;
    for (const auto& f : found)
      if (std::abs(f[0] - end[0]) < 1e-6 * (1.0 + std::abs(end[0])) &&
          std::abs(f[1] - end[1]) < 1e-6 * (1.0 + std::abs(end[1])))
        return;
    found.push_back(end);
  };

  for (const auto& s : starts) try_start(s);
  if (found.empty()) {
    const auto cands = scan_candidates(
        *assets, cfg, [&](double xl, double xu) { return eval_classical(xl, xu, *assets); });
    if (cands.empty() && starts.empty())
      throw SolveError("no band in scan window: the coarse bracketing scan found no "
                       "sign-change cell for the barrier system");
    int used = 0;
    for (const auto& s : cands) {
      try_start(s);
      if (++used >= 8 && !found.empty()) break;
    }
  }
  if (found.empty()) throw SolveError("barrier Newton iteration did not converge");

  std::vector<BandSolution> sols;
  for (const auto& f : found)
    sols.push_back(finish_classical(*assets, f[0], f[1], spent_iterations, assets));
  std::size_t best = 0;
  for (std::size_t i = 1; i < sols.size(); ++i)
    if (sols[i].cost(0.0).value < sols[best].cost(0.0).value) best = i;
  for (std::size_t i = 0; i < sols.size(); ++i) {
    if (i == best) continue;
    sols[best].alternates.push_back(
        {sols[i].x_lower, sols[i].x_star, sols[i].x_upper, sols[i].cost(0.0).value});
  }
  return std::move(sols[best]);
}

BandSolution solve_band(const ModelParams& p, const SolverConfig& cfg,
                        std::optional<std::array<double, 3>> initial) {
  p.validate();
  cfg.validate();
  require_feasible(p);
  if (p.kappa < 1e-10) {
    ModelParams p0 = p;
    p0.kappa = 0.0;
    std::optional<std::array<double, 2>> init2;
    if (initial) init2 = std::array<double, 2>{(*initial)[0], (*initial)[2]};
    BandSolution sol = solve_classical(p0, cfg, init2);
    sol.params = p;
    return sol;
  }

  auto assets = ModelAssets::build(p, default_working_interval(p));

  std::vector<std::array<double, 3>> starts;
  bool from_scan = false;
  if (initial) {
    starts.push_back(*initial);
  } else {
    ModelParams p0 = p;
    p0.kappa = 0.0;
    try {
      const BandSolution classical = solve_classical(p0, cfg);
      starts.push_back({classical.x_lower, classical.x_star, classical.x_upper});
    } catch (const std::exception&) {
      // fall through to the coarse scan below
    }
  }
  if (starts.empty()) {
    from_scan = true;
    const auto cands = scan_candidates(*assets, cfg, [&](double xl, double xu) {
      const auto ev = eval_residuals(xl, 0.5 * (xl + xu), xu, *assets);
      ClassicalEval ce;
      ce.g = {ev.r[0], ev.r[1]};
      ce.scale = ev.scale;
      ce.ok = ev.ok;
      return ce;
    });
    if (cands.empty())
      throw SolveError("no band in scan window: the coarse bracketing scan found no "
                       "sign-change cell for the switch-point system");
    int used = 0;
    for (const auto& s : cands) {
      starts.push_back({s[0], 0.5 * (s[0] + s[1]), s[1]});
      if (++used >= 8) break;
    }
  }

  int spent_iterations = 0;
  struct Found {
    std::array<double, 3> v;
    double norm;
  };
  std::vector<Found> found;
  bool saw_projection_end = false;
  for (auto v : starts) {
    bool on_projection = false;
    const auto oc = newton_band(v, *assets, cfg, &on_projection);
    spent_iterations += oc.iterations;
    if (!oc.converged) continue;
    if (on_projection) {
      // converged onto the ordering boundary: not a strictly ordered band
      saw_projection_end = true;
      continue;
    }
    bool dup = false;
    for (const auto& f : found)
      if (std::abs(f.v[0] - v[0]) < 1e-6 * (1.0 + std::abs(v[0])) &&
          std::abs(f.v[2] - v[2]) < 1e-6 * (1.0 + std::abs(v[2])))
        dup = true;
    if (!dup) found.push_back({v, oc.norm});
    if (!from_scan) break;
  }
  if (found.empty())
    throw SolveError(saw_projection_end
                         ? "Newton converged only onto the ordering boundary; no strictly "
                           "ordered band found"
                         : "switch-point Newton iteration did not converge");

  auto build_solution = [&](const Found& f) {
    BandSolution sol;
    sol.x_lower = f.v[0];
    sol.x_star = f.v[1];
    sol.x_upper = f.v[2];
    std::tie(sol.coeff_a, sol.coeff_b) = coeffs_lower(sol.x_lower, *assets);
    std::tie(sol.coeff_c, sol.coeff_d) = coeffs_upper(sol.x_upper, *assets);
    sol.iterations = spent_iterations;
    sol.params = p;
    sol.assets = assets;
    const auto at_l = assets->branch(DriftSign::Minus, sol.coeff_a, sol.coeff_b, sol.x_lower);
    const auto at_u = assets->branch(DriftSign::Plus, sol.coeff_c, sol.coeff_d, sol.x_upper);
    sol.residual_norm = std::max({f.norm, std::abs(at_l.d1 + p.l_cost), std::abs(at_l.d2),
                                  std::abs(at_u.d1 - p.u_cost), std::abs(at_u.d2)});
    return sol;
  };

  std::vector<BandSolution> sols;
  for (const auto& f : found) sols.push_back(build_solution(f));
  std::size_t best = 0;
  for (std::size_t i = 1; i < sols.size(); ++i)
    if (sols[i].cost(0.0).value < sols[best].cost(0.0).value) best = i;
  for (std::size_t i = 0; i < sols.size(); ++i) {
    if (i == best) continue;
    sols[best].alternates.push_back(
        {sols[i].x_lower, sols[i].x_star, sols[i].x_upper, sols[i].cost(0.0).value});
  }
  return std::move(sols[best]);
}

}  // namespace cashband
