#include "cashband/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace cashband {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PathTotals {
  double cost = 0.0;
  double l_total = 0.0;
  double u_total = 0.0;
  double x_final = 0.0;
};

struct NullRecorder {
  static constexpr bool active = false;
  void initial(double, double, double) {}
  void step(double, double, double, double) {}
};

struct VectorRecorder {
  static constexpr bool active = true;
  PathRecord* rec;
  void initial(double x, double dl, double du) {
    rec->t.push_back(0.0);
    rec->x.push_back(x);
    rec->dl.push_back(dl);
    rec->du.push_back(du);
  }
  void step(double t, double x, double dl, double du) {
    rec->t.push_back(t);
    rec->x.push_back(x);
    rec->dl.push_back(dl);
    rec->du.push_back(du);
  }
};

template <bool Checked, class Recorder>
PathTotals run_path_impl(const BandDynamics& d, const SimConfig& cfg, std::uint64_t path_index,
                         Recorder rec) {
  PathRng rng(cfg.seed, path_index);
  const auto n_steps = static_cast<std::int64_t>(std::llround(cfg.horizon / cfg.dt));
  const double dt = cfg.dt;
  const double xl = d.x_lower, xu = d.x_upper, xs = d.x_switch;
  const double cpos = d.c_pos, cneg = d.c_neg, lc = d.l_cost, uc = d.u_cost;
  const double sdt = d.sigma * std::sqrt(dt);
  const double decay = std::exp(-d.rho * dt);
  const double slope_dt = d.drift_slope * dt;
  const double const_lo_dt = d.drift_const_lower * dt;
  const double const_hi_dt = d.drift_const_upper * dt;

  PathTotals out;
  double x = cfg.x0;
  double disc = 1.0;
  // initial lump: excess outside the band is removed immediately at t = 0
  double lump_l = 0.0, lump_u = 0.0;
  if (x < xl) {
    lump_l = xl - x;
    x = xl;
  } else if (x > xu) {
    lump_u = x - xu;
    x = xu;
  }
  double cost = lc * lump_l + uc * lump_u;
  double l_total = lump_l, u_total = lump_u;
  if constexpr (Recorder::active) rec.initial(x, lump_l, lump_u);

  for (std::int64_t k = 0; k < n_steps; ++k) {
    // branchless per-step work: the max() form of the holding cost matches
    // the kinked slope pair for positive slopes and stays exact for the
    // signed-slope diagnostics mode; at most one clamp term is nonzero and
    // equals the barrier-control increment
    const double holding = std::max(cpos * x, -cneg * x);
    const double shift = x < xs ? const_lo_dt : const_hi_dt;
    x += slope_dt * x + shift + sdt * rng.normal();
    const double dl = std::max(0.0, xl - x);
    const double du = std::max(0.0, x - xu);
    x += dl - du;
    l_total += dl;
    u_total += du;
    cost += disc * (holding * dt + lc * dl + uc * du);
    disc *= decay;
    if constexpr (Checked) {
      if (!std::isfinite(x)) {
        std::ostringstream os;
        os << "non-finite state on path " << path_index << " at step " << k;
        throw SimulationError(os.str());
      }
    }
    if constexpr (Recorder::active)
      rec.step(static_cast<double>(k + 1) * cfg.dt, x, dl, du);
  }
  out.cost = cost;
  out.l_total = l_total;
  out.u_total = u_total;
  out.x_final = x;
  return out;
}

template <class Recorder>
PathTotals run_path(const BandDynamics& d, const SimConfig& cfg, std::uint64_t path_index,
                    Recorder rec) {
  const PathTotals out = run_path_impl<false>(d, cfg, path_index, rec);
  if (std::isfinite(out.x_final) && std::isfinite(out.cost)) return out;
  // rerun with per-step checking to report the first failing step
  run_path_impl<true>(d, cfg, path_index, NullRecorder{});
  std::ostringstream os;
  os << "non-finite accumulation on path " << path_index;
  throw SimulationError(os.str());
}

void validate_dynamics(const BandDynamics& d) {
  if (!(d.rho > 0.0) || !std::isfinite(d.rho)) throw ModelError("rho must be positive");
  if (!(d.sigma >= 0.0) || !std::isfinite(d.sigma)) throw ModelError("sigma must be non-negative");
  if (!(d.x_lower <= d.x_upper)) throw ModelError("x_lower must not exceed x_upper");
  for (double v : {d.x_switch, d.drift_slope, d.drift_const_lower, d.drift_const_upper, d.c_neg,
                   d.c_pos, d.l_cost, d.u_cost})
    if (!std::isfinite(v)) throw ModelError("dynamics coefficients must be finite");
}

// upper estimate of the discounted cost ignored beyond the horizon
double truncation_bound(const BandDynamics& d, const SimConfig& cfg) {
  const double tail_disc = std::exp(-d.rho * cfg.horizon);
  const double cost_slope = std::max(std::abs(d.c_neg), std::abs(d.c_pos));
  if (std::isfinite(d.x_lower) && std::isfinite(d.x_upper)) {
    const double reach = std::max(std::abs(d.x_lower), std::abs(d.x_upper));
    return tail_disc * cost_slope * reach / d.rho;
  }
  // free process: bound E|X_t| for t >= horizon, then integrate the tail
  const double b = std::max(std::abs(d.drift_const_lower), std::abs(d.drift_const_upper));
  const double t = cfg.horizon;
  if (d.drift_slope < 0.0) {
    const double m = std::abs(cfg.x0) + b / -d.drift_slope + d.sigma / std::sqrt(-2.0 * d.drift_slope);
    return tail_disc * cost_slope * m / d.rho;
  }
  const double diffuse = d.sigma * std::sqrt(2.0 * t / M_PI);
  const double level = std::abs(cfg.x0) + b * t + diffuse;
  const double growth = b + 0.5 * diffuse / t;
  return tail_disc * cost_slope * (level / d.rho + growth / (d.rho * d.rho));
}

SimEstimate reduce(const std::vector<PathTotals>& totals, const BandDynamics& d,
                   const SimConfig& cfg) {
  SimEstimate est;
  est.paths_used = static_cast<std::int64_t>(totals.size());
  const double n = static_cast<double>(totals.size());
  double sum = 0.0, sum_l = 0.0, sum_u = 0.0;
  for (const auto& t : totals) {
    sum += t.cost;
    sum_l += t.l_total;
    sum_u += t.u_total;
  }
  est.mean_cost = sum / n;
  est.mean_l_total = sum_l / n;
  est.mean_u_total = sum_u / n;
  if (totals.size() > 1) {
    double ss = 0.0;
    for (const auto& t : totals) {
      const double e = t.cost - est.mean_cost;
      ss += e * e;
    }
    est.std_error = std::sqrt(ss / (n * (n - 1.0)));
  }
  est.truncation_bound = truncation_bound(d, cfg);
  return est;
}

std::vector<PathTotals> run_all(const BandDynamics& d, const SimConfig& cfg, int n_threads) {
  validate_dynamics(d);
  cfg.validate(d.rho);
  const auto n = cfg.n_paths;
  std::vector<PathTotals> totals(static_cast<std::size_t>(n));
  n_threads = std::clamp(n_threads, 1, 64);
  if (static_cast<std::int64_t>(n_threads) > n) n_threads = static_cast<int>(n);
  if (n_threads == 1) {
    for (std::int64_t i = 0; i < n; ++i)
      totals[static_cast<std::size_t>(i)] = run_path(d, cfg, static_cast<std::uint64_t>(i),
                                                     NullRecorder{});
    return totals;
  }
  std::vector<std::thread> workers;
  std::vector<std::string> errors(static_cast<std::size_t>(n_threads));
  for (int w = 0; w < n_threads; ++w) {
    const std::int64_t beg = n * w / n_threads;
    const std::int64_t end = n * (w + 1) / n_threads;
    workers.emplace_back([&, beg, end, w] {
      try {
        for (std::int64_t i = beg; i < end; ++i)
          totals[static_cast<std::size_t>(i)] = run_path(d, cfg, static_cast<std::uint64_t>(i),
                                                         NullRecorder{});
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(w)] = e.what();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors)
    if (!e.empty()) throw SimulationError(e);
  return totals;
}

}  // namespace

void SimConfig::validate(double rho) const {
  if (n_paths <= 0) throw ModelError("n_paths must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ModelError("dt must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ModelError("horizon must be positive");
  if (!(dt < 1.0 / rho)) throw ModelError("dt must be below 1/rho");
  if (!(horizon >= 10.0 / rho)) throw ModelError("horizon must be at least 10/rho");
  if (horizon / dt > 2e9) throw ModelError("horizon/dt too large");
  if (!std::isfinite(x0)) throw ModelError("x0 must be finite");
}

PathRng::PathRng(std::uint64_t seed, std::uint64_t path_index) {
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  // decorrelate the per-path stream starts
  state_ = mix(seed + 0x9E3779B97F4A7C15ull * (path_index + 1));
  state_ = mix(state_ ^ (path_index + 0x632BE59BD9B4E019ull));
}

std::uint64_t PathRng::next() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double PathRng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

namespace {

// 128 equal-area horizontal slabs under exp(-x^2/2); slab 0 folds the tail
// beyond edge_x[1] = r into a widened base rectangle with virtual coordinate
// edge_x[0] = v / f(r).  Canonical constants for the 128-slab split.
struct ZigTables {
  double edge_x[129];
  double edge_f[129];
  ZigTables() {
    constexpr double r = 3.442619855899;
    constexpr double v = 9.91256303526217e-3;
    edge_f[1] = std::exp(-0.5 * r * r);
    edge_x[0] = v / edge_f[1];
    edge_x[1] = r;
    edge_f[0] = 0.0;  // slab 0 takes the tail branch, never the wedge test
    for (int i = 2; i < 128; ++i) {
      edge_f[i] = edge_f[i - 1] + v / edge_x[i - 1];
      edge_x[i] = std::sqrt(-2.0 * std::log(edge_f[i]));
    }
    edge_x[128] = 0.0;
    edge_f[128] = 1.0;
  }
};

const ZigTables kZig;

}  // namespace

double PathRng::normal() {
  for (;;) {
    const std::uint64_t b = next();
    const int layer = static_cast<int>(b & 127);
    // bits 10..63 form a signed 54-bit scale, disjoint from the layer bits
    const double u =
        static_cast<double>(static_cast<std::int64_t>(b) >> 10) * 0x1.0p-53;
    const double x = u * kZig.edge_x[layer];
    if (std::fabs(x) < kZig.edge_x[layer + 1]) return x;
    const double y = normal_slow(x, layer);
    if (!std::isnan(y)) return y;
  }
}

// wedge / tail handling; NaN signals rejection and the caller redraws
double PathRng::normal_slow(double x, int layer) {
  if (layer == 0) {
    constexpr double r = 3.442619855899;
    auto positive_unit = [this] {
      return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    };
    double step, y;
    do {
      step = -std::log(positive_unit()) / r;
      y = -std::log(positive_unit());
    } while (y + y < step * step);
    return x > 0.0 ? r + step : -(r + step);
  }
  const double f_lo = kZig.edge_f[layer];
  const double f_hi = kZig.edge_f[layer + 1];
  if (f_lo + unit() * (f_hi - f_lo) < std::exp(-0.5 * x * x)) return x;
  return std::numeric_limits<double>::quiet_NaN();
}

BandDynamics dynamics_from(const BandSolution& solution, GeneratorMode mode) {
  const ModelParams& p = solution.params;
  BandDynamics d;
  d.x_lower = solution.x_lower;
  d.x_upper = solution.x_upper;
  d.x_switch = solution.x_star;
  d.sigma = p.sigma;
  d.rho = p.rho;
  d.c_neg = p.c_neg;
  d.c_pos = p.c_pos;
  d.l_cost = p.l_cost;
  d.u_cost = p.u_cost;
  const double shift = p.kappa * p.sigma;
  double lo = 0.0, hi = 0.0;
  switch (mode) {
    case GeneratorMode::WorstCase:
      lo = -shift;
      hi = shift;
      break;
    case GeneratorMode::FixedMinus:
      lo = hi = -shift;
      break;
    case GeneratorMode::FixedReference:
      lo = hi = 0.0;
      break;
    case GeneratorMode::FixedPlus:
      lo = hi = shift;
      break;
  }
  if (p.is_ou()) {
    d.drift_slope = -p.diffusion.eta;
    d.drift_const_lower = lo;
    d.drift_const_upper = hi;
  } else {
    d.drift_slope = 0.0;
    d.drift_const_lower = p.diffusion.alpha + lo;
    d.drift_const_upper = p.diffusion.alpha + hi;
  }
  return d;
}

SimEstimate simulate_dynamics(const BandDynamics& d, const SimConfig& cfg, int n_threads) {
  return reduce(run_all(d, cfg, n_threads), d, cfg);
}

PathRecord simulate_dynamics_path(const BandDynamics& d, const SimConfig& cfg,
                                  std::uint64_t path_index) {
  validate_dynamics(d);
  cfg.validate(d.rho);
  PathRecord rec;
  const auto n_rows = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt)) + 1;
  rec.t.reserve(n_rows);
  rec.x.reserve(n_rows);
  rec.dl.reserve(n_rows);
  rec.du.reserve(n_rows);
  run_path(d, cfg, path_index, VectorRecorder{&rec});
  return rec;
}

namespace {

void check_start(const BandSolution& solution, const SimConfig& cfg) {
  if (cfg.x0 < solution.x_lower - 10.0 || cfg.x0 > solution.x_upper + 10.0) {
    std::ostringstream os;
    os << "x0 = " << cfg.x0 << " outside the supported start range ["
       << solution.x_lower - 10.0 << ", " << solution.x_upper + 10.0 << "]";
    throw ModelError(os.str());
  }
}

}  // namespace

SimEstimate simulate_cost(const BandSolution& solution, const SimConfig& cfg, GeneratorMode mode,
                          int n_threads) {
  check_start(solution, cfg);
  return simulate_dynamics(dynamics_from(solution, mode), cfg, n_threads);
}

PathRecord simulate_path(const BandSolution& solution, const SimConfig& cfg,
                         std::uint64_t path_index, GeneratorMode mode) {
  check_start(solution, cfg);
  return simulate_dynamics_path(dynamics_from(solution, mode), cfg, path_index);
}

std::vector<double> simulate_terminal_states(const BandSolution& solution, const SimConfig& cfg) {
  check_start(solution, cfg);
  const BandDynamics d = dynamics_from(solution, GeneratorMode::WorstCase);
  validate_dynamics(d);
  cfg.validate(d.rho);
  std::vector<double> finals(static_cast<std::size_t>(cfg.n_paths));
  for (std::int64_t i = 0; i < cfg.n_paths; ++i)
    finals[static_cast<std::size_t>(i)] =
        run_path(d, cfg, static_cast<std::uint64_t>(i), NullRecorder{}).x_final;
  return finals;
}

SimEstimate simulate_uncontrolled_cost(const ModelParams& p, const SimConfig& cfg, int n_threads) {
  p.validate();
  BandDynamics d;
  d.x_lower = -kInf;
  d.x_upper = kInf;
  d.x_switch = 0.0;
  d.sigma = p.sigma;
  d.rho = p.rho;
  d.c_neg = p.c_neg;
  d.c_pos = p.c_pos;
  d.l_cost = p.l_cost;
  d.u_cost = p.u_cost;
  if (p.is_ou()) {
    d.drift_slope = -p.diffusion.eta;
  } else {
    d.drift_const_lower = d.drift_const_upper = p.diffusion.alpha;
  }
  return simulate_dynamics(d, cfg, n_threads);
}

}  // namespace cashband
