#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cashband/model.hpp"
#include "cashband/simulator.hpp"
#include "cashband/solver.hpp"
#include "doctest.h"

using namespace cashband;

namespace {

ModelParams base_case() {
  ModelParams p;
  p.rho = 0.1;
  p.diffusion = DiffusionSpec::abm(0.0);
  p.sigma = 5.4;
  p.kappa = 0.5;
  p.c_neg = 1.0;
  p.c_pos = 1.0;
  p.l_cost = 4.0;
  p.u_cost = 2.0;
  return p;
}

ModelParams ou_case() {
  ModelParams p;
  p.rho = 0.1;
  p.diffusion = DiffusionSpec::ou(0.4);
  p.sigma = 2.0;
  p.kappa = 0.5;
  p.c_neg = 1.0;
  p.c_pos = 1.0;
  p.l_cost = 1.0;
  p.u_cost = 1.0;
  return p;
}

const BandSolution& base_solution() {
  static const BandSolution sol = solve_band(base_case());
  return sol;
}

const BandSolution& ou_solution() {
  static const BandSolution sol = solve_band(ou_case());
  return sol;
}

SimConfig quick_config(std::int64_t n_paths, double dt) {
  SimConfig cfg;
  cfg.n_paths = n_paths;
  cfg.dt = dt;
  cfg.horizon = 100.0;
  cfg.seed = 20240817;
  cfg.x0 = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("sim config validation rejects bad settings") {
  const double rho = 0.1;
  SimConfig ok = quick_config(10, 1e-2);
  CHECK_NOTHROW(ok.validate(rho));

  SimConfig c = ok;
  c.n_paths = 0;
  CHECK_THROWS_AS(c.validate(rho), ModelError);

  c = ok;
  c.dt = 15.0;  // at or above 1/rho the one-step discount update is unusable
  CHECK_THROWS_AS(c.validate(rho), ModelError);

  c = ok;
  c.dt = -1e-3;
  CHECK_THROWS_AS(c.validate(rho), ModelError);

  c = ok;
  c.horizon = 50.0;  // needs at least 10/rho so the discount tail is small
  CHECK_THROWS_AS(c.validate(rho), ModelError);

  c = ok;
  c.dt = 1e-9;
  c.horizon = 1e4;
  CHECK_THROWS_AS(c.validate(rho), ModelError);

  c = ok;
  c.x0 = std::nan("");
  CHECK_THROWS_AS(c.validate(rho), ModelError);
}

TEST_CASE("path rng streams repeat per index and differ across indices") {
  PathRng a(7, 3);
  PathRng b(7, 3);
  PathRng c(7, 4);
  bool all_equal_ab = true;
  bool any_diff_ac = false;
  for (int i = 0; i < 32; ++i) {
    const double za = a.normal();
    const double zb = b.normal();
    const double zc = c.normal();
    all_equal_ab = all_equal_ab && (za == zb);
    any_diff_ac = any_diff_ac || (za != zc);
  }
  CHECK(all_equal_ab);
  CHECK(any_diff_ac);

  PathRng u(11, 0);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.unit();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("normal sampler matches standard moments and tail mass") {
  const long n = 4000000;
  PathRng rng(424242, 1);
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
  long tail2 = 0, tail3 = 0;
  for (long i = 0; i < n; ++i) {
    const double z = rng.normal();
    const double z2 = z * z;
    s1 += z;
    s2 += z2;
    s3 += z2 * z;
    s4 += z2 * z2;
    if (std::fabs(z) > 2.0) ++tail2;
    if (std::fabs(z) > 3.0) ++tail3;
  }
  const double nd = static_cast<double>(n);
  // bounds sit at roughly five standard errors for this sample size
  CHECK(std::fabs(s1 / nd) < 2.5e-3);
  CHECK(std::fabs(s2 / nd - 1.0) < 4e-3);
  CHECK(std::fabs(s3 / nd) < 1e-2);
  CHECK(std::fabs(s4 / nd - 3.0) < 2.5e-2);
  const double p2 = static_cast<double>(tail2) / nd;
  const double p3 = static_cast<double>(tail3) / nd;
  CHECK(p2 > 0.0450);
  CHECK(p2 < 0.0460);
  CHECK(p3 > 0.0024);
  CHECK(p3 < 0.0030);
}

TEST_CASE("constant path accrues the exact discounted holding cost") {
  BandDynamics d;
  d.x_lower = -5.0;
  d.x_upper = 5.0;
  d.x_switch = 0.0;
  d.drift_slope = 0.0;
  d.drift_const_lower = 0.0;
  d.drift_const_upper = 0.0;
  d.sigma = 0.0;
  d.rho = 0.1;
  d.c_neg = 1.0;
  d.c_pos = 2.0;
  d.l_cost = 3.0;
  d.u_cost = 4.0;

  SimConfig cfg = quick_config(1, 1e-2);
  cfg.x0 = 0.5;
  const SimEstimate est = simulate_dynamics(d, cfg);

  const auto n_steps = static_cast<std::int64_t>(std::llround(cfg.horizon / cfg.dt));
  const double q = std::exp(-d.rho * cfg.dt);
  const double geo = (1.0 - std::pow(q, static_cast<double>(n_steps))) / (1.0 - q);
  const double exact = d.c_pos * cfg.x0 * cfg.dt * geo;
  CHECK(est.mean_cost == doctest::Approx(exact).epsilon(1e-10));
  // left-point quadrature sits within O(dt) of the continuous integral
  const double integral = d.c_pos * cfg.x0 * (1.0 - std::exp(-d.rho * cfg.horizon)) / d.rho;
  CHECK(std::fabs(est.mean_cost - integral) < 1e-2);
  CHECK(est.mean_l_total == 0.0);
  CHECK(est.mean_u_total == 0.0);
  CHECK(est.std_error == 0.0);

  cfg.x0 = -0.5;
  const SimEstimate neg = simulate_dynamics(d, cfg);
  const double exact_neg = d.c_neg * 0.5 * cfg.dt * geo;
  CHECK(neg.mean_cost == doctest::Approx(exact_neg).epsilon(1e-10));
}

TEST_CASE("deterministic drift pushes the path onto the barrier") {
  BandDynamics d;
  d.x_lower = -1.0;
  d.x_upper = 1.0;
  d.x_switch = 0.0;
  d.drift_slope = 0.0;
  d.drift_const_lower = 1.0;
  d.drift_const_upper = 1.0;
  d.sigma = 0.0;
  d.rho = 0.1;
  d.c_neg = 1.0;
  d.c_pos = 1.0;
  d.l_cost = 1.0;
  d.u_cost = 1.0;

  SimConfig cfg = quick_config(1, 1e-2);
  const SimEstimate est = simulate_dynamics(d, cfg);
  // x ramps to the upper barrier in 100 steps, then every step sheds drift*dt
  CHECK(est.mean_u_total == doctest::Approx(99.0).epsilon(1e-9));
  CHECK(est.mean_l_total == 0.0);

  const PathRecord rec = simulate_dynamics_path(d, cfg, 0);
  REQUIRE(rec.x.size() == 10001);
  CHECK(rec.x.back() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*std::max_element(rec.x.begin(), rec.x.end()) <= 1.0 + 1e-12);
}

TEST_CASE("initial excess is removed as a lump at time zero") {
  const BandSolution& sol = base_solution();
  SimConfig cfg = quick_config(1, 1e-2);

  cfg.x0 = sol.x_upper + 2.0;
  const PathRecord rec = simulate_path(sol, cfg, 0, GeneratorMode::WorstCase);
  REQUIRE(!rec.x.empty());
  CHECK(rec.t[0] == 0.0);
  CHECK(rec.x[0] == doctest::Approx(sol.x_upper).epsilon(1e-14));
  CHECK(rec.du[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rec.dl[0] == 0.0);

  const SimEstimate shifted = simulate_cost(sol, cfg, GeneratorMode::WorstCase);
  cfg.x0 = sol.x_upper;
  const SimEstimate at_barrier = simulate_cost(sol, cfg, GeneratorMode::WorstCase);
  // identical noise stream after the lump, so costs differ by the lump charge
  const double expect = 2.0 * sol.params.u_cost + at_barrier.mean_cost;
  CHECK(shifted.mean_cost == doctest::Approx(expect).epsilon(1e-8));
  CHECK(shifted.mean_u_total - at_barrier.mean_u_total == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("path records stay inside the band and mark barrier hits") {
  const BandSolution& sol = base_solution();
  SimConfig cfg = quick_config(1, 1e-2);
  const PathRecord rec = simulate_path(sol, cfg, 3, GeneratorMode::WorstCase);
  REQUIRE(rec.t.size() == rec.x.size());
  REQUIRE(rec.t.size() == rec.dl.size());
  REQUIRE(rec.t.size() == rec.du.size());
  REQUIRE(rec.t.size() == 10001);

  int low_hits = 0, high_hits = 0;
  for (std::size_t k = 0; k < rec.x.size(); ++k) {
    REQUIRE(rec.x[k] >= sol.x_lower - 1e-9);
    REQUIRE(rec.x[k] <= sol.x_upper + 1e-9);
    REQUIRE(rec.dl[k] >= 0.0);
    REQUIRE(rec.du[k] >= 0.0);
    REQUIRE(rec.dl[k] * rec.du[k] == 0.0);
    if (rec.dl[k] > 0.0) {
      ++low_hits;
      REQUIRE(rec.x[k] == doctest::Approx(sol.x_lower).epsilon(1e-9));
    }
    if (rec.du[k] > 0.0) {
      ++high_hits;
      REQUIRE(rec.x[k] == doctest::Approx(sol.x_upper).epsilon(1e-9));
    }
    CHECK(rec.t[k] == doctest::Approx(static_cast<double>(k) * cfg.dt).epsilon(1e-12));
  }
  CHECK(low_hits > 0);
  CHECK(high_hits > 0);

  const PathRecord other = simulate_path(sol, cfg, 4, GeneratorMode::WorstCase);
  CHECK(other.x != rec.x);
}

TEST_CASE("thread layout does not change estimates") {
  const BandSolution& sol = base_solution();
  const SimConfig cfg = quick_config(512, 1e-2);
  const SimEstimate serial = simulate_cost(sol, cfg, GeneratorMode::WorstCase, 1);
  const SimEstimate pooled = simulate_cost(sol, cfg, GeneratorMode::WorstCase, 4);
  CHECK(serial.mean_cost == pooled.mean_cost);
  CHECK(serial.std_error == pooled.std_error);
  CHECK(serial.mean_l_total == pooled.mean_l_total);
  CHECK(serial.mean_u_total == pooled.mean_u_total);

  const SimEstimate again = simulate_cost(sol, cfg, GeneratorMode::WorstCase, 1);
  CHECK(serial.mean_cost == again.mean_cost);

  CHECK(serial.paths_used == 512);
  CHECK(serial.mean_l_total > 0.0);
  CHECK(serial.mean_u_total > 0.0);
  CHECK(serial.std_error > 0.0);
  CHECK(std::isfinite(serial.truncation_bound));
  CHECK(serial.truncation_bound > 0.0);
  CHECK(serial.truncation_bound < 0.1);
}

TEST_CASE("simulated origin cost matches the solved cost and refines with dt") {
  const BandSolution& sol = base_solution();
  const double target = sol.cost(0.0).value;

  const SimEstimate coarse = simulate_cost(sol, quick_config(2000, 1e-2), GeneratorMode::WorstCase, 2);
  const SimEstimate fine = simulate_cost(sol, quick_config(2000, 1e-3), GeneratorMode::WorstCase, 2);

  CHECK(std::fabs(fine.mean_cost - target) <= 3.5 * fine.std_error);
  CHECK(std::fabs(fine.mean_cost - target) <=
        std::fabs(coarse.mean_cost - target) + 3.0 * (fine.std_error + coarse.std_error));
  CHECK(fine.std_error < 1.5);
}

TEST_CASE("switching generator dominates every fixed prior") {
  const BandSolution& sol = base_solution();
  const SimConfig cfg = quick_config(1500, 5e-3);
  const SimEstimate worst = simulate_cost(sol, cfg, GeneratorMode::WorstCase, 2);
  for (GeneratorMode mode :
       {GeneratorMode::FixedMinus, GeneratorMode::FixedReference, GeneratorMode::FixedPlus}) {
    const SimEstimate fixed = simulate_cost(sol, cfg, mode, 2);
    CHECK(worst.mean_cost >= fixed.mean_cost - 3.0 * (worst.std_error + fixed.std_error));
  }
}

TEST_CASE("uncontrolled symmetric cost matches the closed form") {
  ModelParams p = base_case();
  p.sigma = 2.0;
  p.kappa = 0.0;
  SimConfig cfg = quick_config(10000, 5e-3);
  const SimEstimate est = simulate_uncontrolled_cost(p, cfg, 2);
  // driftless symmetric unit-slope cost has origin value sigma / (sqrt(2) rho^1.5)
  const double target = 44.72135955;
  CHECK(std::fabs(est.mean_cost - target) <= 4.0 * est.std_error + est.truncation_bound);
  CHECK(est.mean_l_total == 0.0);
  CHECK(est.mean_u_total == 0.0);
  CHECK(est.std_error < 1.0);
}

TEST_CASE("generator modes map to the intended drifts") {
  const BandSolution& sol = base_solution();
  const ModelParams& p = sol.params;
  const double shift = p.kappa * p.sigma;

  const BandDynamics worst = dynamics_from(sol, GeneratorMode::WorstCase);
  CHECK(worst.drift_slope == 0.0);
  CHECK(worst.drift_const_lower == doctest::Approx(p.diffusion.alpha - shift).epsilon(1e-15));
  CHECK(worst.drift_const_upper == doctest::Approx(p.diffusion.alpha + shift).epsilon(1e-15));
  CHECK(worst.x_switch == sol.x_star);
  CHECK(worst.x_lower == sol.x_lower);
  CHECK(worst.x_upper == sol.x_upper);

  const BandDynamics minus = dynamics_from(sol, GeneratorMode::FixedMinus);
  CHECK(minus.drift_const_lower == minus.drift_const_upper);
  CHECK(minus.drift_const_lower == doctest::Approx(p.diffusion.alpha - shift).epsilon(1e-15));

  const BandDynamics ref = dynamics_from(sol, GeneratorMode::FixedReference);
  CHECK(ref.drift_const_lower == p.diffusion.alpha);
  CHECK(ref.drift_const_upper == p.diffusion.alpha);

  const BandDynamics plus = dynamics_from(sol, GeneratorMode::FixedPlus);
  CHECK(plus.drift_const_lower == doctest::Approx(p.diffusion.alpha + shift).epsilon(1e-15));

  const BandDynamics ou = dynamics_from(ou_solution(), GeneratorMode::WorstCase);
  const ModelParams& q = ou_solution().params;
  CHECK(ou.drift_slope == doctest::Approx(-q.diffusion.eta).epsilon(1e-15));
  CHECK(ou.drift_const_lower == doctest::Approx(-q.kappa * q.sigma).epsilon(1e-15));
  CHECK(ou.drift_const_upper == doctest::Approx(q.kappa * q.sigma).epsilon(1e-15));
  const BandDynamics ou_ref = dynamics_from(ou_solution(), GeneratorMode::FixedReference);
  CHECK(ou_ref.drift_const_lower == 0.0);
  CHECK(ou_ref.drift_const_upper == 0.0);
}

TEST_CASE("mean reverting band simulation is consistent with its solved cost") {
  const BandSolution& sol = ou_solution();
  const SimEstimate est = simulate_cost(sol, quick_config(1500, 4e-3), GeneratorMode::WorstCase, 2);
  CHECK(std::fabs(est.mean_cost - sol.cost(0.0).value) <= 4.0 * est.std_error);

  SimConfig tiny = quick_config(64, 1e-2);
  const std::vector<double> finals = simulate_terminal_states(sol, tiny);
  REQUIRE(finals.size() == 64);
  for (double x : finals) {
    REQUIRE(std::isfinite(x));
    REQUIRE(x >= sol.x_lower - 1e-9);
    REQUIRE(x <= sol.x_upper + 1e-9);
  }
}

TEST_CASE("start far outside the band is rejected") {
  const BandSolution& sol = base_solution();
  SimConfig cfg = quick_config(8, 1e-2);
  cfg.x0 = sol.x_upper + 50.0;
  CHECK_THROWS_AS(simulate_cost(sol, cfg, GeneratorMode::WorstCase), ModelError);
  CHECK_THROWS_AS(simulate_path(sol, cfg, 0, GeneratorMode::WorstCase), ModelError);
  CHECK_THROWS_AS(simulate_terminal_states(sol, cfg), ModelError);
  cfg.x0 = sol.x_lower - 50.0;
  CHECK_THROWS_AS(simulate_cost(sol, cfg, GeneratorMode::WorstCase), ModelError);
}
