#pragma once

// Monte Carlo engine for the band-controlled diffusion: projected Euler steps
// whose clamp magnitudes are exactly the barrier-control increments at this
// resolution, discounted cost accumulation by the left-point rule, and
// counter-based per-path random streams so results are bit-identical for any
// worker-thread count.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cashband/solver.hpp"

namespace cashband {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  std::int64_t n_paths = 10000;
  double dt = 1e-3;
  double horizon = 100.0;  // truncation time
  std::uint64_t seed = 1;
  double x0 = 0.0;

  // enforces dt < 1/rho and horizon >= 10/rho; throws ModelError
  void validate(double rho) const;
};

struct SimEstimate {
  double mean_cost = 0.0;
  double std_error = 0.0;
  double mean_l_total = 0.0;  // expected cumulative lower-barrier push, undiscounted
  double mean_u_total = 0.0;
  double truncation_bound = 0.0;  // upper estimate of the cost ignored beyond the horizon
  std::int64_t paths_used = 0;
};

// one simulated path; row 0 carries the initial lump, row k the k-th step
struct PathRecord {
  std::vector<double> t, x, dl, du;
};

// which drift distortion the sampled measure applies
enum class GeneratorMode {
  WorstCase,       // Minus drift below the switch point, Plus at and above it
  FixedMinus,      // constant distortion -kappa everywhere
  FixedReference,  // no distortion
  FixedPlus,       // constant distortion +kappa everywhere
};

// plain-coefficient dynamics driven by the kernel; the drift is
// drift_slope*x + (x < x_switch ? drift_const_lower : drift_const_upper).
// Barriers may be +-infinity (uncontrolled). Holding-cost slopes may be
// signed here, which lets diagnostics integrate signed functionals.
struct BandDynamics {
  double x_lower = 0.0;
  double x_upper = 0.0;
  double x_switch = 0.0;
  double drift_slope = 0.0;
  double drift_const_lower = 0.0;
  double drift_const_upper = 0.0;
  double sigma = 0.0;  // >= 0; zero gives deterministic dynamics
  double rho = 0.0;
  double c_neg = 0.0, c_pos = 0.0;
  double l_cost = 0.0, u_cost = 0.0;
};

// translate a converged solution into kernel dynamics for the given mode
BandDynamics dynamics_from(const BandSolution& solution, GeneratorMode mode);

// kernel entry points
SimEstimate simulate_dynamics(const BandDynamics& dyn, const SimConfig& cfg, int n_threads = 1);
PathRecord simulate_dynamics_path(const BandDynamics& dyn, const SimConfig& cfg,
                                  std::uint64_t path_index);

// band-policy cost estimate under the chosen generator; x0 must lie within
// [x_lower - 10, x_upper + 10] (initial excess is paid as a lump)
SimEstimate simulate_cost(const BandSolution& solution, const SimConfig& cfg,
                          GeneratorMode mode = GeneratorMode::WorstCase, int n_threads = 1);
PathRecord simulate_path(const BandSolution& solution, const SimConfig& cfg,
                         std::uint64_t path_index, GeneratorMode mode = GeneratorMode::WorstCase);

// terminal states of worst-case controlled paths (for discounted-decay checks)
std::vector<double> simulate_terminal_states(const BandSolution& solution, const SimConfig& cfg);

// no barriers, no distortion: the discounted holding cost of the free process
SimEstimate simulate_uncontrolled_cost(const ModelParams& p, const SimConfig& cfg,
                                       int n_threads = 1);

// counter-based random stream for one path: splitmix64 sequence started at a
// hash of (seed, path_index), shaped to normals by a 128-layer ziggurat
// (exact rejection sampling; one 64-bit draw per normal off the slow paths)
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t path_index);
  double normal();
  double unit();  // uniform on [0,1)

 private:
  std::uint64_t next();
  double normal_slow(double x, int layer);
  std::uint64_t state_;
};

}  // namespace cashband
