#pragma once

#include <string>

#include "cashband/solver.hpp"

namespace cashband {

// Acceptance tolerances for the optimality audit of a solved band.  Each
// field gates one family of checks; uniform(t) sets every gate to t.
struct VerifyTolerances {
  double equation = 1e-8;        // interior generator equation residual
  double slope = 1e-7;           // barrier gradient pasting and switch slope
  double curvature = 1e-6;       // vanishing second derivative at barriers
  double convexity = 1e-8;       // allowed dip of the second derivative
  double pricing = 1e-12;        // slack on the intervention price inequalities
  double transversality = 1e-9;  // residual discounted value at the far horizon

  static VerifyTolerances uniform(double t);
};

struct ConditionCheck {
  bool pass = false;
  double worst = 0.0;     // largest normalized violation encountered
  double location = 0.0;  // state (or horizon) where the worst case occurred
};

// Outcome of auditing one BandSolution.  `pass` aggregates the ordering flag
// and every individual condition.
struct VerificationReport {
  ConditionCheck equation;           // generator equation with adversarial drift
  ConditionCheck switch_continuity;  // two branches agree through second order
  ConditionCheck gradient_sign;      // cost slope is negative left of the switch,
                                     // positive right of it
  ConditionCheck barrier_slope;      // gradient equals the unit control prices
  ConditionCheck barrier_curvature;  // second derivative vanishes at the barriers
  ConditionCheck convexity;
  ConditionCheck pricing_lower;      // injection price supports reflection
  ConditionCheck pricing_upper;      // withdrawal price supports reflection
  ConditionCheck transversality;
  bool ordered = false;
  bool pass = false;
  int grid_points = 0;  // samples per band region
  std::string error;    // non-empty if the audit itself could not run

  static constexpr int kDefaultGrid = 2001;
};

// Audits a solved band against the optimality conditions.  Analytic
// derivatives are cross-checked with one-sided differences at the barriers,
// and the far-horizon decay is spot-checked with a short worst-case
// simulation.  Never throws: internal failures surface in `error`.
VerificationReport verify(const BandSolution& solution,
                          int grid_points = VerificationReport::kDefaultGrid,
                          const VerifyTolerances& tolerances = {});

}  // namespace cashband
