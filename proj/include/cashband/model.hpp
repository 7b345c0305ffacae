#pragma once

// Model layer for the cash-reserve control suite: parameter set, effective
// drifts under the worst-case drift distortion, fundamental solutions of the
// homogeneous pricing ODE, and the perpetual (no-intervention) holding cost.
//
// Conventions used throughout:
//  - holding cost c(x) = c_pos*max(x,0) + c_neg*max(-x,0)
//  - DriftSign::Minus means effective drift mu(x) - kappa*sigma (governing
//    left of the switch point), DriftSign::Plus means mu(x) + kappa*sigma
//  - all model objects are immutable after construction

#include <array>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace cashband {

// invalid parameter values or unsupported parameter/operation combinations
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// numerical construction of a model object failed (overflow, degeneracy)
class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DiffusionKind { Abm, Ou };

// uncontrolled reference dynamics: dX = alpha dt + sigma dB (Abm) or
// dX = -eta X dt + sigma dB (Ou)
struct DiffusionSpec {
  DiffusionKind kind = DiffusionKind::Abm;
  double alpha = 0.0;  // Abm drift level
  double eta = 0.0;    // Ou mean-reversion speed

  static DiffusionSpec abm(double alpha) { return {DiffusionKind::Abm, alpha, 0.0}; }
  static DiffusionSpec ou(double eta) { return {DiffusionKind::Ou, 0.0, eta}; }
};

enum class DriftSign { Minus, Plus };

inline double sign_factor(DriftSign s) { return s == DriftSign::Minus ? -1.0 : 1.0; }

struct ModelParams {
  double rho = 0.0;  // discount rate, > 0
  DiffusionSpec diffusion;
  double sigma = 0.0;   // volatility, > 0
  double kappa = 0.0;   // drift-ambiguity radius, >= 0
  double c_neg = 0.0;   // holding cost slope below 0, > 0
  double c_pos = 0.0;   // holding cost slope above 0, > 0
  double l_cost = 0.0;  // proportional cost per unit injected at the lower barrier, > 0
  double u_cost = 0.0;  // proportional cost per unit withdrawn at the upper barrier, > 0

  void validate() const;  // throws ModelError
  bool is_ou() const { return diffusion.kind == DiffusionKind::Ou; }
  double reference_drift(double x) const;
  double drift(double x, DriftSign s) const;  // reference_drift -/+ kappa*sigma
};

double holding_cost(double x, const ModelParams& p);

struct FeasibilityReport {
  bool pass = false;
  std::vector<std::string> violations;
};

// cost conditions guaranteeing the control band is optimal; pass iff empty
FeasibilityReport feasibility_check(const ModelParams& p);

// roots of (sigma^2/2) chi^2 + mu chi - rho = 0 for the constant effective
// drift mu = alpha -/+ kappa*sigma; beta > 0 > gamma. Abm only.
struct QuadraticRoots {
  double beta = 0.0;
  double gamma = 0.0;
};
QuadraticRoots quadratic_roots(const ModelParams& p, DriftSign s);

// particular solution f(x) = a*x + b of the inhomogeneous pricing equation
// with unit-slope source, under the sign-s effective drift
struct AffineCoeffs {
  double a = 0.0;
  double b = 0.0;
};
AffineCoeffs affine_coeffs(const ModelParams& p, DriftSign s);

struct CurveEval {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
  double width() const { return hi - lo; }
};

class FundamentalPair;

// one solution of the homogeneous equation (sigma^2/2) phi'' + mu(x) phi' =
// rho phi, normalized to phi(0) = 1; either a closed-form exponential or a
// tabulated curve evaluated by quintic Hermite interpolation
class FundamentalSolution {
 public:
  // throws std::domain_error outside the working interval (tabulated case)
  CurveEval at(double x) const;

 private:
  friend class FundamentalPair;

  struct Exponential {
    double rate = 0.0;
  };
  struct Table {
    Interval domain;
    double x0 = 0.0;  // abscissa of nodes[0]
    double h = 0.0;   // node spacing
    // per node: value, d1, d2, d3, d4; derivatives above d1 come from the ODE
    std::vector<std::array<double, 5>> nodes;
    double rho = 0.0, half_sig2 = 0.0, mu0 = 0.0, mu1 = 0.0;  // mu(x) = mu0 + mu1*x
  };
  std::variant<Exponential, std::shared_ptr<const Table>> impl_{Exponential{}};
};

// the increasing/decreasing positive solution pair for one drift sign
class FundamentalPair {
 public:
  // `inner` is the interval on which evaluations must be supported; it must
  // contain 0. Throws ModelError / ConstructionError.
  static FundamentalPair build(const ModelParams& p, DriftSign s, Interval inner);

  const FundamentalSolution& increasing() const { return inc_; }
  const FundamentalSolution& decreasing() const { return dec_; }
  Interval domain() const { return domain_; }

 private:
  FundamentalSolution inc_, dec_;
  Interval domain_;
};

// expected discounted holding cost with no interventions, under the sign-s
// worst-case drift; piecewise analytic around 0 and C2 there
class PerpetualCost {
 public:
  // `pair` must outlive the returned object
  static PerpetualCost build(const ModelParams& p, DriftSign s, const FundamentalPair& pair);

  CurveEval at(double x) const;
  double e_hat() const { return e_hat_; }      // weight on the increasing solution (x < 0)
  double e_check() const { return e_check_; }  // weight on the decreasing solution (x >= 0)
  AffineCoeffs affine() const { return affine_; }

 private:
  const FundamentalPair* pair_ = nullptr;
  double c_neg_ = 0.0, c_pos_ = 0.0;
  double e_hat_ = 0.0, e_check_ = 0.0;
  AffineCoeffs affine_;
};

// everything downstream code needs for one parameter set: both drift-sign
// fundamental pairs and perpetual costs (shared when kappa == 0)
class ModelAssets {
 public:
  static std::shared_ptr<const ModelAssets> build(const ModelParams& p, Interval inner);

  const ModelParams& params() const { return params_; }
  Interval inner() const { return inner_; }
  const FundamentalPair& pair(DriftSign s) const;
  const PerpetualCost& perpetual(DriftSign s) const;

  // evaluate perpetual(s) + a*increasing_s + b*decreasing_s at x
  CurveEval branch(DriftSign s, double a, double b, double x) const;

 private:
  ModelParams params_;
  Interval inner_;
  bool shared_ = false;
  std::unique_ptr<FundamentalPair> pair_minus_, pair_plus_;
  std::unique_ptr<PerpetualCost> perp_minus_, perp_plus_;
};

// evaluation window wide enough for band search at the given parameters
Interval default_working_interval(const ModelParams& p);

}  // namespace cashband
