#pragma once

#include "comodal/equilibrium.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace comodal {

/// Knobs for both optimization stages and the direct baseline.
struct SolverConfig {
  double r_lo = 0.2, r_hi = 8.0;    // ride fare bounds ($/min)
  double c_lo = 0.5, c_hi = 80.0;   // flexible generalized-cost bounds ($)
  double n_hi = 1500.0;             // idle drivers per zone, upper bound
  double fd_step = 1e-5;            // relative step for gradient checks
  double inner_fd_step = 1e-6;      // step inside the box-normalized solver
  double mu0 = 10.0;                // initial augmented-Lagrangian penalty
  double mu_growth = 10.0;
  int max_outer = 8;
  int max_inner = 160;              // iterations for the unconstrained stage
  int refine_max_inner = 30;        // inner iterations per penalty round
  int direct_max_inner = 80;
  double grad_tol = 1e-6;
  double bisect_tol = 1e-8;
  double constraint_tol = 1e-6;
  int multistarts = 10;
  std::uint64_t seed = 0;
  int threads = 0;                  // 0 = hardware concurrency

  /// Idle-driver lower bound implied by the waiting-time cap.
  Vector n_lower(const Network& net, const MarketParams& params) const;
};

struct StartReport {
  int start = 0;
  double approx_profit = -kInf;
  double refined_profit = -kInf;
  int approx_iterations = 0;
  int refine_outer = 0;
  long evaluations = 0;
  double wall_seconds = 0.0;
  double constraint_residual = kInf;
  bool diverged = false;
};

struct OptReport {
  ElementaryVars best_vars;
  double best_profit = -kInf;
  double approx_profit = -kInf;      // approx-stage profit of the winning start
  double constraint_residual = kInf;
  double wall_seconds = 0.0;
  bool diverged = false;
  long evaluations = 0;
  std::vector<StartReport> starts;
};

/// Random initial guess drawn from the published experiment box, clamped into
/// the solver bounds. Carries the full variable set; each solver uses the
/// blocks it needs.
struct InitialGuess {
  Vector r_r;
  Matrix c_df;
  Vector n_idle;
  Vector n_bar;
  Vector w_dg;
  Matrix lambda_r, lambda_df, lambda_do;
  Matrix r_df;
  double q = 0.0;
};

InitialGuess draw_initial_guess(const Network& net, const MarketParams& params,
                                const SolverConfig& cfg, std::uint64_t seed);

struct ApproxPoint {
  Vector r_r;
  Matrix c_df;
  Vector n_idle;
};

struct ApproxResult {
  ApproxPoint point;
  double profit = -kInf;
  int iterations = 0;
  long evaluations = 0;
};

/// Stage 1: maximize profit over (fares, flexible costs, idle supply) with the
/// truncated effective supply and the dispatch-wait bisection nested in every
/// objective evaluation. Throws ModelError when no start evaluates.
ApproxResult solve_approx(const Network& net, const MarketParams& params,
                          const SolverConfig& cfg, const ApproxPoint& start);

/// Derive the remaining variable blocks from a stage-1 point.
ElementaryVars expand_approx(const Network& net, const MarketParams& params,
                             const SolverConfig& cfg, const ApproxPoint& point);

/// Stage 2: augmented Lagrangian over the two nested equalities, warm-started.
/// Best feasible iterate is retained; a penalty blow-up returns the best point
/// seen with the diverged flag set.
OptReport refine_constrained(const Network& net, const MarketParams& params,
                             const SolverConfig& cfg,
                             const ElementaryVars& warm);

/// Two-stage multistart solve.
OptReport algorithm1(const Network& net, const MarketParams& params,
                     const SolverConfig& cfg);

/// Baseline: the profit problem over the full endogenous variable set with all
/// market relations as equality constraints, same penalty machinery.
OptReport direct_solve(const Network& net, const MarketParams& params,
                       const SolverConfig& cfg, const InitialGuess& start);

OptReport direct_solve_multistart(const Network& net,
                                  const MarketParams& params,
                                  const SolverConfig& cfg);

enum class FdMode { Central, Forward };

/// Finite-difference gradient with a relative step.
Vector fd_gradient(const std::function<double(const Vector&)>& f,
                   const Vector& x, double rel_step,
                   FdMode mode = FdMode::Central);

}  // namespace comodal
