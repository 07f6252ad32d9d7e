#pragma once

#include "comodal/matching.hpp"
#include "comodal/types.hpp"

namespace comodal {

/// Driver chain over (zone, carried parcels) states with its limiting
/// distribution. States are indexed s = z*(Ca+1) + n. A solution is immutable
/// after construction and safe to share across threads.
struct CtmcSolution {
  Index M = 0;
  int Ca = 0;
  Matrix Pc;       // S x S jump transition matrix, S = M*(Ca+1)
  Vector hold;     // per-state mean holding time (min)
  Vector pi;       // limiting probabilities
  Vector n_state;  // per-state idle-driver counts
  bool reducible_warning = false;

  Index state(Index z, int n) const { return z * (Ca + 1) + n; }
};

/// Jump transitions: pickup raises the carried count, drop-off lowers it, and
/// the complement moves the driver along the zone chain at the same count.
/// Throws InvalidRatesError if pick+drop exceeds 1 for some state.
Matrix build_transitions(const Matrix& P_zone, const SuccessRates& rates);

/// Mean holding time per state: drop-off, dispatch-plus-pickup, and cruising
/// contributions weighted by their transition probabilities.
Vector holding_times(const Matrix& Pc, const Vector& w_I, const Vector& tg,
                     const Vector& w_dg, const Vector& tbar_g, Index M, int Ca);

/// Limiting probabilities from the balance equations: one balance row is
/// replaced by the normalization row and the system solved by dense LU. A
/// reducible chain (more than one terminal class) falls back to damped power
/// iteration started from start_mass and sets *reducible; states unreachable
/// from the start carry zero mass.
Vector limiting_probabilities(const Matrix& Pc, const Vector& hold,
                              bool* reducible = nullptr,
                              const Vector* start_mass = nullptr);

/// Start mass for reducible fallbacks: drivers begin empty, spread over the
/// (zone, 0) states.
Vector empty_vehicle_start(Index M, int Ca);

/// Idle drivers in each (zone, count) state from the zone totals and the
/// conditional carried-count distribution.
Vector per_state_driver_counts(const Vector& n_idle, const Vector& pi, Index M,
                               int Ca);

/// Idle drivers able to complete a flexible pickup, per zone. Zones with zero
/// limiting mass contribute zero.
Vector flexible_pickup_supply(const Vector& n_idle, const Vector& pi,
                              const SuccessRates& rates);

CtmcSolution make_ctmc(const Matrix& P_zone, const SuccessRates& rates,
                       const Vector& n_idle, const Vector& w_I,
                       const Vector& tg, const Vector& w_dg,
                       const Vector& tbar_g, Index M, int Ca);

/// Driver waiting time for a flexible dispatch: the root of
///   w = p_pick_succ(w_I, w, L/sqrt(n_bar)) * n_bar / lambda_out,
/// found by bisection (the gap is strictly increasing in w). Zero flexible
/// outflow yields the +inf sentinel.
double pickup_wait(double n_bar, double lambda_out, double w_I, double L,
                   const DistributionSpec& dist, double tol = 1e-8);

/// Right-hand side of the effective-idle-supply fixed point for every zone,
/// given the limiting distribution of the current iterate.
Vector effective_idle_supply_rhs(const Vector& n_idle, const Vector& tg,
                                 const Vector& inbound_flex, const Vector& pi,
                                 const Vector& p_flex_Ca, Index M, int Ca);

struct ExistenceReport {
  Vector margin;            // per zone; condition holds iff margin >= 0
  std::vector<bool> holds;  // per zone
  bool all_hold = true;
};

/// Existence condition for the effective idle supply, evaluated on the
/// zero-supply limit chain (pickup probabilities vanish, drop-off and movement
/// edges remain).
ExistenceReport existence_condition(const Vector& n_idle, const Vector& tg,
                                    const Vector& w_I, const Matrix& lambda_df,
                                    const Matrix& P_zone, int Ca,
                                    const DistributionSpec& dist);

struct FlexSupplySolution {
  Vector n_bar;     // effective idle supply
  Vector w_dg;      // dispatch waits (+inf where flexible demand is zero)
  Vector tbar_g;    // pickup trip times (+inf likewise)
  Vector residual;  // fixed-point residual per zone
  int iterations = 0;
  bool converged = false;
};

/// Damped Picard solve of the effective-idle-supply fixed point, with the
/// dispatch-wait bisection nested in every iterate. Falls back to per-zone
/// bisection on the scalar residual if Picard stalls. Throws
/// InfeasibleRegionError when the existence condition fails.
FlexSupplySolution solve_flexible_supply(const Vector& n_idle,
                                         const Vector& tg, const Vector& w_I,
                                         const Matrix& lambda_df,
                                         const Matrix& P_zone, const Vector& L,
                                         int Ca, const DistributionSpec& dist,
                                         double tol = 1e-8,
                                         int max_iterations = 500);

}  // namespace comodal
