#pragma once

#include "comodal/ctmc.hpp"
#include "comodal/first_passage.hpp"
#include "comodal/matching.hpp"
#include "comodal/types.hpp"

namespace comodal {

/// Decision vector of the reformulated problem: everything else in the market
/// is reconstructed from these five blocks.
struct ElementaryVars {
  Vector r_r;     // per-zone ride fares ($/min)
  Matrix c_df;    // generalized flexible-delivery costs ($)
  Vector n_idle;  // per-zone idle drivers N^I
  Vector n_bar;   // per-zone effective idle supply
  Vector w_dg;    // per-zone driver dispatch waits (min)
};

struct EquilibriumResiduals {
  double conservation = 0.0;   // driver-hours accounting identity
  Vector fixed_point;          // effective-idle-supply gap per zone
  Vector little;               // dispatch-wait relation gap per zone
  double c_df_roundtrip = 0.0; // recovered-fare consistency, max abs
};

/// Every endogenous quantity reconstructed from the elementary variables.
struct EquilibriumState {
  Matrix lambda_r, lambda_df, lambda_do;  // arrival rates (orders/min)
  Vector w_r;      // passenger waits (min)
  Vector w_df;     // flexible-customer waits (min), +inf when no pickup supply
  Vector w_I;      // idle cruising times (min)
  Vector tbar_g;   // pickup trip times (min), +inf when flexible channel off
  Matrix t_df;     // flexible delivery times (min)
  Vector r_r;      // per-zone ride fares, echoed from the inputs ($/min)
  Matrix r_df;     // recovered flexible fares ($)
  ZoneChain chain;
  SuccessRates rates;
  CtmcSolution ctmc;
  Vector n_ig;     // flexible pickup supply per zone
  double q = 0.0;  // wage ($/hr)
  double required_drivers = 0.0;
  double profit = 0.0;  // $/min
  bool negative_flex_fares = false;
  EquilibriumResiduals residuals;
};

/// Demand-side quantities determined by (r_r, c_df, n_idle) alone.
struct DemandBlock {
  Matrix lambda_r, lambda_df, lambda_do;
  Vector w_r, w_I;
};

/// Throws DegenerateSupplyError / DegenerateZoneError.
DemandBlock demand_block(const Vector& r_r, const Matrix& c_df,
                         const Vector& n_idle, const Network& net,
                         const MarketParams& params);

/// One-pass reconstruction of the market state. Throws DegenerateSupplyError,
/// DegenerateZoneError, InfeasibleSupplyError or SingularChainError with
/// zone/OD context when the inputs leave the model's domain.
EquilibriumState evaluate(const ElementaryVars& vars, const Network& net,
                          const MarketParams& params);

/// Existence condition for the effective idle supply at this state.
ExistenceReport check_existence(const EquilibriumState& state,
                                const ElementaryVars& vars, const Network& net,
                                const MarketParams& params);

/// Platform profit recomputed from the state's parts ($/min). The wage is
/// converted from $/hr here and nowhere else. Zero hired drivers cost zero.
double profit(const EquilibriumState& state, const Network& net,
              const MarketParams& params);

/// Residual of the driver-hours conservation identity (drivers).
double conservation_residual(const EquilibriumState& state, const Network& net,
                             const MarketParams& params);

/// Revenue/labor breakdown shared by the pipeline and the direct baseline.
double profit_from_parts(const Vector& r_r, const Matrix& r_df,
                         const Matrix& lambda_r, const Matrix& lambda_do,
                         const Matrix& lambda_df, double q, double supply,
                         const Network& net);

}  // namespace comodal
