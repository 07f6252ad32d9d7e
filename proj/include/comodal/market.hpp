#pragma once

#include "comodal/types.hpp"

#include <utility>

namespace comodal {

/// Generalized passenger cost: alpha_r * waiting + fare rate * trip time.
double ride_cost(double w_r, double r_r, double t, double alpha_r);

/// Generalized parcel costs (flexible, on-demand). On-demand parcels share the
/// passenger waiting time and per-time fare.
std::pair<double, double> delivery_costs(double w_df, double t_df, double r_df,
                                         double w_r, double t, double r_r,
                                         double alpha_d,
                                         const DisutilityParams& pd);

/// Binary-logit passenger demand against the outside option.
double ride_demand(double lambda0, double c, double c0, double eps);

/// Three-way logit split of parcel demand: (flexible, on-demand) rates.
std::pair<double, double> delivery_split(double lambda0, double c_df,
                                         double c_do, double c_d0, double eta);

/// Binary-logit driver supply as a function of the platform wage.
double driver_supply(double q, double q0, double sigma, double N0);

/// Wage that makes driver_supply() return exactly n_required.
/// Throws InfeasibleSupplyError unless 0 < n_required < N0.
double invert_wage(double n_required, double N0, double sigma, double q0);

}  // namespace comodal
