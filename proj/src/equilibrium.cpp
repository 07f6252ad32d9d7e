#include "comodal/equilibrium.hpp"

#include "comodal/errors.hpp"
#include "comodal/market.hpp"

#include <cmath>

namespace comodal {

double profit_from_parts(const Vector& r_r, const Matrix& r_df,
                         const Matrix& lambda_r, const Matrix& lambda_do,
                         const Matrix& lambda_df, double q, double supply,
                         const Network& net) {
  double revenue = 0.0;
  for (Index i = 0; i < net.M; ++i) {
    for (Index j = 0; j < net.M; ++j) {
      revenue += r_r(i) * net.t(i, j) * (lambda_r(i, j) + lambda_do(i, j));
      if (lambda_df(i, j) > 0.0) revenue += r_df(i, j) * lambda_df(i, j);
    }
  }
  const double labor = supply > 0.0 ? supply * q / 60.0 : 0.0;
  return revenue - labor;
}

DemandBlock demand_block(const Vector& r_r, const Matrix& c_df,
                         const Vector& n_idle, const Network& net,
                         const MarketParams& params) {
  const Index M = net.M;
  DemandBlock db;
  db.w_r.resize(M);
  for (Index i = 0; i < M; ++i)
    db.w_r(i) = waiting_time_ondemand(net.L(i), n_idle(i));
  db.lambda_r.resize(M, M);
  db.lambda_df.resize(M, M);
  db.lambda_do.resize(M, M);
  for (Index i = 0; i < M; ++i) {
    for (Index j = 0; j < M; ++j) {
      const double c_r =
          ride_cost(db.w_r(i), r_r(i), net.t(i, j), params.alpha_r);
      db.lambda_r(i, j) = ride_demand(params.lambda_r0(i, j), c_r,
                                      params.c_r0(i, j), params.eps);
      const double c_do = params.alpha_d * db.w_r(i) + params.pd(net.t(i, j)) +
                          r_r(i) * net.t(i, j);
      const auto [flex, ondemand] =
          delivery_split(params.lambda_d0(i, j), c_df(i, j), c_do,
                         params.c_d0(i, j), params.eta);
      db.lambda_df(i, j) = flex;
      db.lambda_do(i, j) = ondemand;
    }
  }
  db.w_I.resize(M);
  for (Index i = 0; i < M; ++i) {
    const double outflow = db.lambda_r.row(i).sum() + db.lambda_do.row(i).sum();
    if (!(outflow > 0.0)) throw DegenerateZoneError(i);
    db.w_I(i) = n_idle(i) / outflow;
  }
  return db;
}

EquilibriumState evaluate(const ElementaryVars& vars, const Network& net,
                          const MarketParams& params) {
  const Index M = net.M;
  const int Ca = params.Ca;
  EquilibriumState st;

  DemandBlock db = demand_block(vars.r_r, vars.c_df, vars.n_idle, net, params);
  st.w_r = std::move(db.w_r);
  st.w_I = std::move(db.w_I);
  st.lambda_r = std::move(db.lambda_r);
  st.lambda_df = std::move(db.lambda_df);
  st.lambda_do = std::move(db.lambda_do);

  // Driver movement chain and flexible delivery times.
  st.chain = make_zone_chain(st.lambda_r, st.lambda_do, st.w_I, net.t);
  st.tbar_g.resize(M);
  for (Index i = 0; i < M; ++i)
    st.tbar_g(i) =
        vars.n_bar(i) > 0.0 ? net.L(i) / std::sqrt(vars.n_bar(i)) : kInf;
  const Vector share = flexible_destination_shares(st.lambda_df);
  // zones with no flexible outflow cannot dispatch pickups at all
  Vector w_dg_eff = vars.w_dg;
  for (Index i = 0; i < M; ++i)
    if (!(st.lambda_df.row(i).sum() > 0.0)) w_dg_eff(i) = kInf;
  st.rates = make_success_rates(net.tg, st.w_I, w_dg_eff, st.tbar_g, share,
                                Ca, params.dist);
  st.t_df = flexible_delivery_time(st.chain.ET, st.rates.p_drop_succ);

  // Driver chain over (zone, carried count) and the flexible pickup supply.
  st.ctmc = make_ctmc(st.chain.P, st.rates, vars.n_idle, st.w_I, net.tg,
                      w_dg_eff, st.tbar_g, M, Ca);
  st.n_ig = flexible_pickup_supply(vars.n_idle, st.ctmc.pi, st.rates);
  st.w_df.resize(M);
  for (Index i = 0; i < M; ++i)
    st.w_df(i) = st.n_ig(i) > 0.0 ? net.L(i) / std::sqrt(st.n_ig(i)) : kInf;

  // Recover the flexible fares from the promised generalized costs.
  st.r_df.resize(M, M);
  for (Index i = 0; i < M; ++i) {
    for (Index j = 0; j < M; ++j) {
      st.r_df(i, j) = vars.c_df(i, j) - params.alpha_d * st.w_df(i) -
                      params.pd(st.t_df(i, j));
      if (st.lambda_df(i, j) > 0.0 && st.r_df(i, j) < 0.0)
        st.negative_flex_fares = true;
    }
  }

  // Wage that exactly staffs the required driver-hours.
  double required = 0.0;
  for (Index i = 0; i < M; ++i)
    for (Index j = 0; j < M; ++j)
      required += (st.lambda_r(i, j) + st.lambda_do(i, j)) *
                  (net.t(i, j) + st.w_r(i) + st.w_I(i));
  st.required_drivers = required;
  st.q = invert_wage(required, params.N0, params.sigma, params.q0);

  st.r_r = vars.r_r;
  st.profit = profit_from_parts(vars.r_r, st.r_df, st.lambda_r, st.lambda_do,
                                st.lambda_df, st.q, required, net);

  // Reported (not enforced) residuals of the two nested relations.
  st.residuals.fixed_point.resize(M);
  st.residuals.little.resize(M);
  const Vector inbound = st.lambda_df.colwise().sum().transpose();
  Vector p_flex_full(M);
  for (Index i = 0; i < M; ++i) p_flex_full(i) = p_flex(share(i), Ca);
  const Vector rhs = effective_idle_supply_rhs(
      vars.n_idle, net.tg, inbound, st.ctmc.pi, p_flex_full, M, Ca);
  for (Index i = 0; i < M; ++i) {
    st.residuals.fixed_point(i) = vars.n_bar(i) - rhs(i);
    const double outflow = st.lambda_df.row(i).sum();
    st.residuals.little(i) =
        outflow > 0.0 && std::isfinite(vars.w_dg(i))
            ? vars.w_dg(i) -
                  st.rates.p_pick_succ(i) * vars.n_bar(i) / outflow
            : 0.0;
  }
  st.residuals.conservation = conservation_residual(st, net, params);
  double roundtrip = 0.0;
  for (Index i = 0; i < M; ++i) {
    if (!std::isfinite(st.w_df(i))) continue;
    for (Index j = 0; j < M; ++j) {
      const double back = params.alpha_d * st.w_df(i) +
                          params.pd(st.t_df(i, j)) + st.r_df(i, j);
      roundtrip = std::max(roundtrip, std::abs(back - vars.c_df(i, j)));
    }
  }
  st.residuals.c_df_roundtrip = roundtrip;
  return st;
}

ExistenceReport check_existence(const EquilibriumState& state,
                                const ElementaryVars& vars, const Network& net,
                                const MarketParams& params) {
  return existence_condition(vars.n_idle, net.tg, state.w_I, state.lambda_df,
                             state.chain.P, params.Ca, params.dist);
}

double profit(const EquilibriumState& state, const Network& net,
              const MarketParams& params) {
  const double supply =
      state.required_drivers > 0.0
          ? driver_supply(state.q, params.q0, params.sigma, params.N0)
          : 0.0;
  return profit_from_parts(state.r_r, state.r_df, state.lambda_r,
                           state.lambda_do, state.lambda_df, state.q, supply,
                           net);
}

double conservation_residual(const EquilibriumState& state, const Network& net,
                             const MarketParams& params) {
  const double supplied =
      driver_supply(state.q, params.q0, params.sigma, params.N0);
  return supplied - state.required_drivers;
}

}  // namespace comodal
