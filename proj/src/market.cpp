#include "comodal/market.hpp"

#include "comodal/errors.hpp"

#include <algorithm>
#include <cmath>

namespace comodal {

void DistributionSpec::validate() const {
  if (family == DistFamily::LogNormal) {
    if (!(sigma_wI > 0.0 && sigma_tg > 0.0 && sigma_wdg > 0.0 &&
          sigma_tbar > 0.0))
      throw ModelError("log-normal sigmas must be positive");
    if (std::abs(rho_w) > 1.0 || std::abs(rho_t) > 1.0)
      throw ModelError("correlations must lie in [-1, 1]");
    // Variances under the square roots of the race probabilities.
    if (!(sigma_wdg * sigma_wdg + sigma_wI * sigma_wI -
              2.0 * rho_w * sigma_wdg * sigma_wI > 0.0) ||
        !(sigma_tbar * sigma_tbar + sigma_wI * sigma_wI -
              2.0 * rho_t * sigma_tbar * sigma_wI > 0.0))
      throw ModelError("race variance must be strictly positive");
  }
}

void Network::validate() const {
  if (M < 1) throw ModelError("network needs at least one zone");
  if (t.rows() != M || t.cols() != M || L.size() != M || tg.size() != M)
    throw ModelError("network dimensions inconsistent with M");
  if ((t.array() <= 0.0).any()) throw ModelError("travel times must be > 0");
  if ((L.array() <= 0.0).any())
    throw ModelError("matching constants must be > 0");
  if ((tg.array() <= 0.0).any())
    throw ModelError("drop-off times must be > 0");
}

void MarketParams::validate(const Network& net) const {
  const Index M = net.M;
  auto square = [M](const Matrix& m) { return m.rows() == M && m.cols() == M; };
  if (!square(lambda_r0) || !square(lambda_d0) || !square(c_r0) ||
      !square(c_d0))
    throw ModelError("market matrices must be M x M");
  if ((lambda_r0.array() < 0.0).any() || (lambda_d0.array() < 0.0).any())
    throw ModelError("potential rates must be nonnegative");
  if (!(eps > 0.0 && eta > 0.0 && sigma > 0.0))
    throw ModelError("logit sensitivities must be positive");
  if (!(N0 > 0.0)) throw ModelError("driver pool must be positive");
  if (!(alpha_d < alpha_r))
    throw ModelError("parcel customers must be less impatient than passengers");
  if (Ca < 1) throw ModelError("vehicle capacity must be at least 1");
  if (!(w_max > 0.0)) throw ModelError("waiting-time cap must be positive");
  dist.validate();
}

double ride_cost(double w_r, double r_r, double t, double alpha_r) {
  return alpha_r * w_r + r_r * t;
}

std::pair<double, double> delivery_costs(double w_df, double t_df, double r_df,
                                         double w_r, double t, double r_r,
                                         double alpha_d,
                                         const DisutilityParams& pd) {
  const double flexible = alpha_d * w_df + pd(t_df) + r_df;
  const double ondemand = alpha_d * w_r + pd(t) + r_r * t;
  return {flexible, ondemand};
}

double ride_demand(double lambda0, double c, double c0, double eps) {
  // exp(-eps*c) / (exp(-eps*c) + exp(-eps*c0)), written to avoid overflow
  return lambda0 / (1.0 + std::exp(eps * (c - c0)));
}

std::pair<double, double> delivery_split(double lambda0, double c_df,
                                         double c_do, double c_d0,
                                         double eta) {
  const double m = std::min({c_df, c_do, c_d0});
  const double ef = std::exp(-eta * (c_df - m));
  const double eo = std::exp(-eta * (c_do - m));
  const double e0 = std::exp(-eta * (c_d0 - m));
  const double denom = ef + eo + e0;
  return {lambda0 * ef / denom, lambda0 * eo / denom};
}

double driver_supply(double q, double q0, double sigma, double N0) {
  return N0 / (1.0 + std::exp(sigma * (q0 - q)));
}

double invert_wage(double n_required, double N0, double sigma, double q0) {
  if (!(n_required > 0.0) || !(n_required < N0))
    throw InfeasibleSupplyError(n_required, N0);
  return q0 + std::log(n_required / (N0 - n_required)) / sigma;
}

}  // namespace comodal
