#include "comodal/matching.hpp"

#include "comodal/errors.hpp"

#include <cmath>

namespace comodal {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

double waiting_time_ondemand(double L, double n_idle) {
  if (!(n_idle > 0.0))
    throw DegenerateSupplyError("idle-driver count must be positive");
  return L / std::sqrt(n_idle);
}

double race_probability(double mean_x, double mean_y, double sigma_x,
                        double sigma_y, double rho, DistFamily family) {
  if (!std::isfinite(mean_x) || mean_y <= 0.0) return 0.0;
  if (mean_x <= 0.0) return 1.0;
  if (family == DistFamily::Exponential) return mean_y / (mean_x + mean_y);
  // Log-normal with mean-preserving location: mu = log(mean) - sigma^2/2.
  const double var = sigma_x * sigma_x + sigma_y * sigma_y -
                     2.0 * rho * sigma_x * sigma_y;
  const double z = (std::log(mean_y) - 0.5 * sigma_y * sigma_y -
                    std::log(mean_x) + 0.5 * sigma_x * sigma_x) /
                   std::sqrt(var);
  return normal_cdf(z);
}

double success_drop(double t_g, double w_I, const DistributionSpec& dist) {
  return race_probability(t_g, w_I, dist.sigma_tg, dist.sigma_wI, 0.0,
                          dist.family);
}

PickProbs success_pick(double tbar_g, double w_dg, double w_I,
                       const DistributionSpec& dist) {
  PickProbs p;
  p.wait_factor = race_probability(w_dg, w_I, dist.sigma_wdg, dist.sigma_wI,
                                   dist.rho_w, dist.family);
  p.time_factor = race_probability(tbar_g, w_I, dist.sigma_tbar, dist.sigma_wI,
                                   dist.rho_t, dist.family);
  p.total = p.wait_factor * p.time_factor;
  return p;
}

double p_flex(double dest_share, int n) {
  if (n <= 0) return 0.0;
  return 1.0 - std::pow(1.0 - dest_share, n);
}

void pick_drop_by_count(double p_pick_succ, double p_drop_succ,
                        const Vector& p_flex_n, int Ca,
                        Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> pick_out,
                        Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> drop_out) {
  for (int n = 0; n <= Ca; ++n) {
    if (n == 0) {
      pick_out(n) = p_pick_succ;
      drop_out(n) = 0.0;
    } else if (n < Ca) {
      pick_out(n) = p_pick_succ * (1.0 - p_flex_n(n));
      drop_out(n) = p_drop_succ * p_flex_n(n);
    } else {
      pick_out(n) = 0.0;
      drop_out(n) = p_drop_succ * p_flex_n(n);
    }
  }
}

Vector flexible_destination_shares(const Matrix& lambda_df) {
  const double total = lambda_df.sum();
  if (total <= 0.0) return Vector::Zero(lambda_df.cols());
  return lambda_df.colwise().sum().transpose() / total;
}

SuccessRates make_success_rates(const Vector& tg, const Vector& w_I,
                                const Vector& w_dg, const Vector& tbar_g,
                                const Vector& dest_share, int Ca,
                                const DistributionSpec& dist) {
  const Index M = tg.size();
  SuccessRates out;
  out.p_drop_succ.resize(M);
  out.p_pick_succ_w.resize(M);
  out.p_pick_succ_t.resize(M);
  out.p_pick_succ.resize(M);
  out.p_pick_n.resize(M, Ca + 1);
  out.p_drop_n.resize(M, Ca + 1);
  Vector flex(Ca + 1);
  for (Index i = 0; i < M; ++i) {
    out.p_drop_succ(i) = success_drop(tg(i), w_I(i), dist);
    const PickProbs pk = success_pick(tbar_g(i), w_dg(i), w_I(i), dist);
    out.p_pick_succ_w(i) = pk.wait_factor;
    out.p_pick_succ_t(i) = pk.time_factor;
    out.p_pick_succ(i) = pk.total;
    for (int n = 0; n <= Ca; ++n) flex(n) = p_flex(dest_share(i), n);
    pick_drop_by_count(pk.total, out.p_drop_succ(i), flex, Ca,
                       out.p_pick_n.row(i), out.p_drop_n.row(i));
  }
  return out;
}

}  // namespace comodal
