#pragma once

#include "comodal/types.hpp"

namespace comodal {

/// Per-zone success probabilities of the flexible pickup/drop-off races,
/// expanded by carried-parcel count for the driver chain.
struct SuccessRates {
  Vector p_drop_succ;    // P(drop-off finishes before the next on-demand match)
  Vector p_pick_succ_w;  // P(flexible dispatch arrives before the next match)
  Vector p_pick_succ_t;  // P(pickup trip finishes before the next match)
  Vector p_pick_succ;    // product of the two pickup factors
  Matrix p_pick_n;       // M x (Ca+1), pickup probability by carried count
  Matrix p_drop_n;       // M x (Ca+1), drop-off probability by carried count
};

/// Square-root-law waiting time L / sqrt(n_idle).
/// Throws DegenerateSupplyError when n_idle <= 0.
double waiting_time_ondemand(double L, double n_idle);

/// P(X < Y) for the configured family, where X and Y have the given means and,
/// for the log-normal family, the given log-scale sigmas and correlation.
/// Infinite mean_x yields 0; mean_x -> 0 yields 1.
double race_probability(double mean_x, double mean_y, double sigma_x,
                        double sigma_y, double rho, DistFamily family);

/// Probability that a drop-off attempt beats the driver's next on-demand match.
double success_drop(double t_g, double w_I, const DistributionSpec& dist);

struct PickProbs {
  double total;
  double wait_factor;  // dispatch-wait race
  double time_factor;  // pickup-trip race
};

/// Pickup success probability and its two factors.
PickProbs success_pick(double tbar_g, double w_dg, double w_I,
                       const DistributionSpec& dist);

/// Probability of carrying at least one parcel destined for the current zone.
double p_flex(double dest_share, int n);

/// Pickup/drop-off probabilities by carried count for one zone: pickup is
/// blocked at full capacity and competes with drop-off dispatch in between;
/// drop-off requires at least one parcel for this zone.
void pick_drop_by_count(double p_pick_succ, double p_drop_succ,
                        const Vector& p_flex_n, int Ca,
                        Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> pick_out,
                        Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> drop_out);

/// Zone destination shares of flexible demand; all-zero demand gives zeros.
Vector flexible_destination_shares(const Matrix& lambda_df);

/// Assemble all per-zone success rates. Entries of w_dg or tbar_g may be +inf
/// (disabled flexible channel), in which case the pickup factors vanish.
SuccessRates make_success_rates(const Vector& tg, const Vector& w_I,
                                const Vector& w_dg, const Vector& tbar_g,
                                const Vector& dest_share, int Ca,
                                const DistributionSpec& dist);

}  // namespace comodal
