#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace comodal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Nonlinear disutility of parcel delivery time, p(t) = a*(tanh(t/s - b) + 1).
/// Nondecreasing, bounded in [0, 2a].
struct DisutilityParams {
  double amplitude = 25.0;  // a, $
  double scale = 200.0;     // s, minutes
  double shift = 5.0;       // b, dimensionless

  double operator()(double t) const {
    return amplitude * (std::tanh(t / scale - shift) + 1.0);
  }
};

enum class DistFamily { Exponential, LogNormal };

/// Distributional assumptions for the pickup/drop-off races.
/// The log-normal family is parameterized by log-scale standard deviations for
/// the four timing variables (idle wait, drop-off time, flexible-dispatch wait,
/// pickup time) and two correlations against the idle wait.
struct DistributionSpec {
  DistFamily family = DistFamily::LogNormal;
  double sigma_wI = 0.5;
  double sigma_tg = 0.5;
  double sigma_wdg = 0.5;
  double sigma_tbar = 0.5;
  double rho_w = 0.0;  // corr(log idle wait, log dispatch wait)
  double rho_t = 0.0;  // corr(log idle wait, log pickup time)

  void validate() const;
};

/// Zone network: travel times, matching geometry constants, drop-off times.
struct Network {
  Index M = 0;
  Matrix t;   // M x M mean travel times (min), all entries > 0 including diagonal
  Vector L;   // per-zone matching constants (min * drivers^(1/2))
  Vector tg;  // per-zone mean drop-off times (min)

  void validate() const;
};

/// All exogenous market parameters. Times in minutes, money in $, rates in
/// orders/min; the wage q is quoted in $/hr and converted only at the profit
/// computation.
struct MarketParams {
  Matrix lambda_r0;  // potential passenger arrival rates (orders/min)
  Matrix lambda_d0;  // potential parcel arrival rates (orders/min)
  double N0 = 0.0;   // total driver pool
  double eps = 0.0;  // passenger fare sensitivity (1/$)
  double eta = 0.0;  // parcel fare sensitivity (1/$)
  double sigma = 0.0;  // driver wage sensitivity (1/$)
  Matrix c_r0;  // outside-option costs for travelers ($)
  Matrix c_d0;  // outside-option costs for parcel senders ($)
  double q0 = 0.0;       // outside wage ($/hr)
  double alpha_r = 0.0;  // passenger value of time ($/min)
  double alpha_d = 0.0;  // parcel customer value of time ($/min)
  double w_max = 0.0;    // waiting-time cap (min)
  int Ca = 1;            // vehicle parcel capacity
  DistributionSpec dist;
  DisutilityParams pd;

  void validate(const Network& net) const;
};

}  // namespace comodal
