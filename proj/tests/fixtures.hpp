// Small markets shared across test suites.
#pragma once

#include "comodal/equilibrium.hpp"
#include "comodal/types.hpp"

namespace comodal::fixtures {

inline Network two_zone_network(bool symmetric = false) {
  Network net;
  net.M = 2;
  net.t.resize(2, 2);
  if (symmetric)
    net.t << 5.0, 10.0, 10.0, 5.0;
  else
    net.t << 5.0, 10.0, 12.0, 6.0;
  net.L = Vector::Constant(2, 43.0);
  net.tg = symmetric ? Vector::Constant(2, 4.0) : (Vector(2) << 4.0, 5.0).finished();
  return net;
}

inline MarketParams two_zone_params(const Network& net,
                                    bool symmetric = false) {
  MarketParams p;
  p.lambda_r0.resize(2, 2);
  p.lambda_d0.resize(2, 2);
  if (symmetric) {
    p.lambda_r0 << 3.0, 4.0, 4.0, 3.0;
    p.lambda_d0 << 1.0, 1.5, 1.5, 1.0;
  } else {
    p.lambda_r0 << 3.0, 4.0, 5.0, 2.0;
    p.lambda_d0 << 1.0, 1.5, 2.0, 0.8;
  }
  p.N0 = 600.0;
  p.eps = 0.12;
  p.eta = 0.16;
  p.sigma = 0.18;
  p.c_r0 = 1.5 * net.t;
  p.c_d0 = 1.8 * net.t;
  p.q0 = 29.0;
  p.alpha_r = 3.2;
  p.alpha_d = 0.7;
  p.w_max = 6.0;
  p.Ca = 2;
  return p;
}

inline ElementaryVars reference_vars(const Network& net) {
  ElementaryVars v;
  v.r_r = Vector::Constant(net.M, 1.5);
  v.c_df = Matrix::Constant(net.M, net.M, 15.0);
  v.n_idle = Vector::Constant(net.M, 80.0);
  v.n_bar = Vector::Constant(net.M, 60.0);
  v.w_dg = Vector::Constant(net.M, 8.0);
  return v;
}

inline Network one_zone_network() {
  Network net;
  net.M = 1;
  net.t = Matrix::Constant(1, 1, 8.0);
  net.L = Vector::Constant(1, 43.0);
  net.tg = Vector::Constant(1, 4.0);
  return net;
}

inline MarketParams one_zone_params() {
  MarketParams p;
  p.lambda_r0 = Matrix::Constant(1, 1, 12.0);
  p.lambda_d0 = Matrix::Constant(1, 1, 5.0);
  p.N0 = 2000.0;
  p.eps = 0.12;
  p.eta = 0.16;
  p.sigma = 0.18;
  p.c_r0 = Matrix::Constant(1, 1, 14.0);
  p.c_d0 = Matrix::Constant(1, 1, 16.0);
  p.q0 = 29.0;
  p.alpha_r = 3.2;
  p.alpha_d = 0.7;
  p.w_max = 6.0;
  p.Ca = 1;
  return p;
}

}  // namespace comodal::fixtures
