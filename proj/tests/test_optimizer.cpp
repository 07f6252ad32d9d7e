#include "comodal/optimizer.hpp"

#include "comodal/errors.hpp"
#include "comodal/sim.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace comodal;
using namespace comodal::fixtures;

namespace {

SolverConfig toy_config() {
  SolverConfig cfg;
  cfg.multistarts = 3;
  cfg.seed = 1;
  cfg.threads = 1;
  return cfg;
}

}  // namespace

TEST_CASE("finite-difference gradients") {
  SUBCASE("central differences are exact for quadratics") {
    auto f = [](const Vector& x) {
      return 3.0 * x(0) * x(0) - 2.0 * x(0) * x(1) + 0.5 * x(1) * x(1) +
             4.0 * x(0) - x(1);
    };
    Vector x(2);
    x << 1.3, -0.7;
    const Vector g = fd_gradient(f, x, 1e-5, FdMode::Central);
    CHECK(g(0) == doctest::Approx(6.0 * x(0) - 2.0 * x(1) + 4.0).epsilon(1e-10));
    CHECK(g(1) == doctest::Approx(-2.0 * x(0) + x(1) - 1.0).epsilon(1e-10));
  }
  SUBCASE("zero function has zero gradient") {
    auto f = [](const Vector&) { return 0.0; };
    const Vector g = fd_gradient(f, Vector::Ones(4), 1e-5);
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("central and forward agree on the profit pipeline") {
    const Network net = two_zone_network();
    const MarketParams params = two_zone_params(net);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < 5; ++k) {
      ElementaryVars vars = reference_vars(net);
      vars.r_r.array() += 0.3 * unit(rng);
      vars.c_df.array() += 2.0 * unit(rng);
      vars.n_idle.array() += 30.0 * unit(rng);
      auto f = [&](const Vector& x) {
        ElementaryVars v = vars;
        v.r_r = x.head(2);
        v.n_idle = x.segment(2, 2);
        v.n_bar = v.n_idle * 0.7;
        return evaluate(v, net, params).profit;
      };
      Vector x(4);
      x << vars.r_r, vars.n_idle;
      const Vector gc = fd_gradient(f, x, 1e-5, FdMode::Central);
      const Vector gf = fd_gradient(f, x, 1e-5, FdMode::Forward);
      CHECK((gc - gf).norm() / gc.norm() < 1e-3);
    }
  }
}

TEST_CASE("initial guesses stay in the published box and the bounds") {
  const Network net = two_zone_network();
  const MarketParams params = two_zone_params(net);
  SolverConfig cfg = toy_config();
  const Vector n_lo = cfg.n_lower(net, params);
  for (std::uint64_t seed : {1ull, 17ull, 92ull}) {
    const InitialGuess a = draw_initial_guess(net, params, cfg, seed);
    const InitialGuess b = draw_initial_guess(net, params, cfg, seed);
    CHECK((a.r_r - b.r_r).cwiseAbs().maxCoeff() == 0.0);  // deterministic
    for (Index i = 0; i < net.M; ++i) {
      CHECK(a.r_r(i) >= 1.0);
      CHECK(a.r_r(i) <= 2.0);
      CHECK(a.n_idle(i) >= n_lo(i));
      CHECK(a.n_idle(i) <= 250.0);
      CHECK(a.n_bar(i) >= 50.0 - 1e-12);
      CHECK(a.n_bar(i) <= a.n_idle(i));
      CHECK(a.w_dg(i) >= 5.0);
      CHECK(a.w_dg(i) <= 15.0);
      for (Index j = 0; j < net.M; ++j) {
        CHECK(a.c_df(i, j) >= 10.0);
        CHECK(a.c_df(i, j) <= 20.0);
        CHECK(a.lambda_r(i, j) >= 0.15 * params.lambda_r0(i, j));
        CHECK(a.lambda_r(i, j) <= 0.25 * params.lambda_r0(i, j));
      }
    }
    CHECK(a.q >= 20.0);
    CHECK(a.q <= 30.0);
  }
}

TEST_CASE("stage one reduces to ride-only pricing without parcels") {
  const Network net = one_zone_network();
  MarketParams params = one_zone_params();
  params.lambda_d0.setZero();
  SolverConfig cfg = toy_config();
  const InitialGuess g = draw_initial_guess(net, params, cfg, 7);
  const ApproxResult res =
      solve_approx(net, params, cfg, {g.r_r, g.c_df, g.n_idle});

  // grid oracle over (fare, idle supply)
  const Vector n_lo = cfg.n_lower(net, params);
  double best = -kInf;
  const int G = 140;
  for (int a = 0; a <= G; ++a) {
    for (int b = 0; b <= G; ++b) {
      ApproxPoint p;
      p.r_r = Vector::Constant(1, cfg.r_lo + (cfg.r_hi - cfg.r_lo) * a / G);
      p.n_idle =
          Vector::Constant(1, n_lo(0) + (cfg.n_hi - n_lo(0)) * b / G);
      p.c_df = Matrix::Constant(1, 1, 15.0);
      try {
        const ElementaryVars vars = expand_approx(net, params, cfg, p);
        best = std::max(best, evaluate(vars, net, params).profit);
      } catch (const ModelError&) {
      }
    }
  }
  CHECK(res.profit >= best - 0.05);  // grid resolution tolerance
  CHECK(res.profit <= best + 0.5);
}

TEST_CASE("symmetric market yields symmetric stage-one fares") {
  const Network net = two_zone_network(true);
  const MarketParams params = two_zone_params(net, true);
  SolverConfig cfg = toy_config();
  // symmetric deterministic start
  ApproxPoint start;
  start.r_r = Vector::Constant(2, 1.5);
  start.c_df = Matrix::Constant(2, 2, 15.0);
  start.n_idle = Vector::Constant(2, 200.0);
  const ApproxResult res = solve_approx(net, params, cfg, start);
  CHECK(res.point.r_r(0) == doctest::Approx(res.point.r_r(1)).epsilon(1e-6));
  CHECK(res.point.n_idle(0) ==
        doctest::Approx(res.point.n_idle(1)).epsilon(1e-6));
}

TEST_CASE("refinement retains a feasible warm start") {
  const Network net = one_zone_network();
  const MarketParams params = one_zone_params();
  SolverConfig cfg = toy_config();
  const InitialGuess g = draw_initial_guess(net, params, cfg, 3);
  const ApproxResult approx =
      solve_approx(net, params, cfg, {g.r_r, g.c_df, g.n_idle});
  const ElementaryVars warm = expand_approx(net, params, cfg, approx.point);
  const OptReport rep = refine_constrained(net, params, cfg, warm);
  CHECK(rep.constraint_residual <= cfg.constraint_tol);
  CHECK_FALSE(rep.diverged);
  // retention: never worse than the warm point under the exact relations
  const EquilibriumState warm_st = evaluate(warm, net, params);
  CHECK(rep.best_profit >= warm_st.profit - 1e-6);
}

TEST_CASE("two-stage solve is deterministic under a fixed seed") {
  const Network net = one_zone_network();
  const MarketParams params = one_zone_params();
  SolverConfig cfg = toy_config();
  cfg.threads = 2;  // must not affect the merged outcome
  const OptReport a = algorithm1(net, params, cfg);
  const OptReport b = algorithm1(net, params, cfg);
  CHECK(a.best_profit == b.best_profit);
  CHECK(a.constraint_residual == b.constraint_residual);
  CHECK((a.best_vars.r_r - b.best_vars.r_r).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.best_vars.c_df - b.best_vars.c_df).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ride-only capability of the full algorithm") {
  const Network net = two_zone_network();
  MarketParams params = two_zone_params(net);
  params.lambda_d0.setZero();
  SolverConfig cfg = toy_config();
  cfg.multistarts = 2;
  const OptReport rep = algorithm1(net, params, cfg);
  CHECK_FALSE(rep.diverged);
  CHECK(rep.constraint_residual <= cfg.constraint_tol);
  const EquilibriumState st = evaluate(rep.best_vars, net, params);
  CHECK(st.lambda_df.cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.lambda_do.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("direct baseline agrees with the two-stage algorithm on the toy") {
  const Network net = one_zone_network();
  const MarketParams params = one_zone_params();
  SolverConfig cfg = toy_config();
  cfg.multistarts = 4;
  cfg.threads = 2;
  cfg.direct_max_inner = 300;
  cfg.max_outer = 10;
  const OptReport alg = algorithm1(net, params, cfg);
  const OptReport direct = direct_solve_multistart(net, params, cfg);
  CHECK_FALSE(direct.diverged);
  CHECK(std::abs(direct.best_profit - alg.best_profit) /
            std::abs(alg.best_profit) <
        1e-3);
  // a feasible warm start from the winner must not improve much
  const EquilibriumState st = evaluate(alg.best_vars, net, params);
  InitialGuess warm;
  warm.r_r = alg.best_vars.r_r;
  warm.q = st.q;
  warm.n_idle = alg.best_vars.n_idle;
  warm.n_bar = alg.best_vars.n_bar;
  warm.w_dg = alg.best_vars.w_dg;
  warm.r_df = st.r_df;
  warm.lambda_r = st.lambda_r;
  warm.lambda_df = st.lambda_df;
  warm.lambda_do = st.lambda_do;
  const OptReport polished = direct_solve(net, params, cfg, warm);
  CHECK(polished.best_profit <=
        alg.best_profit + 0.01 * std::abs(alg.best_profit));
  CHECK(polished.best_profit >= alg.best_profit - 1e-6);
}
