#include "comodal/sim.hpp"

#include "comodal/ctmc.hpp"
#include "comodal/first_passage.hpp"
#include "comodal/matching.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace comodal;

TEST_CASE("ctmc occupancy simulation") {
  SUBCASE("a single state owns all the time") {
    const Matrix Pc = Matrix::Constant(1, 1, 1.0);
    SimConfig cfg;
    cfg.seed = 3;
    cfg.horizon_events = 1000;
    const OccupancyEstimate occ =
        simulate_ctmc(Pc, Vector::Constant(1, 4.0), cfg);
    CHECK(occ.occupancy(0) == doctest::Approx(1.0));
  }
  SUBCASE("fixed seeds reproduce estimates exactly") {
    std::mt19937_64 rng(7);
    const Matrix Pc = oracles::random_stochastic(rng, 4);
    const Vector hold = oracles::random_positive_vector(rng, 4, 1.0, 8.0);
    SimConfig cfg;
    cfg.seed = 99;
    cfg.horizon_events = 20000;
    cfg.replications = 2;
    const OccupancyEstimate a = simulate_ctmc(Pc, hold, cfg);
    const OccupancyEstimate b = simulate_ctmc(Pc, hold, cfg);
    CHECK((a.occupancy - b.occupancy).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.std_error - b.std_error).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("six-state chain converges to the analytic distribution") {
    std::mt19937_64 rng(13);
    const Matrix Pc = oracles::random_stochastic(rng, 6);
    const Vector hold = oracles::random_positive_vector(rng, 6, 1.0, 8.0);
    const Vector pi = limiting_probabilities(Pc, hold);
    SimConfig cfg;
    cfg.seed = 17;
    cfg.horizon_events = 1000000;
    const OccupancyEstimate occ = simulate_ctmc(Pc, hold, cfg);
    CHECK((occ.occupancy - pi).cwiseAbs().sum() <= 0.02);
  }
}

TEST_CASE("first-passage walks") {
  SUBCASE("one zone samples a single sojourn") {
    const Matrix P = Matrix::Constant(1, 1, 1.0);
    const Matrix S = Matrix::Constant(1, 1, 6.0);
    SimConfig cfg;
    cfg.seed = 5;
    const MeanEstimate est = simulate_first_passage(P, S, 0, 0, cfg, 100000);
    CHECK(std::abs(est.mean - 6.0) / 6.0 < 0.01);
  }
  SUBCASE("symmetric two-zone chain doubles the step time") {
    const Matrix P = Matrix::Constant(2, 2, 0.5);
    const Matrix S = Matrix::Constant(2, 2, 4.0);
    SimConfig cfg;
    cfg.seed = 11;
    const MeanEstimate est = simulate_first_passage(P, S, 0, 1, cfg, 100000);
    CHECK(std::abs(est.mean - 8.0) / 8.0 < 0.02);
  }
  SUBCASE("random three-zone instances match analytic means") {
    std::mt19937_64 rng(19);
    for (int k = 0; k < 3; ++k) {
      const Matrix P = oracles::random_stochastic(rng, 3);
      const Matrix S = oracles::random_positive_matrix(rng, 3, 2.0, 10.0);
      const Matrix ET = first_passage_times(P, S);
      SimConfig cfg;
      cfg.seed = 23 + k;
      const MeanEstimate est = simulate_first_passage(P, S, 0, 2, cfg, 100000);
      CHECK(std::abs(est.mean - ET(0, 2)) / ET(0, 2) < 0.02);
    }
  }
}

TEST_CASE("delivery walks with geometric retries") {
  const Matrix P = Matrix::Constant(2, 2, 0.5);
  const Matrix S = Matrix::Constant(2, 2, 4.0);
  SUBCASE("certain drop-off equals the first-passage walk") {
    SimConfig cfg;
    cfg.seed = 29;
    const MeanEstimate fp = simulate_first_passage(P, S, 0, 1, cfg, 50000);
    const MeanEstimate dv =
        simulate_delivery(P, S, Vector::Constant(2, 1.0), 0, 1, cfg, 50000);
    CHECK(std::abs(dv.mean - fp.mean) / fp.mean < 0.02);
  }
  SUBCASE("coin-flip drop-off doubles the symmetric delivery time") {
    SimConfig cfg;
    cfg.seed = 31;
    const MeanEstimate dv =
        simulate_delivery(P, S, Vector::Constant(2, 0.5), 0, 1, cfg, 100000);
    CHECK(std::abs(dv.mean - 16.0) / 16.0 < 0.02);
  }
  SUBCASE("random instances match the retry formula") {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> pdraw(0.25, 0.95);
    for (int k = 0; k < 3; ++k) {
      const Matrix Pr = oracles::random_stochastic(rng, 3);
      const Matrix Sr = oracles::random_positive_matrix(rng, 3, 2.0, 9.0);
      Vector pd(3);
      for (Index i = 0; i < 3; ++i) pd(i) = pdraw(rng);
      const Matrix ET = first_passage_times(Pr, Sr);
      const Matrix t_df = flexible_delivery_time(ET, pd);
      SimConfig cfg;
      cfg.seed = 41 + k;
      const MeanEstimate dv = simulate_delivery(Pr, Sr, pd, 0, 2, cfg, 100000);
      CHECK(std::abs(dv.mean - t_df(0, 2)) / t_df(0, 2) < 0.02);
    }
  }
}

TEST_CASE("race sampling matches the closed forms") {
  SUBCASE("equal exponential means is a fair race") {
    DistributionSpec dist;
    dist.family = DistFamily::Exponential;
    SimConfig cfg;
    cfg.seed = 43;
    const RaceEstimate est = simulate_race(dist, 5.0, 5.0, 5.0, 5.0, cfg,
                                           200000);
    CHECK(std::abs(est.p_drop - 0.5) <= 3.0 * est.se_drop);
  }
  SUBCASE("lognormal symmetric point is also fair") {
    DistributionSpec dist;
    SimConfig cfg;
    cfg.seed = 47;
    const RaceEstimate est = simulate_race(dist, 5.0, 5.0, 5.0, 5.0, cfg,
                                           200000);
    CHECK(std::abs(est.p_drop - 0.5) <= 3.0 * est.se_drop);
    CHECK(std::abs(est.p_wait - 0.5) <= 3.0 * est.se_wait);
    CHECK(std::abs(est.p_time - 0.5) <= 3.0 * est.se_time);
  }
  SUBCASE("asymmetric lognormal draws match the normal-cdf formula") {
    DistributionSpec dist;
    dist.sigma_wI = 0.6;
    dist.sigma_tg = 0.4;
    dist.sigma_wdg = 0.7;
    dist.sigma_tbar = 0.3;
    dist.rho_w = 0.35;
    dist.rho_t = -0.2;
    SimConfig cfg;
    cfg.seed = 53;
    const double tg = 4.0, wi = 7.0, wdg = 9.0, tbar = 3.0;
    const RaceEstimate est = simulate_race(dist, tg, wi, wdg, tbar, cfg,
                                           400000);
    const double p_drop = success_drop(tg, wi, dist);
    const PickProbs pick = success_pick(tbar, wdg, wi, dist);
    CHECK(std::abs(est.p_drop - p_drop) <= 3.0 * est.se_drop);
    CHECK(std::abs(est.p_wait - pick.wait_factor) <= 3.0 * est.se_wait);
    CHECK(std::abs(est.p_time - pick.time_factor) <= 3.0 * est.se_time);
  }
  SUBCASE("correlated exponential draws are not modeled; rho is ignored") {
    DistributionSpec dist;
    dist.family = DistFamily::Exponential;
    dist.rho_w = 0.9;
    SimConfig cfg;
    cfg.seed = 59;
    const RaceEstimate est = simulate_race(dist, 3.0, 6.0, 4.0, 5.0, cfg,
                                           200000);
    CHECK(std::abs(est.p_drop - success_drop(3.0, 6.0, dist)) <=
          3.0 * est.se_drop + 1e-3);
  }
}
