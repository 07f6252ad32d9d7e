#include "comodal/market.hpp"

#include "comodal/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace comodal;

TEST_CASE("ride cost is the weighted waiting/fare sum") {
  CHECK(ride_cost(0.0, 0.0, 10.0, 3.2) == doctest::Approx(0.0));
  CHECK(ride_cost(1.0, 2.0, 5.0, 3.2) == doctest::Approx(13.2));
  CHECK(ride_cost(4.3, 1.0, 10.0, 3.2) == doctest::Approx(23.76));
}

TEST_CASE("delivery costs combine waits, disutility and fares") {
  DisutilityParams pd;  // a=25, s=200, b=5
  SUBCASE("zero inputs leave only the disutility") {
    const auto [flex, od] = delivery_costs(0, 0, 0, 0, 0, 0, 0.7, pd);
    CHECK(flex == doctest::Approx(pd(0.0)));
    CHECK(od == doctest::Approx(pd(0.0)));
  }
  SUBCASE("tanh midpoint contributes exactly the amplitude") {
    CHECK(pd(1000.0) == doctest::Approx(25.0));
  }
  SUBCASE("direct substitution") {
    const auto [flex, od] = delivery_costs(10, 1000, 9, 0, 0, 0, 0.7, pd);
    CHECK(flex == doctest::Approx(0.7 * 10 + 25 + 9));
    (void)od;
  }
}

TEST_CASE("ride demand is a two-way logit share") {
  CHECK(ride_demand(10.0, 7.0, 7.0, 0.12) == doctest::Approx(5.0));
  CHECK(ride_demand(10.0, 1e9, 7.0, 0.12) == doctest::Approx(0.0));
  // lambda0/(1 + e^{eps * 10}) with eps = 0.12
  const double expected = 10.0 / (1.0 + std::exp(1.2));
  CHECK(ride_demand(10.0, 17.0, 7.0, 0.12) == doctest::Approx(expected));
  CHECK(expected == doctest::Approx(2.3147).epsilon(1e-4));
}

TEST_CASE("delivery split is a three-way logit") {
  SUBCASE("symmetric costs split in thirds") {
    const auto [flex, od] = delivery_split(9.0, 5.0, 5.0, 5.0, 0.16);
    CHECK(flex == doctest::Approx(3.0));
    CHECK(od == doctest::Approx(3.0));
  }
  SUBCASE("an unreachable flexible option vanishes") {
    const auto [flex, od] = delivery_split(9.0, 1e9, 15.0, 15.0, 0.16);
    CHECK(flex == doctest::Approx(0.0));
    CHECK(od == doctest::Approx(4.5));  // two-way tie
  }
  SUBCASE("documented instance") {
    // oracle: direct softmax evaluation
    const double ef = std::exp(-0.16 * 10.0);
    const double eo = std::exp(-0.16 * 15.0);
    const double e0 = std::exp(-0.16 * 15.0);
    const auto [flex, od] = delivery_split(9.0, 10.0, 15.0, 15.0, 0.16);
    CHECK(flex == doctest::Approx(9.0 * ef / (ef + eo + e0)).epsilon(1e-12));
    CHECK(od == doctest::Approx(9.0 * eo / (ef + eo + e0)).epsilon(1e-12));
  }
}

TEST_CASE("driver supply and the documented calibration point") {
  CHECK(driver_supply(29.0, 29.0, 0.18, 10000) == doctest::Approx(5000.0));
  CHECK(driver_supply(-1e9, 29.0, 0.18, 10000) == doctest::Approx(0.0));
  // q - q0 = -3.223 puts roughly 3589 drivers on the platform
  CHECK(driver_supply(29.0 - 3.223, 29.0, 0.18, 10000) ==
        doctest::Approx(3589.0).epsilon(1e-4));
}

TEST_CASE("invert_wage is the exact inverse of driver_supply") {
  CHECK(invert_wage(5000.0, 10000.0, 0.18, 29.0) == doctest::Approx(29.0));
  CHECK(invert_wage(3589.0, 10000.0, 0.18, 29.0) ==
        doctest::Approx(25.77).epsilon(1e-3));
  CHECK_THROWS_AS(invert_wage(0.0, 10000, 0.18, 29.0), InfeasibleSupplyError);
  CHECK_THROWS_AS(invert_wage(10000.0, 10000, 0.18, 29.0),
                  InfeasibleSupplyError);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.01, 0.99);
  for (int k = 0; k < 200; ++k) {
    const double n = 10000.0 * unit(rng);
    const double q = invert_wage(n, 10000.0, 0.18, 29.0);
    CHECK(driver_supply(q, 29.0, 0.18, 10000.0) ==
          doctest::Approx(n).epsilon(1e-9));
  }
}

TEST_CASE("demand maps into [0, potential] and is monotone in own cost") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> cost(0.0, 60.0);
  for (int k = 0; k < 300; ++k) {
    const double c = cost(rng), c0 = cost(rng);
    const double lam = ride_demand(8.0, c, c0, 0.12);
    CHECK(lam > 0.0);
    CHECK(lam < 8.0);
    const double h = 1e-6;
    CHECK(ride_demand(8.0, c + h, c0, 0.12) < lam);

    const double cdf = cost(rng), cdo = cost(rng), cd0 = cost(rng);
    const auto [f1, f2] = delivery_split(1.0, cdf, cdo, cd0, 0.16);
    CHECK(f1 + f2 < 1.0);
    const auto [f1b, f2b] = delivery_split(1.0, cdf + h, cdo, cd0, 0.16);
    CHECK(f1b < f1);   // own cost up, flexible share down
    CHECK(f2b > f2);   // substitution toward on-demand
  }
}

TEST_CASE("disutility is nondecreasing, bounded and smooth") {
  DisutilityParams pd;
  double prev = pd(0.0);
  for (int k = 1; k <= 1000; ++k) {
    const double t = 3.0 * k;
    const double v = pd(t);
    CHECK(v >= prev - 1e-12);
    CHECK(v >= 0.0);
    CHECK(v <= 2.0 * pd.amplitude);
    // finite-difference slope stays nonnegative
    CHECK(pd(t + 1e-4) - pd(t - 1e-4) >= -1e-12);
    prev = v;
  }
}
