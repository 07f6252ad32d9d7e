#include "comodal/first_passage.hpp"

#include "comodal/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace comodal;

TEST_CASE("zone transition matrix from on-demand flows") {
  SUBCASE("uniform flows give uniform rows") {
    const Matrix lam = Matrix::Constant(3, 3, 2.0);
    const Matrix P = zone_transition_matrix(lam, Matrix::Zero(3, 3));
    CHECK((P.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("single destination per row") {
    Matrix lam = Matrix::Zero(2, 2);
    lam(0, 1) = 3.0;
    lam(1, 0) = 1.0;
    const Matrix P = zone_transition_matrix(lam, Matrix::Zero(2, 2));
    CHECK(P(0, 1) == doctest::Approx(1.0));
    CHECK(P(1, 0) == doctest::Approx(1.0));
  }
  SUBCASE("documented substitution") {
    Matrix lam_r(2, 2);
    lam_r << 1, 3, 2, 2;
    const Matrix P = zone_transition_matrix(lam_r, Matrix::Zero(2, 2));
    CHECK(P(0, 0) == doctest::Approx(0.25));
    CHECK(P(0, 1) == doctest::Approx(0.75));
    CHECK(P(1, 0) == doctest::Approx(0.5));
    CHECK(P(1, 1) == doctest::Approx(0.5));
  }
  SUBCASE("zero-outflow zone is an error naming the zone") {
    Matrix lam = Matrix::Zero(3, 3);
    lam(0, 1) = 1.0;
    lam(2, 0) = 1.0;
    try {
      zone_transition_matrix(lam, Matrix::Zero(3, 3));
      FAIL("expected DegenerateZoneError");
    } catch (const DegenerateZoneError& e) {
      CHECK(e.zone == 1);
    }
    const Matrix P = zone_transition_matrix_or_selfloop(lam, Matrix::Zero(3, 3));
    CHECK(P(1, 1) == doctest::Approx(1.0));
  }
}

TEST_CASE("transit times add cruising to travel") {
  const Matrix t = Matrix::Constant(3, 3, 5.0);
  SUBCASE("no cruising leaves travel times") {
    CHECK((transit_times(Vector::Zero(3), t) - t).cwiseAbs().maxCoeff() ==
          0.0);
  }
  SUBCASE("constant cruising shifts all rows") {
    const Matrix S = transit_times(Vector::Constant(3, 2.0), t);
    CHECK((S.array() - 7.0).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("rows differ only by the origin cruising time") {
    Vector w(3);
    w << 1.0, 2.0, 4.0;
    const Matrix S = transit_times(w, t);
    CHECK(((S.row(1) - S.row(0)).array() - 1.0).abs().maxCoeff() < 1e-15);
    CHECK(((S.row(2) - S.row(0)).array() - 3.0).abs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("first-passage times") {
  SUBCASE("single zone returns its own transit time") {
    Matrix P = Matrix::Constant(1, 1, 1.0);
    Matrix S = Matrix::Constant(1, 1, 7.5);
    const Matrix ET = first_passage_times(P, S);
    CHECK(ET(0, 0) == doctest::Approx(7.5));
  }
  SUBCASE("symmetric two-zone chain solved by hand") {
    // E = s + 0.5 E  =>  E = 2s for both the crossing and the return
    const Matrix P = Matrix::Constant(2, 2, 0.5);
    const Matrix S = Matrix::Constant(2, 2, 4.0);
    const Matrix ET = first_passage_times(P, S);
    CHECK(ET(0, 1) == doctest::Approx(8.0));
    CHECK(ET(1, 1) == doctest::Approx(8.0));
    CHECK(ET(0, 0) == doctest::Approx(8.0));
  }
  SUBCASE("random instances match the truncated path expansion") {
    std::mt19937_64 rng(101);
    for (int k = 0; k < 20; ++k) {
      const Index M = 3 + static_cast<Index>(rng() % 3);
      const Matrix P = oracles::random_stochastic(rng, M);
      const Matrix S = oracles::random_positive_matrix(rng, M, 2.0, 14.0);
      const Matrix ET = first_passage_times(P, S);
      const Matrix oracle = oracles::first_passage_path_expansion(P, S, 200);
      const double rel =
          ((ET - oracle).cwiseAbs().array() / oracle.array()).maxCoeff();
      CHECK(rel < 1e-6);
    }
  }
  SUBCASE("entries dominate the smallest one-step time") {
    std::mt19937_64 rng(131);
    for (int k = 0; k < 20; ++k) {
      const Index M = 4;
      const Matrix P = oracles::random_stochastic(rng, M);
      const Matrix S = oracles::random_positive_matrix(rng, M, 1.0, 9.0);
      const Matrix ET = first_passage_times(P, S);
      for (Index j = 0; j < M; ++j)
        for (Index i = 0; i < M; ++i)
          CHECK(ET(i, j) >= S.row(i).minCoeff() - 1e-12);
    }
  }
}

TEST_CASE("flexible delivery time with geometric retries") {
  const Matrix P = Matrix::Constant(2, 2, 0.5);
  const Matrix S = Matrix::Constant(2, 2, 4.0);
  const Matrix ET = first_passage_times(P, S);
  SUBCASE("certain drop-off means the first passage alone") {
    const Matrix t_df = flexible_delivery_time(ET, Vector::Constant(2, 1.0));
    CHECK(t_df(0, 1) == doctest::Approx(ET(0, 1)));
    CHECK(t_df(1, 1) == doctest::Approx(0.0));  // in place, first try wins
  }
  SUBCASE("coin-flip drop-off doubles the symmetric case") {
    const Matrix t_df = flexible_delivery_time(ET, Vector::Constant(2, 0.5));
    CHECK(t_df(0, 1) == doctest::Approx(8.0 + 8.0));
    CHECK(t_df(1, 1) == doctest::Approx(8.0));
  }
  SUBCASE("vanishing drop-off probability disables the channel") {
    Vector p(2);
    p << 0.5, 1e-9;
    const Matrix t_df = flexible_delivery_time(ET, p);
    CHECK(std::isinf(t_df(0, 1)));
    CHECK(std::isfinite(t_df(0, 0)));
  }
  SUBCASE("retry term keeps delivery above the first passage") {
    std::mt19937_64 rng(151);
    std::uniform_real_distribution<double> pdraw(0.05, 1.0);
    for (int k = 0; k < 50; ++k) {
      const Index M = 4;
      const Matrix Pr = oracles::random_stochastic(rng, M);
      const Matrix Sr = oracles::random_positive_matrix(rng, M, 1.0, 9.0);
      const Matrix ETr = first_passage_times(Pr, Sr);
      Vector pd(M);
      for (Index i = 0; i < M; ++i) pd(i) = pdraw(rng);
      const Matrix t_df = flexible_delivery_time(ETr, pd);
      for (Index i = 0; i < M; ++i)
        for (Index j = 0; j < M; ++j) {
          CHECK(t_df(i, j) >= 0.0);
          if (i != j) CHECK(t_df(i, j) >= ETr(i, j) - 1e-12);
        }
    }
  }
}
