#include "comodal/scenario.hpp"

#include "comodal/errors.hpp"
#include "comodal/report.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace comodal;
using namespace comodal::fixtures;

namespace {

ScenarioSpec tiny_scenario() {
  ScenarioSpec spec;
  spec.name = "tiny";
  spec.net = two_zone_network();
  spec.params = two_zone_params(spec.net);
  spec.demand_mode = DemandMode::Explicit;
  spec.ratio = 0.4;
  spec.sweep_levels = {0.0, 0.4};
  spec.solver.multistarts = 2;
  spec.solver.seed = 5;
  spec.solver.threads = 1;
  return spec;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("gravity synthesis") {
  std::mt19937_64 rng(7);
  const Index M = 4;
  const Matrix t = oracles::random_positive_matrix(rng, M, 3.0, 15.0);
  const Vector pop = oracles::random_positive_vector(rng, M, 1e4, 9e4);
  const Vector reg = oracles::random_positive_vector(rng, M, 1e3, 2e4);
  const Matrix lambda_r0 = oracles::random_positive_matrix(rng, M, 0.5, 4.0);
  SUBCASE("zero ratio gives a zero matrix") {
    const Matrix lam = synthesize_gravity(pop, reg, t, 0.0, lambda_r0);
    CHECK(lam.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("uniform inputs give a uniform matrix") {
    const Matrix lam = synthesize_gravity(
        Vector::Constant(M, 5e4), Vector::Constant(M, 4e3),
        Matrix::Constant(M, M, 8.0), 0.4, lambda_r0);
    CHECK((lam.array() - lam(0, 0)).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("the total is scaled exactly to the ratio") {
    for (double ratio : {0.1, 0.4, 0.77}) {
      const Matrix lam = synthesize_gravity(pop, reg, t, ratio, lambda_r0);
      CHECK(lam.sum() / lambda_r0.sum() ==
            doctest::Approx(ratio).epsilon(1e-12));
      CHECK(lam.minCoeff() > 0.0);
    }
  }
}

TEST_CASE("opposite-direction reshuffle") {
  SUBCASE("rank reversal sends the largest pair the smallest value") {
    Matrix lam(2, 2);
    lam << 4.0, 1.0, 1.0, 4.0;
    Matrix out = reshuffle_opposite(lam, 1.0);
    CHECK(out(0, 0) == doctest::Approx(1.0));
    CHECK(out(0, 1) == doctest::Approx(4.0));
    CHECK(out(1, 0) == doctest::Approx(4.0));
    CHECK(out(1, 1) == doctest::Approx(1.0));
  }
  SUBCASE("equal values stay equal up to scaling") {
    const Matrix lam = Matrix::Constant(2, 2, 3.0);
    const Matrix out = reshuffle_opposite(lam, 0.5);
    CHECK((out.array() - 1.5).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("multiset preserved and rank correlation is -1") {
    std::mt19937_64 rng(11);
    const Matrix lam = oracles::random_positive_matrix(rng, 3, 0.1, 5.0);
    const Matrix out = reshuffle_opposite(lam, 1.0);
    std::vector<double> a, b;
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j) {
        a.push_back(lam(i, j));
        b.push_back(out(i, j));
      }
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    for (std::size_t k = 0; k < sa.size(); ++k)
      CHECK(sa[k] == doctest::Approx(sb[k]).epsilon(1e-12));
    // Spearman correlation of ranks
    auto ranks = [](const std::vector<double>& v) {
      std::vector<int> idx(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
      std::sort(idx.begin(), idx.end(),
                [&](int x, int y) { return v[x] < v[y]; });
      std::vector<double> r(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) r[idx[i]] = i;
      return r;
    };
    const std::vector<double> ra = ranks(a), rb = ranks(b);
    double num = 0.0, da = 0.0, db = 0.0;
    const double mean = (a.size() - 1) / 2.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      num += (ra[k] - mean) * (rb[k] - mean);
      da += (ra[k] - mean) * (ra[k] - mean);
      db += (rb[k] - mean) * (rb[k] - mean);
    }
    CHECK(num / std::sqrt(da * db) == doctest::Approx(-1.0));
  }
}

TEST_CASE("scenario JSON round trip") {
  ScenarioSpec spec = tiny_scenario();
  const std::string text = scenario_to_json(spec);
  const ScenarioSpec back = scenario_from_json_text(text);
  CHECK(back.net.M == spec.net.M);
  CHECK((back.net.t - spec.net.t).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.params.lambda_r0 - spec.params.lambda_r0)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK(back.params.Ca == spec.params.Ca);
  CHECK(back.ratio == spec.ratio);
  CHECK(back.sweep_levels == spec.sweep_levels);
  CHECK(back.solver.seed == spec.solver.seed);
}

TEST_CASE("shipped scenario loads and validates") {
  const ScenarioSpec spec = load_scenario("scenarios/sf11.json");
  CHECK(spec.net.M == 11);
  CHECK(spec.demand_mode == DemandMode::Gravity);
  CHECK(spec.params.lambda_r0.sum() == doctest::Approx(1115.0).epsilon(1e-6));
  const MarketParams at4 = market_at_level(spec, 0.4);
  CHECK(at4.lambda_d0.sum() ==
        doctest::Approx(0.4 * spec.params.lambda_r0.sum()).epsilon(1e-12));
  const MarketParams at0 = market_at_level(spec, 0.0);
  CHECK(at0.lambda_d0.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("explicit demand mode scales the given pattern") {
  ScenarioSpec spec = tiny_scenario();
  const MarketParams at = market_at_level(spec, 0.3);
  CHECK(at.lambda_d0.sum() ==
        doctest::Approx(0.3 * spec.params.lambda_r0.sum()).epsilon(1e-12));
  // pattern preserved up to scale
  const double s = at.lambda_d0(0, 0) / spec.params.lambda_d0(0, 0);
  CHECK(at.lambda_d0(1, 0) ==
        doctest::Approx(s * spec.params.lambda_d0(1, 0)).epsilon(1e-12));
}

TEST_CASE("sweep level zero equals the ride-only benchmark") {
  ScenarioSpec spec = tiny_scenario();
  const std::vector<SweepRow> rows = sweep(spec, {0.0});
  const BenchmarkRow ride = run_benchmark(spec, 0.0, BenchmarkCase::RideOnly);
  CHECK(std::abs(rows[0].profit - ride.profit) /
            std::abs(ride.profit) <= 1e-6);
  CHECK(rows[0].customer_rate == 0.0);
}

TEST_CASE("benchmark structure on the tiny market") {
  ScenarioSpec spec = tiny_scenario();
  SUBCASE("zero level: ondemand-only and separate degenerate to ride-only") {
    const BenchmarkRow od =
        run_benchmark(spec, 0.0, BenchmarkCase::OndemandOnly);
    const BenchmarkRow ride = run_benchmark(spec, 0.0, BenchmarkCase::RideOnly);
    CHECK(od.delivery_rate == 0.0);
    // same market solved by a different parameterization; close, not exact
    CHECK(std::abs(od.profit - ride.profit) <= 0.02 * std::abs(ride.profit));
    const BenchmarkRow sep = run_benchmark(spec, 0.0, BenchmarkCase::Separate);
    CHECK(sep.delivery_rate == 0.0);
    CHECK(sep.profit <= ride.profit + 0.02 * std::abs(ride.profit));
  }
  SUBCASE("positive level orderings") {
    const BenchmarkRow integrated =
        run_benchmark(spec, 0.4, BenchmarkCase::Integrated);
    const BenchmarkRow od =
        run_benchmark(spec, 0.4, BenchmarkCase::OndemandOnly);
    const BenchmarkRow sep = run_benchmark(spec, 0.4, BenchmarkCase::Separate);
    CHECK(integrated.profit >= od.profit - 0.01 * std::abs(od.profit));
    CHECK(integrated.passenger_rate > sep.passenger_rate);
    CHECK(integrated.avg_flex_fare < integrated.avg_od_fare);
  }
}

TEST_CASE("report emission") {
  ScenarioSpec spec = tiny_scenario();
  const std::string outdir = "build/test_reports";
  std::filesystem::remove_all(outdir);
  SUBCASE("an empty sweep refuses to write anything") {
    ReportBundle bundle;
    CHECK_THROWS(emit_reports(bundle, outdir, scenario_to_json(spec), 5));
    CHECK_FALSE(std::filesystem::exists(outdir + "/sweep.csv"));
  }
  SUBCASE("emitted bytes are deterministic") {
    ReportBundle bundle;
    bundle.sweep = sweep(spec, {0.0, 0.4});
    bundle.benchmarks = run_all_benchmarks(spec, 0.4);
    bundle.benchmark_level = 0.4;
    const auto files =
        emit_reports(bundle, outdir, scenario_to_json(spec), 5);
    CHECK(files.size() >= 6);
    std::vector<std::string> first;
    for (const auto& f : files) first.push_back(slurp(outdir + "/" + f));
    std::filesystem::remove_all(outdir);
    emit_reports(bundle, outdir, scenario_to_json(spec), 5);
    for (std::size_t k = 0; k < files.size(); ++k)
      CHECK(slurp(outdir + "/" + files[k]) == first[k]);
  }
}
