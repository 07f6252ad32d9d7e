#pragma once

#include "comodal/optimizer.hpp"
#include "comodal/types.hpp"

#include <string>
#include <vector>

namespace comodal {

enum class DemandMode { Explicit, Gravity, Opposite };

/// A scenario file: network, market parameters, how parcel demand is
/// synthesized, and solver settings.
struct ScenarioSpec {
  std::string name;
  Network net;
  MarketParams params;  // lambda_d0 is the explicit-mode pattern (may be zero)
  DemandMode demand_mode = DemandMode::Explicit;
  Vector pop;  // gravity: per-zone population
  Vector reg;  // gravity: per-zone registered businesses
  double ratio = 0.0;  // default delivery demand level
  std::vector<double> sweep_levels;
  SolverConfig solver;
};

ScenarioSpec load_scenario(const std::string& path);
ScenarioSpec scenario_from_json_text(const std::string& text);
/// Canonical serialization used for hashing and round trips.
std::string scenario_to_json(const ScenarioSpec& spec);

/// Gravity-model parcel demand: production follows population at the
/// destination (home end), attraction follows businesses at the origin, with
/// 1/t friction; scaled so the total equals ratio times the ride total.
Matrix synthesize_gravity(const Vector& pop, const Vector& reg,
                          const Matrix& t, double ratio,
                          const Matrix& lambda_r0);

/// Rank-reversed parcel demand: the largest ride OD pair receives the
/// smallest parcel value (ties broken by OD index), scaled to the ratio.
Matrix reshuffle_opposite(const Matrix& lambda_r0, double ratio);

/// Market parameters with parcel potential set for the given demand level.
MarketParams market_at_level(const ScenarioSpec& spec, double level);

struct SweepRow {
  double level = 0.0;
  double profit = 0.0;
  double drivers = 0.0;
  double passenger_rate = 0.0;
  double customer_rate = 0.0;  // parcel orders served per minute
  double wage = 0.0;
  double constraint_residual = 0.0;
};

/// One full solve per level; later levels also try the previous level's
/// solution as a warm start.
std::vector<SweepRow> sweep(const ScenarioSpec& spec,
                            const std::vector<double>& levels);

enum class BenchmarkCase { Integrated, Separate, OndemandOnly, RideOnly };

std::string benchmark_name(BenchmarkCase c);

struct BenchmarkRow {
  std::string name;
  double level = 0.0;
  double profit = 0.0;
  double drivers = 0.0;
  double passenger_rate = 0.0;
  double delivery_rate = 0.0;
  double avg_flex_fare = 0.0;  // $/order, 0 when the channel is absent
  double avg_od_fare = 0.0;    // $/order
  double wage = 0.0;
  bool cycled = false;  // separate case: best response did not settle
  Vector zonal_flex;    // flexible orders originating per zone
  Vector zonal_od;      // on-demand parcel orders originating per zone
  Vector zonal_idle;    // idle drivers per zone
};

BenchmarkRow run_benchmark(const ScenarioSpec& spec, double level,
                           BenchmarkCase which);

std::vector<BenchmarkRow> run_all_benchmarks(const ScenarioSpec& spec,
                                             double level);

}  // namespace comodal
