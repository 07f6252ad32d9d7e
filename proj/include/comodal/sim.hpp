#pragma once

#include "comodal/types.hpp"

#include <cstdint>

namespace comodal {

/// Seeded discrete-event validation runs. Replications draw from independent
/// streams derived from (seed, stream index) by splitmix64, so the full output
/// is a pure function of the inputs and the seed.
struct SimConfig {
  std::uint64_t seed = 0;
  std::int64_t horizon_events = 1000000;  // events per replication
  int replications = 1;
  double warmup_fraction = 0.0;
};

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

struct OccupancyEstimate {
  Vector occupancy;  // time-weighted fraction per state
  Vector std_error;  // across replications (zero for a single replication)
};

/// Long-run occupancy of the jump chain with exponential holding times.
OccupancyEstimate simulate_ctmc(const Matrix& Pc, const Vector& hold,
                                const SimConfig& cfg);

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sampled first-arrival times from origin to dest with exponential sojourns.
MeanEstimate simulate_first_passage(const Matrix& P, const Matrix& S,
                                    Index origin, Index dest,
                                    const SimConfig& cfg, int walks);

/// Geometric-retry delivery walk: each arrival at dest succeeds with
/// p_drop(dest), otherwise the walk continues until the next return.
MeanEstimate simulate_delivery(const Matrix& P, const Matrix& S,
                               const Vector& p_drop, Index origin, Index dest,
                               const SimConfig& cfg, int walks);

struct RaceEstimate {
  double p_drop = 0.0;  // P(T_g < W_I)
  double p_wait = 0.0;  // P(W_dg < W_I)
  double p_time = 0.0;  // P(Tbar_g < W_I)
  double se_drop = 0.0;
  double se_wait = 0.0;
  double se_time = 0.0;
};

/// Empirical race probabilities under the configured family, with correlated
/// log-normal draws when the spec asks for them.
RaceEstimate simulate_race(const DistributionSpec& dist, double t_g,
                           double w_I, double w_dg, double tbar_g,
                           const SimConfig& cfg, int samples);

}  // namespace comodal
