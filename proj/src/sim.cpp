#include "comodal/sim.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace comodal {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over the (seed, stream) pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

using Rng = std::mt19937_64;

std::vector<std::discrete_distribution<int>> row_samplers(const Matrix& P) {
  std::vector<std::discrete_distribution<int>> rows;
  rows.reserve(P.rows());
  for (Index i = 0; i < P.rows(); ++i) {
    std::vector<double> w(P.cols());
    for (Index j = 0; j < P.cols(); ++j) w[j] = std::max(0.0, P(i, j));
    rows.emplace_back(w.begin(), w.end());
  }
  return rows;
}

double exp_draw(Rng& rng, double mean) {
  std::exponential_distribution<double> d(1.0 / mean);
  return d(rng);
}

struct WalkStats {
  double mean = 0.0;
  double within_se = 0.0;
};

// Mean over replication means; SE across replications when possible, else the
// within-replication spread of the first one.
MeanEstimate combine(const std::vector<WalkStats>& reps) {
  MeanEstimate est;
  const double n = static_cast<double>(reps.size());
  for (const auto& r : reps) est.mean += r.mean;
  est.mean /= n;
  if (reps.size() > 1) {
    double ss = 0.0;
    for (const auto& r : reps) ss += (r.mean - est.mean) * (r.mean - est.mean);
    est.std_error = std::sqrt(ss / (n * (n - 1.0)));
  } else {
    est.std_error = reps.front().within_se;
  }
  return est;
}

}  // namespace

OccupancyEstimate simulate_ctmc(const Matrix& Pc, const Vector& hold,
                                const SimConfig& cfg) {
  const Index S = Pc.rows();
  auto rows = row_samplers(Pc);
  Matrix rep_occ(S, cfg.replications);
  const std::int64_t warmup =
      static_cast<std::int64_t>(cfg.warmup_fraction * cfg.horizon_events);
  for (int rep = 0; rep < cfg.replications; ++rep) {
    Rng rng(stream_seed(cfg.seed, static_cast<std::uint64_t>(rep)));
    Vector time_in = Vector::Zero(S);
    Index s = 0;
    double total = 0.0;
    for (std::int64_t ev = 0; ev < cfg.horizon_events; ++ev) {
      const double dwell = exp_draw(rng, hold(s));
      if (ev >= warmup) {
        time_in(s) += dwell;
        total += dwell;
      }
      s = rows[s](rng);
    }
    rep_occ.col(rep) = time_in / total;
  }
  OccupancyEstimate est;
  est.occupancy = rep_occ.rowwise().mean();
  est.std_error = Vector::Zero(S);
  if (cfg.replications > 1) {
    for (Index i = 0; i < S; ++i) {
      double ss = 0.0;
      for (int rep = 0; rep < cfg.replications; ++rep) {
        const double d = rep_occ(i, rep) - est.occupancy(i);
        ss += d * d;
      }
      est.std_error(i) = std::sqrt(
          ss / (cfg.replications * std::max(1, cfg.replications - 1)));
    }
  }
  return est;
}

MeanEstimate simulate_first_passage(const Matrix& P, const Matrix& S,
                                    Index origin, Index dest,
                                    const SimConfig& cfg, int walks) {
  auto rows = row_samplers(P);
  std::vector<WalkStats> reps(cfg.replications);
  for (int rep = 0; rep < cfg.replications; ++rep) {
    Rng rng(stream_seed(cfg.seed, 0x1000 + static_cast<std::uint64_t>(rep)));
    double sum = 0.0, ss = 0.0;
    for (int w = 0; w < walks; ++w) {
      Index z = origin;
      double t = 0.0;
      do {
        const Index next = rows[z](rng);
        t += exp_draw(rng, S(z, next));
        z = next;
      } while (z != dest);
      sum += t;
      ss += t * t;
    }
    reps[rep].mean = sum / walks;
    reps[rep].within_se = std::sqrt(
        std::max(0.0, ss / walks - reps[rep].mean * reps[rep].mean) /
        std::max(1, walks - 1));
  }
  return combine(reps);
}

MeanEstimate simulate_delivery(const Matrix& P, const Matrix& S,
                               const Vector& p_drop, Index origin, Index dest,
                               const SimConfig& cfg, int walks) {
  auto rows = row_samplers(P);
  std::vector<WalkStats> reps(cfg.replications);
  for (int rep = 0; rep < cfg.replications; ++rep) {
    Rng rng(stream_seed(cfg.seed, 0x2000 + static_cast<std::uint64_t>(rep)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double sum = 0.0, ss = 0.0;
    for (int w = 0; w < walks; ++w) {
      Index z = origin;
      double t = 0.0;
      // the first attempt happens on arrival (immediately when origin == dest)
      while (true) {
        while (z != dest) {
          const Index next = rows[z](rng);
          t += exp_draw(rng, S(z, next));
          z = next;
        }
        if (unit(rng) < p_drop(dest)) break;
        // failed attempt: leave and come back
        do {
          const Index next = rows[z](rng);
          t += exp_draw(rng, S(z, next));
          z = next;
        } while (z != dest);
      }
      sum += t;
      ss += t * t;
    }
    reps[rep].mean = sum / walks;
    reps[rep].within_se = std::sqrt(
        std::max(0.0, ss / walks - reps[rep].mean * reps[rep].mean) /
        std::max(1, walks - 1));
  }
  return combine(reps);
}

RaceEstimate simulate_race(const DistributionSpec& dist, double t_g,
                           double w_I, double w_dg, double tbar_g,
                           const SimConfig& cfg, int samples) {
  Rng rng(stream_seed(cfg.seed, 0x3000));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  long drop_wins = 0, wait_wins = 0, time_wins = 0;
  for (int k = 0; k < samples; ++k) {
    double wi, tg_draw, wdg_draw, tbar_draw;
    if (dist.family == DistFamily::Exponential) {
      wi = -w_I * std::log1p(-unit(rng));
      tg_draw = -t_g * std::log1p(-unit(rng));
      wdg_draw = -w_dg * std::log1p(-unit(rng));
      tbar_draw = -tbar_g * std::log1p(-unit(rng));
    } else {
      // correlated log-normals with mean-preserving locations
      const double z0 = gauss(rng);
      const double z1 = gauss(rng);
      const double z2 = gauss(rng);
      const double z3 = gauss(rng);
      auto loc = [](double mean, double sigma) {
        return std::log(mean) - 0.5 * sigma * sigma;
      };
      wi = std::exp(loc(w_I, dist.sigma_wI) + dist.sigma_wI * z0);
      tg_draw = std::exp(loc(t_g, dist.sigma_tg) + dist.sigma_tg * z1);
      wdg_draw = std::exp(
          loc(w_dg, dist.sigma_wdg) +
          dist.sigma_wdg * (dist.rho_w * z0 +
                            std::sqrt(1.0 - dist.rho_w * dist.rho_w) * z2));
      tbar_draw = std::exp(
          loc(tbar_g, dist.sigma_tbar) +
          dist.sigma_tbar * (dist.rho_t * z0 +
                             std::sqrt(1.0 - dist.rho_t * dist.rho_t) * z3));
    }
    if (tg_draw < wi) ++drop_wins;
    if (wdg_draw < wi) ++wait_wins;
    if (tbar_draw < wi) ++time_wins;
  }
  RaceEstimate est;
  const double n = static_cast<double>(samples);
  est.p_drop = drop_wins / n;
  est.p_wait = wait_wins / n;
  est.p_time = time_wins / n;
  auto se = [n](double p) { return std::sqrt(p * (1.0 - p) / n); };
  est.se_drop = se(est.p_drop);
  est.se_wait = se(est.p_wait);
  est.se_time = se(est.p_time);
  return est;
}

}  // namespace comodal
