#include "comodal/ctmc.hpp"

#include "comodal/errors.hpp"

#include <algorithm>
#include <cmath>

namespace comodal {

Matrix build_transitions(const Matrix& P_zone, const SuccessRates& rates) {
  const Index M = P_zone.rows();
  const int Ca = static_cast<int>(rates.p_pick_n.cols()) - 1;
  const Index S = M * (Ca + 1);
  Matrix Pc = Matrix::Zero(S, S);
  for (Index z = 0; z < M; ++z) {
    for (int n = 0; n <= Ca; ++n) {
      const Index s = z * (Ca + 1) + n;
      const double pick = (n < Ca) ? rates.p_pick_n(z, n) : 0.0;
      const double drop = (n > 0) ? rates.p_drop_n(z, n) : 0.0;
      if (pick + drop > 1.0 + 1e-12) throw InvalidRatesError(z, n);
      if (pick > 0.0) Pc(s, s + 1) = pick;
      if (drop > 0.0) Pc(s, s - 1) = drop;
      const double move = 1.0 - pick - drop;
      for (Index z2 = 0; z2 < M; ++z2)
        Pc(s, z2 * (Ca + 1) + n) += move * P_zone(z, z2);
    }
  }
  return Pc;
}

Vector holding_times(const Matrix& Pc, const Vector& w_I, const Vector& tg,
                     const Vector& w_dg, const Vector& tbar_g, Index M,
                     int Ca) {
  Vector hold(M * (Ca + 1));
  for (Index z = 0; z < M; ++z) {
    for (int n = 0; n <= Ca; ++n) {
      const Index s = z * (Ca + 1) + n;
      const double drop = (n > 0) ? Pc(s, s - 1) : 0.0;
      const double pick = (n < Ca) ? Pc(s, s + 1) : 0.0;
      const double move = 1.0 - pick - drop;
      double t = move * w_I(z) + drop * tg(z);
      if (pick > 0.0) t += pick * (w_dg(z) + tbar_g(z));
      hold(s) = t;
    }
  }
  return hold;
}

namespace {

// Damped power iteration on the jump chain, started from the given mass.
// Used for reducible chains, where the limit depends on where drivers begin.
Vector jump_chain_mass_power(const Matrix& Pc, const Vector& start) {
  Vector x = start / start.sum();
  for (int it = 0; it < 100000; ++it) {
    Vector next = 0.5 * x + 0.5 * (Pc.transpose() * x);
    const double delta = (next - x).cwiseAbs().maxCoeff();
    x = next;
    if (delta < 1e-14) break;
  }
  return x;
}

// The balance system has a unique solution exactly when the chain has a
// single terminal communicating class.
bool unique_terminal_class(const Matrix& Pc) {
  const Index S = Pc.rows();
  std::vector<std::vector<Index>> out(S);
  for (Index i = 0; i < S; ++i)
    for (Index j = 0; j < S; ++j)
      if (Pc(i, j) > 0.0 && i != j) out[i].push_back(j);
  // reachability by BFS per state (S is small)
  std::vector<std::vector<bool>> reach(S, std::vector<bool>(S, false));
  for (Index i = 0; i < S; ++i) {
    std::vector<Index> stack{i};
    reach[i][i] = true;
    while (!stack.empty()) {
      const Index v = stack.back();
      stack.pop_back();
      for (Index w : out[v])
        if (!reach[i][w]) {
          reach[i][w] = true;
          stack.push_back(w);
        }
    }
  }
  int terminal_classes = 0;
  std::vector<bool> seen(S, false);
  for (Index i = 0; i < S; ++i) {
    if (seen[i]) continue;
    // class of i
    std::vector<Index> members;
    for (Index j = 0; j < S; ++j)
      if (reach[i][j] && reach[j][i]) members.push_back(j);
    bool terminal = true;
    for (Index m : members) {
      seen[m] = true;
      for (Index w : out[m])
        if (!(reach[i][w] && reach[w][i])) terminal = false;
    }
    if (terminal) ++terminal_classes;
    if (terminal_classes > 1) return false;
  }
  return terminal_classes == 1;
}

}  // namespace

Vector limiting_probabilities(const Matrix& Pc, const Vector& hold,
                              bool* reducible, const Vector* start_mass) {
  const Index S = Pc.rows();
  if (reducible) *reducible = false;
  // Balance in terms of the jump-chain mass x = nu .* pi: (I - Pc^T) x = 0,
  // with the last row swapped for the normalization sum(x .* hold) = 1.
  if (unique_terminal_class(Pc)) {
    Matrix A = Matrix::Identity(S, S) - Pc.transpose();
    A.row(S - 1) = hold.transpose();
    Vector b = Vector::Zero(S);
    b(S - 1) = 1.0;
    Vector x = A.partialPivLu().solve(b);
    bool ok = x.allFinite();
    if (ok) {
      const double balance =
          ((Matrix::Identity(S, S) - Pc.transpose()) * x).cwiseAbs().maxCoeff();
      ok = balance < 1e-9 && x.minCoeff() > -1e-9;
    }
    if (ok) {
      Vector pi = x.cwiseMax(0.0).cwiseProduct(hold);
      const double total = pi.sum();
      if (!(total > 0.0))
        throw ModelError("limiting distribution has no mass");
      return pi / total;
    }
  }
  // Ambiguous or ill-conditioned: long-run occupancy of drivers that start
  // from start_mass (uniform when unspecified); unreachable states get zero.
  if (reducible) *reducible = true;
  const Vector start = start_mass && start_mass->size() == S
                           ? *start_mass
                           : Vector::Constant(S, 1.0);
  const Vector x = jump_chain_mass_power(Pc, start);
  Vector pi = x.cwiseMax(0.0).cwiseProduct(hold);
  const double total = pi.sum();
  if (!(total > 0.0)) throw ModelError("limiting distribution has no mass");
  return pi / total;
}

Vector empty_vehicle_start(Index M, int Ca) {
  Vector start = Vector::Zero(M * (Ca + 1));
  for (Index z = 0; z < M; ++z) start(z * (Ca + 1)) = 1.0;
  return start;
}

Vector per_state_driver_counts(const Vector& n_idle, const Vector& pi, Index M,
                               int Ca) {
  Vector counts = Vector::Zero(M * (Ca + 1));
  for (Index z = 0; z < M; ++z) {
    const double mass = pi.segment(z * (Ca + 1), Ca + 1).sum();
    if (mass <= 0.0) continue;
    for (int n = 0; n <= Ca; ++n) {
      const Index s = z * (Ca + 1) + n;
      counts(s) = n_idle(z) * pi(s) / mass;
    }
  }
  return counts;
}

Vector flexible_pickup_supply(const Vector& n_idle, const Vector& pi,
                              const SuccessRates& rates) {
  const Index M = n_idle.size();
  const int Ca = static_cast<int>(rates.p_pick_n.cols()) - 1;
  const Vector counts = per_state_driver_counts(n_idle, pi, M, Ca);
  Vector n_ig = Vector::Zero(M);
  for (Index z = 0; z < M; ++z)
    for (int n = 0; n <= Ca; ++n)
      n_ig(z) += counts(z * (Ca + 1) + n) * rates.p_pick_n(z, n);
  return n_ig;
}

CtmcSolution make_ctmc(const Matrix& P_zone, const SuccessRates& rates,
                       const Vector& n_idle, const Vector& w_I,
                       const Vector& tg, const Vector& w_dg,
                       const Vector& tbar_g, Index M, int Ca) {
  CtmcSolution sol;
  sol.M = M;
  sol.Ca = Ca;
  sol.Pc = build_transitions(P_zone, rates);
  sol.hold = holding_times(sol.Pc, w_I, tg, w_dg, tbar_g, M, Ca);
  const Vector start = empty_vehicle_start(M, Ca);
  sol.pi = limiting_probabilities(sol.Pc, sol.hold, &sol.reducible_warning,
                                  &start);
  sol.n_state = per_state_driver_counts(n_idle, sol.pi, M, Ca);
  return sol;
}

double pickup_wait(double n_bar, double lambda_out, double w_I, double L,
                   const DistributionSpec& dist, double tol) {
  if (!(lambda_out > 0.0)) return kInf;
  if (!(n_bar > 0.0)) return 0.0;
  const double tbar = L / std::sqrt(n_bar);
  const double scale = n_bar / lambda_out;
  auto gap = [&](double w) {
    return w - success_pick(tbar, w, w_I, dist).total * scale;
  };
  double lo = 0.0, hi = scale;
  if (gap(lo) >= -tol) return 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g = gap(mid);
    if (std::abs(g) <= tol) return mid;
    (g < 0.0 ? lo : hi) = mid;
    if (hi - lo < 1e-16 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

Vector effective_idle_supply_rhs(const Vector& n_idle, const Vector& tg,
                                 const Vector& inbound_flex, const Vector& pi,
                                 const Vector& p_flex_Ca, Index M, int Ca) {
  Vector rhs(M);
  for (Index z = 0; z < M; ++z) {
    const double mass = pi.segment(z * (Ca + 1), Ca + 1).sum();
    const double cond_full =
        mass > 0.0 ? pi(z * (Ca + 1) + Ca) / mass : 0.0;
    rhs(z) = n_idle(z) - tg(z) * inbound_flex(z) -
             n_idle(z) * cond_full * (1.0 - p_flex_Ca(z));
  }
  return rhs;
}

ExistenceReport existence_condition(const Vector& n_idle, const Vector& tg,
                                    const Vector& w_I, const Matrix& lambda_df,
                                    const Matrix& P_zone, int Ca,
                                    const DistributionSpec& dist) {
  const Index M = n_idle.size();
  const Vector share = flexible_destination_shares(lambda_df);
  // Zero-supply limit: pickup edges vanish, drop-off and movement remain.
  const Vector inf_times = Vector::Constant(M, kInf);
  const SuccessRates limit_rates =
      make_success_rates(tg, w_I, inf_times, inf_times, share, Ca, dist);
  const Matrix Pc = build_transitions(P_zone, limit_rates);
  const Vector hold =
      holding_times(Pc, w_I, tg, inf_times, inf_times, M, Ca);
  const Vector start = empty_vehicle_start(M, Ca);
  const Vector pi = limiting_probabilities(Pc, hold, nullptr, &start);

  ExistenceReport report;
  report.margin.resize(M);
  report.holds.resize(M);
  for (Index z = 0; z < M; ++z) {
    const double mass = pi.segment(z * (Ca + 1), Ca + 1).sum();
    const double cond_full = mass > 0.0 ? pi(z * (Ca + 1) + Ca) / mass : 0.0;
    const double flex_full = p_flex(share(z), Ca);
    const double inbound = lambda_df.col(z).sum();
    report.margin(z) =
        n_idle(z) * (1.0 - cond_full * (1.0 - flex_full)) - tg(z) * inbound;
    report.holds[z] = report.margin(z) >= 0.0;
    report.all_hold = report.all_hold && report.holds[z];
  }
  return report;
}

namespace {

struct FlexIterate {
  Vector tbar_g;
  Vector w_dg;
  Vector rhs;
  Vector pi;
};

FlexIterate flex_rhs(const Vector& n_bar, const Vector& n_idle,
                     const Vector& tg, const Vector& w_I,
                     const Matrix& lambda_df, const Matrix& P_zone,
                     const Vector& L, int Ca, const DistributionSpec& dist,
                     double bisect_tol) {
  const Index M = n_idle.size();
  const Vector share = flexible_destination_shares(lambda_df);
  FlexIterate it;
  it.tbar_g.resize(M);
  it.w_dg.resize(M);
  Vector p_flex_Ca(M), inbound(M);
  for (Index z = 0; z < M; ++z) {
    const double outflow = lambda_df.row(z).sum();
    it.tbar_g(z) = n_bar(z) > 0.0 ? L(z) / std::sqrt(n_bar(z)) : kInf;
    it.w_dg(z) = pickup_wait(n_bar(z), outflow, w_I(z), L(z), dist, bisect_tol);
    p_flex_Ca(z) = p_flex(share(z), Ca);
    inbound(z) = lambda_df.col(z).sum();
  }
  const SuccessRates rates =
      make_success_rates(tg, w_I, it.w_dg, it.tbar_g, share, Ca, dist);
  const Matrix Pc = build_transitions(P_zone, rates);
  const Vector hold = holding_times(Pc, w_I, tg, it.w_dg, it.tbar_g, M, Ca);
  const Vector start = empty_vehicle_start(M, Ca);
  it.pi = limiting_probabilities(Pc, hold, nullptr, &start);
  it.rhs = effective_idle_supply_rhs(n_idle, tg, inbound, it.pi, p_flex_Ca, M,
                                     Ca)
               .cwiseMax(0.0)
               .cwiseMin(n_idle);
  return it;
}

}  // namespace

FlexSupplySolution solve_flexible_supply(const Vector& n_idle,
                                         const Vector& tg, const Vector& w_I,
                                         const Matrix& lambda_df,
                                         const Matrix& P_zone, const Vector& L,
                                         int Ca, const DistributionSpec& dist,
                                         double tol, int max_iterations) {
  const Index M = n_idle.size();
  FlexSupplySolution sol;
  if (lambda_df.sum() <= 0.0) {
    sol.n_bar = n_idle;
    sol.w_dg = Vector::Constant(M, kInf);
    sol.tbar_g = n_idle.cwiseSqrt().cwiseInverse().cwiseProduct(L);
    sol.residual = Vector::Zero(M);
    sol.converged = true;
    return sol;
  }
  const ExistenceReport existence =
      existence_condition(n_idle, tg, w_I, lambda_df, P_zone, Ca, dist);
  for (Index z = 0; z < M; ++z)
    if (!existence.holds[z]) throw InfeasibleRegionError(z, existence.margin(z));

  Vector inbound = lambda_df.colwise().sum().transpose();
  Vector n_bar =
      (n_idle - tg.cwiseProduct(inbound)).cwiseMax(0.0).cwiseMin(n_idle);
  FlexIterate it;
  for (int k = 0; k < max_iterations; ++k) {
    it = flex_rhs(n_bar, n_idle, tg, w_I, lambda_df, P_zone, L, Ca, dist,
                  0.1 * tol);
    sol.residual = n_bar - it.rhs;
    ++sol.iterations;
    if (sol.residual.cwiseAbs().maxCoeff() <= tol) {
      sol.converged = true;
      break;
    }
    n_bar = 0.5 * n_bar + 0.5 * it.rhs;
  }
  if (!sol.converged) {
    // Per-zone bisection on the scalar residual, a few sweeps.
    for (int sweep = 0; sweep < 8 && !sol.converged; ++sweep) {
      for (Index z = 0; z < M; ++z) {
        double lo = 0.0, hi = n_idle(z);
        for (int step = 0; step < 80; ++step) {
          const double mid = 0.5 * (lo + hi);
          Vector trial = n_bar;
          trial(z) = mid;
          const FlexIterate t = flex_rhs(trial, n_idle, tg, w_I, lambda_df,
                                         P_zone, L, Ca, dist, 0.1 * tol);
          const double r = mid - t.rhs(z);
          if (std::abs(r) <= tol) break;
          (r < 0.0 ? lo : hi) = mid;
        }
        n_bar(z) = 0.5 * (lo + hi);
      }
      it = flex_rhs(n_bar, n_idle, tg, w_I, lambda_df, P_zone, L, Ca, dist,
                    0.1 * tol);
      sol.residual = n_bar - it.rhs;
      sol.converged = sol.residual.cwiseAbs().maxCoeff() <= tol;
    }
  }
  sol.n_bar = n_bar;
  sol.w_dg = it.w_dg;
  sol.tbar_g = it.tbar_g;
  return sol;
}

}  // namespace comodal
