#include "comodal/optimizer.hpp"

#include "comodal/errors.hpp"
#include "comodal/market.hpp"
#include "comodal/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <chrono>
#include <cmath>
#include <deque>
#include <optional>
#include <random>
#include <thread>
#include <utility>

namespace comodal {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Box {
  Vector lo, hi;
  Vector clamp(const Vector& x) const { return x.cwiseMax(lo).cwiseMin(hi); }
};

// Central differences with probes clamped into the box; falls back to the
// feasible side when the other one leaves the model domain.
Vector boxed_gradient(const std::function<double(const Vector&)>& f,
                      const Vector& x, double fx, const Box& box,
                      double rel_step, long& evals) {
  const Index n = x.size();
  Vector g = Vector::Zero(n);
  Vector probe = x;
  for (Index i = 0; i < n; ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x(i)));
    const double up = std::min(x(i) + h, box.hi(i));
    const double dn = std::max(x(i) - h, box.lo(i));
    if (up <= dn) continue;
    probe(i) = up;
    double fu = f(probe);
    ++evals;
    probe(i) = dn;
    double fd = f(probe);
    ++evals;
    probe(i) = x(i);
    if (std::isfinite(fu) && std::isfinite(fd)) {
      g(i) = (fu - fd) / (up - dn);
    } else if (std::isfinite(fu)) {
      g(i) = (fu - fx) / (up - x(i));
    } else if (std::isfinite(fd)) {
      g(i) = (fx - fd) / (x(i) - dn);
    }
  }
  return g;
}

struct MinimizeResult {
  Vector x;
  double f = kInf;
  int iterations = 0;
  long evaluations = 0;
};

// Projected L-BFGS with Armijo backtracking on the projection arc, operating
// on box-normalized coordinates so all variables move on comparable scales.
MinimizeResult lbfgs_box(const std::function<double(const Vector&)>& raw_f,
                         const Box& raw_box, const Vector& raw_x0,
                         int max_iter, double grad_tol, double rel_step) {
  const Index n = raw_x0.size();
  const Vector width = (raw_box.hi - raw_box.lo).cwiseMax(1e-12);
  auto to_raw = [&](const Vector& y) -> Vector {
    return raw_box.lo + y.cwiseProduct(width);
  };
  Box box;
  box.lo = Vector::Zero(n);
  box.hi = Vector::Ones(n);
  auto f = [&](const Vector& y) { return raw_f(to_raw(y)); };

  MinimizeResult res;
  Vector x = box.clamp((raw_box.clamp(raw_x0) - raw_box.lo).cwiseQuotient(width));
  double fx = f(x);
  ++res.evaluations;
  res.x = to_raw(x);
  res.f = fx;
  if (!std::isfinite(fx)) return res;

  constexpr int kMemory = 12;
  std::deque<Vector> s_list, y_list;
  std::deque<double> rho_list;

  Vector g = boxed_gradient(f, x, fx, box, rel_step, res.evaluations);
  for (int iter = 0; iter < max_iter; ++iter) {
    ++res.iterations;
    const Vector pg = x - box.clamp(x - g);
    if (pg.cwiseAbs().maxCoeff() <= grad_tol) break;

    // two-loop recursion
    Vector d = -g;
    if (!s_list.empty()) {
      Vector q = g;
      std::vector<double> alpha(s_list.size());
      for (int i = static_cast<int>(s_list.size()) - 1; i >= 0; --i) {
        alpha[i] = rho_list[i] * s_list[i].dot(q);
        q -= alpha[i] * y_list[i];
      }
      const double gamma =
          s_list.back().dot(y_list.back()) / y_list.back().squaredNorm();
      q *= gamma;
      for (std::size_t i = 0; i < s_list.size(); ++i) {
        const double beta = rho_list[i] * y_list[i].dot(q);
        q += (alpha[i] - beta) * s_list[i];
      }
      d = -q;
    }
    // do not push against active bounds
    for (Index i = 0; i < x.size(); ++i) {
      if ((x(i) <= box.lo(i) && d(i) < 0.0) ||
          (x(i) >= box.hi(i) && d(i) > 0.0))
        d(i) = 0.0;
    }
    if (d.cwiseAbs().maxCoeff() == 0.0) d = -pg;

    bool accepted = false;
    Vector xn;
    double fn = kInf;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        d = -pg;
        s_list.clear();
        y_list.clear();
        rho_list.clear();
      }
      double step = 1.0;
      for (int ls = 0; ls < 40; ++ls) {
        xn = box.clamp(x + step * d);
        if ((xn - x).cwiseAbs().maxCoeff() == 0.0) break;
        fn = f(xn);
        ++res.evaluations;
        const double slope = g.dot(xn - x);
        if (std::isfinite(fn) && fn <= fx + 1e-4 * slope && fn < fx) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
    }
    if (!accepted) break;

    Vector gn = boxed_gradient(f, xn, fn, box, rel_step, res.evaluations);
    const Vector s = xn - x;
    const Vector y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_list.push_back(s);
      y_list.push_back(y);
      rho_list.push_back(1.0 / sy);
      if (static_cast<int>(s_list.size()) > kMemory) {
        s_list.pop_front();
        y_list.pop_front();
        rho_list.pop_front();
      }
    }
    x = xn;
    fx = fn;
    g = std::move(gn);
    if (fx < res.f) {
      res.f = fx;
      res.x = to_raw(x);
    }
  }
  return res;
}

// Deterministic parallel map over start indices; results land by index.
void run_starts(int count, int threads,
                const std::function<void(int)>& work) {
  if (threads <= 0)
    threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1))
        work(i);
    });
  }
  for (auto& th : pool) th.join();
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

}  // namespace

Vector SolverConfig::n_lower(const Network& net,
                             const MarketParams& params) const {
  return (net.L / params.w_max).array().square();
}

Vector fd_gradient(const std::function<double(const Vector&)>& f,
                   const Vector& x, double rel_step, FdMode mode) {
  const Index n = x.size();
  Vector g(n);
  Vector probe = x;
  const double f0 = mode == FdMode::Forward ? f(x) : 0.0;
  for (Index i = 0; i < n; ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x(i)));
    if (mode == FdMode::Central) {
      probe(i) = x(i) + h;
      const double fu = f(probe);
      probe(i) = x(i) - h;
      const double fd = f(probe);
      g(i) = (fu - fd) / (2.0 * h);
    } else {
      probe(i) = x(i) + h;
      g(i) = (f(probe) - f0) / h;
    }
    probe(i) = x(i);
  }
  return g;
}

InitialGuess draw_initial_guess(const Network& net, const MarketParams& params,
                                const SolverConfig& cfg, std::uint64_t seed) {
  const Index M = net.M;
  std::mt19937_64 rng(seed);
  const Vector n_lo = cfg.n_lower(net, params);
  InitialGuess g;
  g.r_r.resize(M);
  g.n_idle.resize(M);
  g.n_bar.resize(M);
  g.w_dg.resize(M);
  g.c_df.resize(M, M);
  g.r_df.resize(M, M);
  g.lambda_r.resize(M, M);
  g.lambda_df.resize(M, M);
  g.lambda_do.resize(M, M);
  for (Index i = 0; i < M; ++i) {
    g.r_r(i) = std::clamp(uniform(rng, 1.0, 2.0), cfg.r_lo, cfg.r_hi);
    g.n_idle(i) =
        std::clamp(uniform(rng, 150.0, 250.0), n_lo(i), cfg.n_hi);
    g.n_bar(i) = std::clamp(uniform(rng, 50.0, 150.0), 0.0, g.n_idle(i));
    g.w_dg(i) = uniform(rng, 5.0, 15.0);
  }
  for (Index i = 0; i < M; ++i) {
    for (Index j = 0; j < M; ++j) {
      g.c_df(i, j) = std::clamp(uniform(rng, 10.0, 20.0), cfg.c_lo, cfg.c_hi);
      g.r_df(i, j) = uniform(rng, 5.0, 15.0);
      g.lambda_r(i, j) =
          params.lambda_r0(i, j) * uniform(rng, 0.15, 0.25);
      g.lambda_df(i, j) = params.lambda_d0(i, j) * uniform(rng, 0.1, 0.2);
      g.lambda_do(i, j) = params.lambda_d0(i, j) * uniform(rng, 0.1, 0.2);
    }
  }
  g.q = uniform(rng, 20.0, 30.0);
  return g;
}

namespace {

// ---- stage-1 packing: (r_r, n_idle, c_df) ----

Vector pack_approx(const ApproxPoint& p) {
  const Index M = p.r_r.size();
  Vector x(2 * M + M * M);
  x.head(M) = p.r_r;
  x.segment(M, M) = p.n_idle;
  for (Index i = 0; i < M; ++i)
    x.segment(2 * M + i * M, M) = p.c_df.row(i).transpose();
  return x;
}

ApproxPoint unpack_approx(const Vector& x, Index M) {
  ApproxPoint p;
  p.r_r = x.head(M);
  p.n_idle = x.segment(M, M);
  p.c_df.resize(M, M);
  for (Index i = 0; i < M; ++i)
    p.c_df.row(i) = x.segment(2 * M + i * M, M).transpose();
  return p;
}

Box approx_box(const Network& net, const MarketParams& params,
               const SolverConfig& cfg) {
  const Index M = net.M;
  Box box;
  box.lo.resize(2 * M + M * M);
  box.hi.resize(2 * M + M * M);
  const Vector n_lo = cfg.n_lower(net, params);
  box.lo.head(M).setConstant(cfg.r_lo);
  box.hi.head(M).setConstant(cfg.r_hi);
  box.lo.segment(M, M) = n_lo;
  box.hi.segment(M, M).setConstant(cfg.n_hi);
  box.lo.tail(M * M).setConstant(cfg.c_lo);
  box.hi.tail(M * M).setConstant(cfg.c_hi);
  // pin dead flexible costs: no parcel potential, no gradient
  for (Index i = 0; i < M; ++i)
    for (Index j = 0; j < M; ++j)
      if (params.lambda_d0(i, j) <= 0.0) {
        box.lo(2 * M + i * M + j) = cfg.c_lo;
        box.hi(2 * M + i * M + j) = cfg.c_lo;
      }
  return box;
}

// ---- stage-2 packing: full elementary variables ----

Vector pack_vars(const ElementaryVars& v) {
  const Index M = v.r_r.size();
  Vector x(4 * M + M * M);
  x.head(M) = v.r_r;
  x.segment(M, M) = v.n_idle;
  for (Index i = 0; i < M; ++i)
    x.segment(2 * M + i * M, M) = v.c_df.row(i).transpose();
  x.segment(2 * M + M * M, M) = v.n_bar;
  // +inf dispatch waits (dead flexible channels) are stored as a large finite
  // value so the box stays meaningful; evaluate() treats them the same way.
  for (Index i = 0; i < M; ++i) {
    const double w = v.w_dg(i);
    x(3 * M + M * M + i) = std::isfinite(w) ? std::min(w, 600.0) : 600.0;
  }
  return x;
}

ElementaryVars unpack_vars(const Vector& x, Index M) {
  ElementaryVars v;
  v.r_r = x.head(M);
  v.n_idle = x.segment(M, M);
  v.c_df.resize(M, M);
  for (Index i = 0; i < M; ++i)
    v.c_df.row(i) = x.segment(2 * M + i * M, M).transpose();
  v.n_bar = x.segment(2 * M + M * M, M);
  v.w_dg = x.segment(3 * M + M * M, M);
  return v;
}

Box vars_box(const Network& net, const MarketParams& params,
             const SolverConfig& cfg) {
  const Index M = net.M;
  const Box ab = approx_box(net, params, cfg);
  Box box;
  box.lo.resize(4 * M + M * M);
  box.hi.resize(4 * M + M * M);
  box.lo.head(2 * M + M * M) = ab.lo;
  box.hi.head(2 * M + M * M) = ab.hi;
  box.lo.segment(2 * M + M * M, M).setConstant(1e-9);
  box.hi.segment(2 * M + M * M, M).setConstant(cfg.n_hi);
  box.lo.segment(3 * M + M * M, M).setConstant(1e-9);
  box.hi.segment(3 * M + M * M, M).setConstant(600.0);
  for (Index i = 0; i < M; ++i)
    if (params.lambda_d0.row(i).sum() <= 0.0) {
      // dead dispatch wait, fixed at the sentinel surrogate
      box.lo(3 * M + M * M + i) = 600.0;
      box.hi(3 * M + M * M + i) = 600.0;
    }
  return box;
}

Vector residual_vector(const EquilibriumState& st) {
  const Index M = st.residuals.fixed_point.size();
  Vector h(2 * M);
  h.head(M) = st.residuals.fixed_point;
  h.tail(M) = st.residuals.little;
  return h;
}

struct Candidate {
  ElementaryVars vars;
  double profit = -kInf;
  double residual = kInf;
  bool valid = false;
};

void consider(Candidate& best_feasible, Candidate& best_any,
              const ElementaryVars& vars, double prof, double resid,
              double ctol) {
  if (!best_any.valid || prof > best_any.profit) {
    best_any = {vars, prof, resid, true};
  }
  if (resid <= ctol && (!best_feasible.valid || prof > best_feasible.profit)) {
    best_feasible = {vars, prof, resid, true};
  }
}

// Re-solve the nested relations exactly at the (r, c, N) block of a point.
std::optional<std::pair<ElementaryVars, EquilibriumState>> restore_feasible(
    const Network& net, const MarketParams& params, const SolverConfig& cfg,
    ElementaryVars vars) {
  try {
    const DemandBlock db =
        demand_block(vars.r_r, vars.c_df, vars.n_idle, net, params);
    const Matrix P = zone_transition_matrix(db.lambda_r, db.lambda_do);
    const FlexSupplySolution fs = solve_flexible_supply(
        vars.n_idle, net.tg, db.w_I, db.lambda_df, P, net.L, params.Ca,
        params.dist, 0.01 * cfg.constraint_tol);
    if (!fs.converged) return std::nullopt;
    vars.n_bar = fs.n_bar;
    vars.w_dg = fs.w_dg;
    EquilibriumState st = evaluate(vars, net, params);
    return std::make_pair(std::move(vars), std::move(st));
  } catch (const ModelError&) {
    return std::nullopt;
  }
}

}  // namespace

ApproxResult solve_approx(const Network& net, const MarketParams& params,
                          const SolverConfig& cfg, const ApproxPoint& start) {
  const Index M = net.M;
  const Box box = approx_box(net, params, cfg);
  long bisections = 0;
  auto objective = [&](const Vector& x) -> double {
    try {
      const ApproxPoint p = unpack_approx(x, M);
      const ElementaryVars vars = expand_approx(net, params, cfg, p);
      return -evaluate(vars, net, params).profit;
    } catch (const ModelError&) {
      return kInf;
    }
  };
  (void)bisections;
  const MinimizeResult min = lbfgs_box(objective, box, pack_approx(start),
                                       cfg.max_inner, cfg.grad_tol,
                                       cfg.inner_fd_step);
  if (!std::isfinite(min.f))
    throw ModelError("no feasible start for the unconstrained stage");
  ApproxResult res;
  res.point = unpack_approx(min.x, M);
  res.profit = -min.f;
  res.iterations = min.iterations;
  res.evaluations = min.evaluations;
  return res;
}

ElementaryVars expand_approx(const Network& net, const MarketParams& params,
                             const SolverConfig& cfg,
                             const ApproxPoint& point) {
  const Index M = net.M;
  const DemandBlock db =
      demand_block(point.r_r, point.c_df, point.n_idle, net, params);
  ElementaryVars vars;
  vars.r_r = point.r_r;
  vars.c_df = point.c_df;
  vars.n_idle = point.n_idle;
  vars.n_bar.resize(M);
  vars.w_dg.resize(M);
  const Vector inbound = db.lambda_df.colwise().sum().transpose();
  for (Index i = 0; i < M; ++i) {
    // truncated effective supply, clamped away from zero
    vars.n_bar(i) = std::clamp(point.n_idle(i) - net.tg(i) * inbound(i), 1e-6,
                               point.n_idle(i));
    const double outflow = db.lambda_df.row(i).sum();
    vars.w_dg(i) = pickup_wait(vars.n_bar(i), outflow, db.w_I(i), net.L(i),
                               params.dist, cfg.bisect_tol);
  }
  return vars;
}

OptReport refine_constrained(const Network& net, const MarketParams& params,
                             const SolverConfig& cfg,
                             const ElementaryVars& warm) {
  const auto t0 = Clock::now();
  const Index M = net.M;
  const Box box = vars_box(net, params, cfg);
  long evals = 0;

  Vector lambda = Vector::Zero(2 * M);
  double mu = cfg.mu0;

  Candidate best_feasible, best_any;
  auto record = [&](const ElementaryVars& vars, bool with_restore) {
    try {
      const EquilibriumState st = evaluate(vars, net, params);
      ++evals;
      const double resid = residual_vector(st).cwiseAbs().maxCoeff();
      consider(best_feasible, best_any, vars, st.profit, resid,
               cfg.constraint_tol);
    } catch (const ModelError&) {
    }
    if (with_restore) {
      if (auto restored = restore_feasible(net, params, cfg, vars)) {
        ++evals;
        const double resid =
            residual_vector(restored->second).cwiseAbs().maxCoeff();
        consider(best_feasible, best_any, restored->first,
                 restored->second.profit, resid, cfg.constraint_tol);
      }
    }
  };
  record(warm, true);

  Vector x = pack_vars(warm);
  OptReport report;
  // normalize the objective so the pinned penalty schedule bites immediately
  double profit_scale = 1.0;
  try {
    profit_scale =
        std::max(1.0, std::abs(evaluate(warm, net, params).profit));
  } catch (const ModelError&) {
  }
  double prev_hnorm = kInf;
  double prev_round_profit = -kInf;
  bool diverged = false;
  int outer = 0;
  for (; outer < cfg.max_outer; ++outer) {
    auto al_objective = [&](const Vector& z) -> double {
      try {
        const EquilibriumState st = evaluate(unpack_vars(z, M), net, params);
        const Vector h = residual_vector(st);
        return -st.profit / profit_scale + lambda.dot(h) +
               0.5 * mu * h.squaredNorm();
      } catch (const ModelError&) {
        return kInf;
      }
    };
    const MinimizeResult min = lbfgs_box(al_objective, box, x,
                                         cfg.refine_max_inner, cfg.grad_tol,
                                         cfg.inner_fd_step);
    evals += min.evaluations;
    if (!std::isfinite(min.f)) {
      diverged = true;
      break;
    }
    x = min.x;
    const ElementaryVars vars = unpack_vars(x, M);
    Vector h;
    try {
      const EquilibriumState st = evaluate(vars, net, params);
      ++evals;
      h = residual_vector(st);
      consider(best_feasible, best_any, vars, st.profit,
               h.cwiseAbs().maxCoeff(), cfg.constraint_tol);
    } catch (const ModelError&) {
      diverged = true;
      break;
    }
    record(vars, true);
    const double hnorm = h.cwiseAbs().maxCoeff();
    const double round_profit =
        best_feasible.valid ? best_feasible.profit : best_any.profit;
    // keep iterating while infeasible or still gaining profit
    if (hnorm <= cfg.constraint_tol &&
        round_profit <=
            prev_round_profit + 1e-5 * std::max(1.0, std::abs(round_profit)))
      break;
    prev_round_profit = std::max(prev_round_profit, round_profit);
    lambda += mu * h;
    if (hnorm > 0.25 * prev_hnorm) mu *= cfg.mu_growth;
    prev_hnorm = std::min(prev_hnorm, hnorm);
    if (mu > 1e12) {
      diverged = true;
      break;
    }
  }

  const Candidate& chosen = best_feasible.valid ? best_feasible : best_any;
  report.best_vars = chosen.vars;
  report.best_profit = chosen.profit;
  report.constraint_residual = chosen.residual;
  report.diverged = diverged || !best_feasible.valid;
  report.evaluations = evals;
  report.wall_seconds = seconds_since(t0);
  StartReport sr;
  sr.refined_profit = chosen.profit;
  sr.refine_outer = outer;
  sr.evaluations = evals;
  sr.wall_seconds = report.wall_seconds;
  sr.constraint_residual = chosen.residual;
  sr.diverged = report.diverged;
  report.starts.push_back(sr);
  return report;
}

OptReport algorithm1(const Network& net, const MarketParams& params,
                     const SolverConfig& cfg) {
  const auto t0 = Clock::now();
  const int n = std::max(1, cfg.multistarts);
  std::vector<OptReport> reports(n);
  std::vector<StartReport> starts(n);
  run_starts(n, cfg.threads, [&](int k) {
    const auto ts = Clock::now();
    StartReport sr;
    sr.start = k;
    try {
      const InitialGuess guess = draw_initial_guess(
          net, params, cfg,
          stream_seed(cfg.seed, 0xA100 + static_cast<std::uint64_t>(k)));
      ApproxPoint start{guess.r_r, guess.c_df, guess.n_idle};
      const ApproxResult approx = solve_approx(net, params, cfg, start);
      sr.approx_profit = approx.profit;
      sr.approx_iterations = approx.iterations;
      const ElementaryVars warm = expand_approx(net, params, cfg, approx.point);
      OptReport rep = refine_constrained(net, params, cfg, warm);
      rep.approx_profit = approx.profit;
      rep.evaluations += approx.evaluations;
      sr.refined_profit = rep.best_profit;
      sr.refine_outer = rep.starts.front().refine_outer;
      sr.evaluations = rep.evaluations;
      sr.constraint_residual = rep.constraint_residual;
      sr.diverged = rep.diverged;
      reports[k] = std::move(rep);
    } catch (const ModelError&) {
      sr.diverged = true;
    }
    sr.wall_seconds = seconds_since(ts);
    starts[k] = sr;
  });

  OptReport merged;
  merged.starts = starts;
  for (int k = 0; k < n; ++k) {
    const OptReport& r = reports[k];
    if (r.best_vars.r_r.size() == 0) continue;
    merged.evaluations += r.evaluations;
    const bool feasible = r.constraint_residual <= cfg.constraint_tol;
    const bool merged_feasible =
        merged.constraint_residual <= cfg.constraint_tol;
    const bool better =
        merged.best_vars.r_r.size() == 0 ||
        (feasible && !merged_feasible) ||
        (feasible == merged_feasible && r.best_profit > merged.best_profit);
    if (better) {
      merged.best_vars = r.best_vars;
      merged.best_profit = r.best_profit;
      merged.approx_profit = r.approx_profit;
      merged.constraint_residual = r.constraint_residual;
      merged.diverged = r.diverged;
    }
  }
  merged.wall_seconds = seconds_since(t0);
  return merged;
}

namespace {

// ---- direct baseline: the full endogenous variable set ----
// layout: r_r (M), q (1), n_idle (M), n_bar (M), w_dg (M),
//         r_df (M^2), lambda_r (M^2), lambda_df (M^2), lambda_do (M^2)

struct DirectPoint {
  Vector r_r;
  double q = 0.0;
  Vector n_idle, n_bar, w_dg;
  Matrix r_df, lambda_r, lambda_df, lambda_do;
};

Index direct_dim(Index M) { return 4 * M + 1 + 4 * M * M; }

Vector pack_direct(const DirectPoint& p) {
  const Index M = p.r_r.size();
  Vector x(direct_dim(M));
  Index off = 0;
  x.segment(off, M) = p.r_r;
  off += M;
  x(off++) = p.q;
  x.segment(off, M) = p.n_idle;
  off += M;
  x.segment(off, M) = p.n_bar;
  off += M;
  for (Index i = 0; i < M; ++i)
    x(off + i) = std::isfinite(p.w_dg(i)) ? std::min(p.w_dg(i), 600.0) : 600.0;
  off += M;
  for (const Matrix* m : {&p.r_df, &p.lambda_r, &p.lambda_df, &p.lambda_do}) {
    for (Index i = 0; i < M; ++i)
      x.segment(off + i * M, M) = m->row(i).transpose();
    off += M * M;
  }
  return x;
}

DirectPoint unpack_direct(const Vector& x, Index M) {
  DirectPoint p;
  Index off = 0;
  p.r_r = x.segment(off, M);
  off += M;
  p.q = x(off++);
  p.n_idle = x.segment(off, M);
  off += M;
  p.n_bar = x.segment(off, M);
  off += M;
  p.w_dg = x.segment(off, M);
  off += M;
  for (Matrix* m : {&p.r_df, &p.lambda_r, &p.lambda_df, &p.lambda_do}) {
    m->resize(M, M);
    for (Index i = 0; i < M; ++i)
      m->row(i) = x.segment(off + i * M, M).transpose();
    off += M * M;
  }
  return p;
}

Box direct_box(const Network& net, const MarketParams& params,
               const SolverConfig& cfg) {
  const Index M = net.M;
  Box box;
  box.lo.resize(direct_dim(M));
  box.hi.resize(direct_dim(M));
  const Vector n_lo = cfg.n_lower(net, params);
  Index off = 0;
  box.lo.segment(off, M).setConstant(cfg.r_lo);
  box.hi.segment(off, M).setConstant(cfg.r_hi);
  off += M;
  box.lo(off) = params.q0 - 60.0;
  box.hi(off) = params.q0 + 60.0;
  ++off;
  box.lo.segment(off, M) = n_lo;
  box.hi.segment(off, M).setConstant(cfg.n_hi);
  off += M;
  box.lo.segment(off, M).setConstant(1e-9);
  box.hi.segment(off, M).setConstant(cfg.n_hi);
  off += M;
  box.lo.segment(off, M).setConstant(1e-9);
  box.hi.segment(off, M).setConstant(600.0);
  for (Index i = 0; i < M; ++i)
    if (params.lambda_d0.row(i).sum() <= 0.0) {
      box.lo(off + i) = 600.0;
      box.hi(off + i) = 600.0;
    }
  off += M;
  box.lo.segment(off, M * M).setConstant(0.0);
  box.hi.segment(off, M * M).setConstant(cfg.c_hi);
  for (Index i = 0; i < M; ++i)
    for (Index j = 0; j < M; ++j)
      if (params.lambda_d0(i, j) <= 0.0) box.hi(off + i * M + j) = 0.0;
  off += M * M;
  for (const Matrix* pot : {&params.lambda_r0, &params.lambda_d0,
                            &params.lambda_d0}) {
    for (Index i = 0; i < M; ++i) {
      box.lo.segment(off + i * M, M).setConstant(0.0);
      box.hi.segment(off + i * M, M) = pot->row(i).transpose();
    }
    off += M * M;
  }
  return box;
}

// Objective and normalized equality residuals of the original problem.
bool direct_eval(const Vector& x, const Network& net,
                 const MarketParams& params, double& f, Vector& h) {
  const Index M = net.M;
  const int Ca = params.Ca;
  try {
    const DirectPoint p = unpack_direct(x, M);
    Vector w_r(M), w_I(M);
    for (Index i = 0; i < M; ++i) {
      w_r(i) = waiting_time_ondemand(net.L(i), p.n_idle(i));
      const double outflow = p.lambda_r.row(i).sum() + p.lambda_do.row(i).sum();
      if (!(outflow > 0.0)) return false;
      w_I(i) = p.n_idle(i) / outflow;
    }
    const ZoneChain chain =
        make_zone_chain(p.lambda_r, p.lambda_do, w_I, net.t);
    const Vector share = flexible_destination_shares(p.lambda_df);
    Vector tbar(M), w_dg_eff = p.w_dg;
    for (Index i = 0; i < M; ++i) {
      tbar(i) = p.n_bar(i) > 0.0 ? net.L(i) / std::sqrt(p.n_bar(i)) : kInf;
      if (!(p.lambda_df.row(i).sum() > 0.0)) w_dg_eff(i) = kInf;
    }
    const SuccessRates rates = make_success_rates(
        net.tg, w_I, w_dg_eff, tbar, share, Ca, params.dist);
    const Matrix t_df = flexible_delivery_time(chain.ET, rates.p_drop_succ);
    const CtmcSolution ctmc = make_ctmc(chain.P, rates, p.n_idle, w_I, net.tg,
                                        w_dg_eff, tbar, M, Ca);
    const Vector n_ig = flexible_pickup_supply(p.n_idle, ctmc.pi, rates);

    h.resize(3 * M * M + 1 + 2 * M);
    Index off = 0;
    for (Index i = 0; i < M; ++i) {
      const double w_df =
          n_ig(i) > 0.0 ? net.L(i) / std::sqrt(n_ig(i)) : kInf;
      for (Index j = 0; j < M; ++j) {
        const double c_r =
            ride_cost(w_r(i), p.r_r(i), net.t(i, j), params.alpha_r);
        const double target_r = ride_demand(params.lambda_r0(i, j), c_r,
                                            params.c_r0(i, j), params.eps);
        const double c_do = params.alpha_d * w_r(i) + params.pd(net.t(i, j)) +
                            p.r_r(i) * net.t(i, j);
        const double c_df =
            std::isfinite(w_df)
                ? params.alpha_d * w_df + params.pd(t_df(i, j)) + p.r_df(i, j)
                : kInf;
        const auto [flex, ondemand] = delivery_split(
            params.lambda_d0(i, j), c_df, c_do, params.c_d0(i, j), params.eta);
        const double scale_r = 1.0 + params.lambda_r0(i, j);
        const double scale_d = 1.0 + params.lambda_d0(i, j);
        h(off) = (p.lambda_r(i, j) - target_r) / scale_r;
        h(off + M * M) = (p.lambda_df(i, j) - flex) / scale_d;
        h(off + 2 * M * M) = (p.lambda_do(i, j) - ondemand) / scale_d;
        ++off;
      }
    }
    off = 3 * M * M;
    double required = 0.0;
    for (Index i = 0; i < M; ++i)
      for (Index j = 0; j < M; ++j)
        required += (p.lambda_r(i, j) + p.lambda_do(i, j)) *
                    (net.t(i, j) + w_r(i) + w_I(i));
    const double supply = driver_supply(p.q, params.q0, params.sigma,
                                        params.N0);
    h(off++) = (supply - required) / params.N0;

    const Vector inbound = p.lambda_df.colwise().sum().transpose();
    Vector p_flex_full(M);
    for (Index i = 0; i < M; ++i) p_flex_full(i) = p_flex(share(i), Ca);
    const Vector rhs = effective_idle_supply_rhs(p.n_idle, net.tg, inbound,
                                                 ctmc.pi, p_flex_full, M, Ca);
    for (Index i = 0; i < M; ++i) h(off++) = p.n_bar(i) - rhs(i);
    for (Index i = 0; i < M; ++i) {
      const double outflow = p.lambda_df.row(i).sum();
      h(off++) = outflow > 0.0
                     ? p.w_dg(i) - rates.p_pick_succ(i) * p.n_bar(i) / outflow
                     : 0.0;
    }

    f = -profit_from_parts(p.r_r, p.r_df, p.lambda_r, p.lambda_do, p.lambda_df,
                           p.q, supply, net);
    return f == f;
  } catch (const ModelError&) {
    return false;
  }
}

}  // namespace

OptReport direct_solve(const Network& net, const MarketParams& params,
                       const SolverConfig& cfg, const InitialGuess& start) {
  const auto t0 = Clock::now();
  const Index M = net.M;
  const Box box = direct_box(net, params, cfg);
  DirectPoint p0;
  p0.r_r = start.r_r;
  p0.q = start.q;
  p0.n_idle = start.n_idle;
  p0.n_bar = start.n_bar;
  p0.w_dg = start.w_dg;
  p0.r_df = start.r_df;
  p0.lambda_r = start.lambda_r;
  p0.lambda_df = start.lambda_df;
  p0.lambda_do = start.lambda_do;

  Vector x = box.clamp(pack_direct(p0));
  const Index n_con = 3 * M * M + 1 + 2 * M;
  Vector lambda = Vector::Zero(n_con);
  double mu = cfg.mu0;
  long evals = 0;

  Vector best_x = x;
  double best_profit = -kInf;
  double best_resid = kInf;
  bool any_point = false;
  auto record = [&](const Vector& z) {
    double f;
    Vector h;
    if (!direct_eval(z, net, params, f, h)) return;
    ++evals;
    const double hnorm = h.cwiseAbs().maxCoeff();
    const bool feas = hnorm <= cfg.constraint_tol;
    const bool best_feas = best_resid <= cfg.constraint_tol;
    const bool better = !any_point || (feas && !best_feas) ||
                        (feas == best_feas &&
                         (feas ? -f > best_profit : hnorm < best_resid));
    if (better) {
      best_x = z;
      best_profit = -f;
      best_resid = hnorm;
      any_point = true;
    }
  };
  record(x);
  double profit_scale = 1.0;
  {
    double f0;
    Vector h0;
    if (direct_eval(x, net, params, f0, h0))
      profit_scale = std::max(1.0, std::abs(f0));
  }
  double prev_hnorm = kInf;
  bool diverged = false;
  int outer = 0;
  for (; outer < cfg.max_outer; ++outer) {
    auto al_objective = [&](const Vector& z) -> double {
      double f;
      Vector h;
      if (!direct_eval(z, net, params, f, h)) return kInf;
      return f / profit_scale + lambda.dot(h) + 0.5 * mu * h.squaredNorm();
    };
    const MinimizeResult min = lbfgs_box(al_objective, box, x,
                                         cfg.direct_max_inner, cfg.grad_tol,
                                         cfg.inner_fd_step);
    evals += min.evaluations;
    if (!std::isfinite(min.f)) {
      diverged = true;
      break;
    }
    x = min.x;
    double f;
    Vector h;
    if (!direct_eval(x, net, params, f, h)) {
      diverged = true;
      break;
    }
    ++evals;
    record(x);
    const double hnorm = h.cwiseAbs().maxCoeff();
    if (std::getenv("COMODAL_DEBUG"))
      std::fprintf(stderr,
                   "direct outer %d: f %.6f hnorm %.3e mu %.1e inner %d\n",
                   outer, -f, hnorm, mu, min.iterations);
    if (hnorm <= 0.01 * cfg.constraint_tol && outer >= 1) break;
    lambda += mu * h;
    if (hnorm > 0.25 * prev_hnorm) mu *= cfg.mu_growth;
    prev_hnorm = std::min(prev_hnorm, hnorm);
    if (mu > 1e12) {
      diverged = true;
      break;
    }
  }

  OptReport report;
  const DirectPoint best = unpack_direct(best_x, M);
  report.best_vars.r_r = best.r_r;
  report.best_vars.n_idle = best.n_idle;
  report.best_vars.n_bar = best.n_bar;
  report.best_vars.w_dg = best.w_dg;
  report.best_vars.c_df = Matrix::Zero(M, M);  // not a variable here
  report.best_profit = best_profit;
  report.constraint_residual = best_resid;
  report.diverged = diverged || best_resid > cfg.constraint_tol;
  report.evaluations = evals;
  report.wall_seconds = seconds_since(t0);
  StartReport sr;
  sr.refined_profit = best_profit;
  sr.refine_outer = outer;
  sr.evaluations = evals;
  sr.wall_seconds = report.wall_seconds;
  sr.constraint_residual = best_resid;
  sr.diverged = report.diverged;
  report.starts.push_back(sr);
  return report;
}

OptReport direct_solve_multistart(const Network& net,
                                  const MarketParams& params,
                                  const SolverConfig& cfg) {
  const auto t0 = Clock::now();
  const int n = std::max(1, cfg.multistarts);
  std::vector<OptReport> reports(n);
  std::vector<StartReport> starts(n);
  run_starts(n, cfg.threads, [&](int k) {
    const auto ts = Clock::now();
    const InitialGuess guess = draw_initial_guess(
        net, params, cfg,
        stream_seed(cfg.seed, 0xA100 + static_cast<std::uint64_t>(k)));
    OptReport rep = direct_solve(net, params, cfg, guess);
    StartReport sr = rep.starts.front();
    sr.start = k;
    sr.wall_seconds = seconds_since(ts);
    starts[k] = sr;
    reports[k] = std::move(rep);
  });
  OptReport merged;
  merged.starts = starts;
  for (int k = 0; k < n; ++k) {
    const OptReport& r = reports[k];
    merged.evaluations += r.evaluations;
    const bool feasible = r.constraint_residual <= cfg.constraint_tol;
    const bool merged_feasible =
        merged.constraint_residual <= cfg.constraint_tol;
    const bool better =
        merged.best_vars.r_r.size() == 0 ||
        (feasible && !merged_feasible) ||
        (feasible == merged_feasible && r.best_profit > merged.best_profit);
    if (better) {
      merged.best_vars = r.best_vars;
      merged.best_profit = r.best_profit;
      merged.constraint_residual = r.constraint_residual;
      merged.diverged = r.diverged;
    }
  }
  merged.wall_seconds = seconds_since(t0);
  return merged;
}

}  // namespace comodal

