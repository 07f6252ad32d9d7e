#include "comodal/scenario.hpp"

#include "comodal/errors.hpp"
#include "comodal/market.hpp"
#include "comodal/sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace comodal {

using nlohmann::json;

namespace {

Matrix matrix_from_json(const json& j, Index M) {
  if (!j.is_array() || static_cast<Index>(j.size()) != M)
    throw ModelError("matrix must have M rows");
  Matrix m(M, M);
  for (Index i = 0; i < M; ++i) {
    const auto& row = j[i];
    if (static_cast<Index>(row.size()) != M)
      throw ModelError("matrix row length must equal M");
    for (Index k = 0; k < M; ++k) m(i, k) = row[k].get<double>();
  }
  return m;
}

Vector vector_from_json(const json& j, Index M) {
  if (!j.is_array() || static_cast<Index>(j.size()) != M)
    throw ModelError("vector length must equal M");
  Vector v(M);
  for (Index i = 0; i < M; ++i) v(i) = j[i].get<double>();
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json row = json::array();
  for (Index i = 0; i < v.size(); ++i) row.push_back(v(i));
  return row;
}

}  // namespace

ScenarioSpec scenario_from_json_text(const std::string& text) {
  const json j = json::parse(text);
  ScenarioSpec spec;
  spec.name = j.value("name", std::string("scenario"));

  const json& jn = j.at("network");
  spec.net.M = jn.at("M").get<Index>();
  spec.net.t = matrix_from_json(jn.at("travel_time"), spec.net.M);
  spec.net.L = vector_from_json(jn.at("L"), spec.net.M);
  spec.net.tg = vector_from_json(jn.at("tg"), spec.net.M);
  spec.net.validate();

  const json& jm = j.at("market");
  MarketParams& p = spec.params;
  p.lambda_r0 = matrix_from_json(jm.at("lambda_r0"), spec.net.M);
  if (jm.contains("lambda_d0"))
    p.lambda_d0 = matrix_from_json(jm.at("lambda_d0"), spec.net.M);
  else
    p.lambda_d0 = Matrix::Zero(spec.net.M, spec.net.M);
  p.N0 = jm.at("N0").get<double>();
  p.eps = jm.at("eps").get<double>();
  p.eta = jm.at("eta").get<double>();
  p.sigma = jm.at("sigma").get<double>();
  // outside-option costs: explicit matrices or kappa * travel time
  if (jm.contains("c_r0"))
    p.c_r0 = matrix_from_json(jm.at("c_r0"), spec.net.M);
  else
    p.c_r0 = jm.at("c_r0_kappa").get<double>() * spec.net.t;
  if (jm.contains("c_d0"))
    p.c_d0 = matrix_from_json(jm.at("c_d0"), spec.net.M);
  else
    p.c_d0 = jm.at("c_d0_kappa").get<double>() * spec.net.t;
  p.q0 = jm.at("q0").get<double>();
  p.alpha_r = jm.at("alpha_r").get<double>();
  p.alpha_d = jm.at("alpha_d").get<double>();
  p.w_max = jm.at("w_max").get<double>();
  p.Ca = jm.at("Ca").get<int>();
  if (jm.contains("dist")) {
    const json& jd = jm.at("dist");
    const std::string family = jd.value("family", std::string("lognormal"));
    p.dist.family = family == "exponential" ? DistFamily::Exponential
                                            : DistFamily::LogNormal;
    p.dist.sigma_wI = jd.value("sigma_wI", 0.5);
    p.dist.sigma_tg = jd.value("sigma_tg", 0.5);
    p.dist.sigma_wdg = jd.value("sigma_wdg", 0.5);
    p.dist.sigma_tbar = jd.value("sigma_tbar", 0.5);
    p.dist.rho_w = jd.value("rho_w", 0.0);
    p.dist.rho_t = jd.value("rho_t", 0.0);
  }
  if (jm.contains("pd")) {
    const json& jp = jm.at("pd");
    p.pd.amplitude = jp.value("a", 25.0);
    p.pd.scale = jp.value("s", 200.0);
    p.pd.shift = jp.value("b", 5.0);
  }
  p.validate(spec.net);

  if (j.contains("demand")) {
    const json& jd = j.at("demand");
    const std::string mode = jd.value("mode", std::string("explicit"));
    if (mode == "gravity")
      spec.demand_mode = DemandMode::Gravity;
    else if (mode == "opposite")
      spec.demand_mode = DemandMode::Opposite;
    else
      spec.demand_mode = DemandMode::Explicit;
    if (jd.contains("pop")) spec.pop = vector_from_json(jd.at("pop"), spec.net.M);
    if (jd.contains("reg")) spec.reg = vector_from_json(jd.at("reg"), spec.net.M);
    spec.ratio = jd.value("ratio", 0.0);
    if (jd.contains("sweep"))
      spec.sweep_levels = jd.at("sweep").get<std::vector<double>>();
    if (spec.demand_mode == DemandMode::Gravity) {
      if (spec.pop.size() != spec.net.M || spec.reg.size() != spec.net.M)
        throw ModelError("gravity mode requires pop and reg vectors");
      if ((spec.pop.array() <= 0.0).any() || (spec.reg.array() <= 0.0).any())
        throw ModelError("pop and reg must be positive");
    }
  }

  if (j.contains("solver")) {
    const json& js = j.at("solver");
    SolverConfig& s = spec.solver;
    s.r_lo = js.value("r_lo", s.r_lo);
    s.r_hi = js.value("r_hi", s.r_hi);
    s.c_lo = js.value("c_lo", s.c_lo);
    s.c_hi = js.value("c_hi", s.c_hi);
    s.n_hi = js.value("n_hi", s.n_hi);
    s.fd_step = js.value("fd_step", s.fd_step);
    s.mu0 = js.value("mu0", s.mu0);
    s.mu_growth = js.value("mu_growth", s.mu_growth);
    s.max_outer = js.value("max_outer", s.max_outer);
    s.max_inner = js.value("max_inner", s.max_inner);
    s.refine_max_inner = js.value("refine_max_inner", s.refine_max_inner);
    s.direct_max_inner = js.value("direct_max_inner", s.direct_max_inner);
    s.grad_tol = js.value("grad_tol", s.grad_tol);
    s.bisect_tol = js.value("bisect_tol", s.bisect_tol);
    s.constraint_tol = js.value("constraint_tol", s.constraint_tol);
    s.multistarts = js.value("starts", s.multistarts);
    s.seed = js.value("seed", s.seed);
    s.threads = js.value("threads", s.threads);
  }
  return spec;
}

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return scenario_from_json_text(buffer.str());
}

std::string scenario_to_json(const ScenarioSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["network"] = {{"M", spec.net.M},
                  {"travel_time", matrix_to_json(spec.net.t)},
                  {"L", vector_to_json(spec.net.L)},
                  {"tg", vector_to_json(spec.net.tg)}};
  const MarketParams& p = spec.params;
  j["market"] = {
      {"lambda_r0", matrix_to_json(p.lambda_r0)},
      {"lambda_d0", matrix_to_json(p.lambda_d0)},
      {"N0", p.N0},
      {"eps", p.eps},
      {"eta", p.eta},
      {"sigma", p.sigma},
      {"c_r0", matrix_to_json(p.c_r0)},
      {"c_d0", matrix_to_json(p.c_d0)},
      {"q0", p.q0},
      {"alpha_r", p.alpha_r},
      {"alpha_d", p.alpha_d},
      {"w_max", p.w_max},
      {"Ca", p.Ca},
      {"dist",
       {{"family", p.dist.family == DistFamily::Exponential ? "exponential"
                                                            : "lognormal"},
        {"sigma_wI", p.dist.sigma_wI},
        {"sigma_tg", p.dist.sigma_tg},
        {"sigma_wdg", p.dist.sigma_wdg},
        {"sigma_tbar", p.dist.sigma_tbar},
        {"rho_w", p.dist.rho_w},
        {"rho_t", p.dist.rho_t}}},
      {"pd", {{"a", p.pd.amplitude}, {"s", p.pd.scale}, {"b", p.pd.shift}}}};
  json jd;
  switch (spec.demand_mode) {
    case DemandMode::Gravity: jd["mode"] = "gravity"; break;
    case DemandMode::Opposite: jd["mode"] = "opposite"; break;
    default: jd["mode"] = "explicit"; break;
  }
  if (spec.pop.size() > 0) jd["pop"] = vector_to_json(spec.pop);
  if (spec.reg.size() > 0) jd["reg"] = vector_to_json(spec.reg);
  jd["ratio"] = spec.ratio;
  jd["sweep"] = spec.sweep_levels;
  j["demand"] = jd;
  j["solver"] = {{"starts", spec.solver.multistarts},
                 {"seed", spec.solver.seed},
                 {"max_inner", spec.solver.max_inner},
                 {"refine_max_inner", spec.solver.refine_max_inner},
                 {"direct_max_inner", spec.solver.direct_max_inner},
                 {"max_outer", spec.solver.max_outer},
                 {"n_hi", spec.solver.n_hi},
                 {"threads", spec.solver.threads}};
  return j.dump(2);
}

Matrix synthesize_gravity(const Vector& pop, const Vector& reg,
                          const Matrix& t, double ratio,
                          const Matrix& lambda_r0) {
  const Index M = t.rows();
  Matrix lam = Matrix::Zero(M, M);
  if (ratio <= 0.0) return lam;
  for (Index j = 0; j < M; ++j) {
    double denom = 0.0;
    for (Index k = 0; k < M; ++k) denom += reg(k) / t(k, j);
    for (Index i = 0; i < M; ++i)
      lam(i, j) = pop(j) * (reg(i) / t(i, j)) / denom;
  }
  const double target = ratio * lambda_r0.sum();
  lam *= target / lam.sum();
  return lam;
}

Matrix reshuffle_opposite(const Matrix& lambda_r0, double ratio) {
  const Index M = lambda_r0.rows();
  Matrix lam = Matrix::Zero(M, M);
  if (ratio <= 0.0) return lam;
  struct Entry {
    double value;
    Index flat;
  };
  std::vector<Entry> entries;
  entries.reserve(M * M);
  for (Index i = 0; i < M; ++i)
    for (Index j = 0; j < M; ++j)
      entries.push_back({lambda_r0(i, j), i * M + j});
  std::vector<Entry> by_rank = entries;
  // descending by value, ties by OD index
  std::stable_sort(by_rank.begin(), by_rank.end(), [](const Entry& a,
                                                      const Entry& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.flat < b.flat;
  });
  // the k-th largest ride pair receives the k-th smallest value
  for (std::size_t k = 0; k < by_rank.size(); ++k) {
    const Entry& target = by_rank[k];
    const Entry& source = by_rank[by_rank.size() - 1 - k];
    lam(target.flat / M, target.flat % M) = source.value;
  }
  lam *= ratio * lambda_r0.sum() / lam.sum();
  return lam;
}

MarketParams market_at_level(const ScenarioSpec& spec, double level) {
  MarketParams p = spec.params;
  if (level <= 0.0) {
    p.lambda_d0 = Matrix::Zero(spec.net.M, spec.net.M);
    return p;
  }
  switch (spec.demand_mode) {
    case DemandMode::Gravity:
      p.lambda_d0 = synthesize_gravity(spec.pop, spec.reg, spec.net.t, level,
                                       spec.params.lambda_r0);
      break;
    case DemandMode::Opposite:
      p.lambda_d0 = reshuffle_opposite(spec.params.lambda_r0, level);
      break;
    case DemandMode::Explicit: {
      const double total = spec.params.lambda_d0.sum();
      if (total <= 0.0)
        throw ModelError("explicit demand mode needs a nonzero lambda_d0");
      p.lambda_d0 = spec.params.lambda_d0 *
                    (level * spec.params.lambda_r0.sum() / total);
      break;
    }
  }
  return p;
}

namespace {

struct SolvedLevel {
  OptReport report;
  EquilibriumState state;
};

SolvedLevel solve_level(const ScenarioSpec& spec, const MarketParams& params,
                        const ElementaryVars* warm) {
  SolvedLevel out;
  out.report = algorithm1(spec.net, params, spec.solver);
  if (warm && warm->r_r.size() == spec.net.M) {
    try {
      OptReport warm_rep =
          refine_constrained(spec.net, params, spec.solver, *warm);
      const bool warm_feasible =
          warm_rep.constraint_residual <= spec.solver.constraint_tol;
      const bool base_feasible =
          out.report.constraint_residual <= spec.solver.constraint_tol;
      if ((warm_feasible && !base_feasible) ||
          (warm_feasible == base_feasible &&
           warm_rep.best_profit > out.report.best_profit)) {
        warm_rep.starts = out.report.starts;
        warm_rep.approx_profit = out.report.approx_profit;
        out.report = std::move(warm_rep);
      }
    } catch (const ModelError&) {
    }
  }
  out.state = evaluate(out.report.best_vars, spec.net, params);
  return out;
}

double average_fare(const Matrix& fares, const Matrix& rates) {
  const double total = rates.sum();
  if (total <= 0.0) return 0.0;
  return (fares.array() * rates.array()).sum() / total;
}

double average_od_fare(const Vector& r_r, const Matrix& t,
                       const Matrix& lambda_do) {
  const double total = lambda_do.sum();
  if (total <= 0.0) return 0.0;
  double value = 0.0;
  for (Index i = 0; i < t.rows(); ++i)
    for (Index j = 0; j < t.cols(); ++j)
      value += r_r(i) * t(i, j) * lambda_do(i, j);
  return value / total;
}

// Generic one-service platform (used by the separate and on-demand-only
// benchmarks): demand is a two-way logit against the outside option, waiting
// times follow the square-root law, and the wage is whatever staffs the
// required fleet.
struct SingleService {
  const Network* net;
  Matrix lambda0;
  Matrix c0;
  double sensitivity;
  // cost of service from i to j given fare rate r_i and waiting time w_i
  std::function<double(Index, Index, double, double)> cost;
  // wage needed for a required fleet size
  std::function<double(double)> wage;
};

struct SingleResult {
  Vector r, n_idle;
  Matrix lambda;
  double profit = -kInf;
  double q = 0.0;
  double required = 0.0;
  bool ok = false;
};

SingleResult eval_single(const SingleService& svc, const Vector& r,
                         const Vector& n_idle) {
  const Network& net = *svc.net;
  const Index M = net.M;
  SingleResult res;
  res.r = r;
  res.n_idle = n_idle;
  res.lambda.resize(M, M);
  double revenue = 0.0;
  double required = 0.0;
  for (Index i = 0; i < M; ++i) {
    const double w_r = waiting_time_ondemand(net.L(i), n_idle(i));
    double outflow = 0.0;
    for (Index j = 0; j < M; ++j) {
      const double c = svc.cost(i, j, r(i), w_r);
      const double lam =
          svc.lambda0(i, j) /
          (1.0 + std::exp(svc.sensitivity * (c - svc.c0(i, j))));
      res.lambda(i, j) = lam;
      revenue += r(i) * net.t(i, j) * lam;
      required += lam * (net.t(i, j) + w_r);
      outflow += lam;
    }
    if (!(outflow > 0.0)) return res;  // degenerate: stay not-ok
    required += n_idle(i);             // cruising drivers, by Little's law
  }
  res.required = required;
  res.q = svc.wage(required);
  res.profit = revenue - required * res.q / 60.0;
  res.ok = std::isfinite(res.profit);
  return res;
}

SingleResult optimize_single(const SingleService& svc, const SolverConfig& cfg,
                             const Network& net, const MarketParams& params,
                             std::uint64_t seed) {
  const Index M = net.M;
  const Vector n_lo = cfg.n_lower(net, params);
  // pack x = (r, n_idle)
  auto objective = [&](const Vector& x) -> double {
    try {
      const SingleResult r = eval_single(svc, x.head(M), x.tail(M));
      return r.ok ? -r.profit : kInf;
    } catch (const ModelError&) {
      return kInf;
    }
  };
  Vector lo(2 * M), hi(2 * M);
  lo.head(M).setConstant(cfg.r_lo);
  hi.head(M).setConstant(cfg.r_hi);
  lo.tail(M) = n_lo;
  hi.tail(M).setConstant(cfg.n_hi);

  SingleResult best;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rdraw(1.0, 2.0), ndraw(150.0, 250.0);
  for (int start = 0; start < 3; ++start) {
    Vector x0(2 * M);
    for (Index i = 0; i < M; ++i) {
      x0(i) = std::clamp(rdraw(rng), cfg.r_lo, cfg.r_hi);
      x0(M + i) = std::clamp(ndraw(rng), n_lo(i), cfg.n_hi);
    }
    struct LocalBox {
      Vector lo, hi;
      Vector clamp(const Vector& x) const {
        return x.cwiseMax(lo).cwiseMin(hi);
      }
    };
    // reuse the shared minimizer through the public gradient-free interface
    // (a small local projected-gradient descent is enough at 2M dims)
    Vector x = x0.cwiseMax(lo).cwiseMin(hi);
    double fx = objective(x);
    if (!std::isfinite(fx)) continue;
    for (int iter = 0; iter < 200; ++iter) {
      Vector g(2 * M);
      Vector probe = x;
      for (Index i = 0; i < 2 * M; ++i) {
        const double h = 1e-5 * std::max(1.0, std::abs(x(i)));
        const double up = std::min(x(i) + h, hi(i));
        const double dn = std::max(x(i) - h, lo(i));
        probe(i) = up;
        const double fu = objective(probe);
        probe(i) = dn;
        const double fd = objective(probe);
        probe(i) = x(i);
        g(i) = (std::isfinite(fu) && std::isfinite(fd) && up > dn)
                   ? (fu - fd) / (up - dn)
                   : 0.0;
      }
      const Vector pg = x - (x - g).cwiseMax(lo).cwiseMin(hi);
      if (pg.cwiseAbs().maxCoeff() < 1e-7) break;
      double step = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 40; ++ls) {
        const Vector xn = (x - step * g).cwiseMax(lo).cwiseMin(hi);
        const double fn = objective(xn);
        if (std::isfinite(fn) && fn < fx - 1e-12) {
          x = xn;
          fx = fn;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    const SingleResult res = eval_single(svc, x.head(M), x.tail(M));
    if (res.ok && (!best.ok || res.profit > best.profit)) best = res;
  }
  if (!best.ok) throw ModelError("single-service benchmark failed to start");
  return best;
}

}  // namespace

std::string benchmark_name(BenchmarkCase c) {
  switch (c) {
    case BenchmarkCase::Integrated: return "integrated";
    case BenchmarkCase::Separate: return "separate";
    case BenchmarkCase::OndemandOnly: return "ondemand_only";
    case BenchmarkCase::RideOnly: return "ride_only";
  }
  return "unknown";
}

std::vector<SweepRow> sweep(const ScenarioSpec& spec,
                            const std::vector<double>& levels) {
  std::vector<SweepRow> rows;
  rows.reserve(levels.size());
  ElementaryVars warm;
  bool have_warm = false;
  for (double level : levels) {
    const MarketParams params = market_at_level(spec, level);
    const SolvedLevel solved =
        solve_level(spec, params, have_warm ? &warm : nullptr);
    SweepRow row;
    row.level = level;
    row.profit = solved.report.best_profit;
    row.drivers = solved.state.required_drivers;
    row.passenger_rate = solved.state.lambda_r.sum();
    row.customer_rate =
        solved.state.lambda_df.sum() + solved.state.lambda_do.sum();
    row.wage = solved.state.q;
    row.constraint_residual = solved.report.constraint_residual;
    rows.push_back(row);
    warm = solved.report.best_vars;
    have_warm = true;
  }
  return rows;
}

BenchmarkRow run_benchmark(const ScenarioSpec& spec, double level,
                           BenchmarkCase which) {
  const Index M = spec.net.M;
  BenchmarkRow row;
  row.name = benchmark_name(which);
  row.level = level;
  const MarketParams params = market_at_level(spec, level);

  if (which == BenchmarkCase::Integrated || which == BenchmarkCase::RideOnly) {
    const MarketParams used =
        which == BenchmarkCase::RideOnly ? market_at_level(spec, 0.0) : params;
    const SolvedLevel solved = solve_level(spec, used, nullptr);
    row.profit = solved.report.best_profit;
    row.drivers = solved.state.required_drivers;
    row.passenger_rate = solved.state.lambda_r.sum();
    row.delivery_rate =
        solved.state.lambda_df.sum() + solved.state.lambda_do.sum();
    row.avg_flex_fare =
        average_fare(solved.state.r_df, solved.state.lambda_df);
    row.avg_od_fare = average_od_fare(solved.state.r_r, spec.net.t,
                                      solved.state.lambda_do);
    row.wage = solved.state.q;
    row.zonal_flex = solved.state.lambda_df.rowwise().sum();
    row.zonal_od = solved.state.lambda_do.rowwise().sum();
    row.zonal_idle = solved.report.best_vars.n_idle;
    return row;
  }

  if (which == BenchmarkCase::OndemandOnly) {
    // integrated fleet, parcels priced like rides, no flexible channel
    SingleService svc;
    svc.net = &spec.net;
    svc.lambda0 = params.lambda_r0;  // placeholder; cost handles both demands
    // On-demand-only shares the fleet between passengers and parcels; fold
    // both demands into one objective by evaluating them jointly.
    const Vector n_lo = spec.solver.n_lower(spec.net, params);
    auto objective_state = [&](const Vector& x, BenchmarkRow* out) -> double {
      const Vector r = x.head(M);
      const Vector n_idle = x.tail(M);
      double revenue = 0.0, required = 0.0, pax = 0.0, parcels = 0.0;
      double od_fare_num = 0.0;
      Vector zonal_od = Vector::Zero(M);
      for (Index i = 0; i < M; ++i) {
        const double w_r = waiting_time_ondemand(spec.net.L(i), n_idle(i));
        double outflow = 0.0;
        for (Index j = 0; j < M; ++j) {
          const double t = spec.net.t(i, j);
          const double c_r = ride_cost(w_r, r(i), t, params.alpha_r);
          const double lam_r = ride_demand(params.lambda_r0(i, j), c_r,
                                           params.c_r0(i, j), params.eps);
          const double c_do =
              params.alpha_d * w_r + params.pd(t) + r(i) * t;
          const double lam_do =
              params.lambda_d0(i, j) /
              (1.0 + std::exp(params.eta * (c_do - params.c_d0(i, j))));
          revenue += r(i) * t * (lam_r + lam_do);
          required += (lam_r + lam_do) * (t + w_r);
          outflow += lam_r + lam_do;
          pax += lam_r;
          parcels += lam_do;
          od_fare_num += r(i) * t * lam_do;
          zonal_od(i) += lam_do;
        }
        if (!(outflow > 0.0)) return kInf;
        required += n_idle(i);
      }
      double q;
      try {
        q = invert_wage(required, params.N0, params.sigma, params.q0);
      } catch (const ModelError&) {
        return kInf;
      }
      const double prof = revenue - required * q / 60.0;
      if (out) {
        out->profit = prof;
        out->drivers = required;
        out->passenger_rate = pax;
        out->delivery_rate = parcels;
        out->avg_od_fare = parcels > 0.0 ? od_fare_num / parcels : 0.0;
        out->avg_flex_fare = 0.0;
        out->wage = q;
        out->zonal_flex = Vector::Zero(M);
        out->zonal_od = zonal_od;
        out->zonal_idle = n_idle;
      }
      return -prof;
    };
    Vector lo(2 * M), hi(2 * M);
    lo.head(M).setConstant(spec.solver.r_lo);
    hi.head(M).setConstant(spec.solver.r_hi);
    lo.tail(M) = n_lo;
    hi.tail(M).setConstant(spec.solver.n_hi);
    double best_f = kInf;
    Vector best_x;
    std::mt19937_64 rng(stream_seed(spec.solver.seed, 0xB100));
    std::uniform_real_distribution<double> rdraw(1.0, 2.0),
        ndraw(150.0, 250.0);
    for (int start = 0; start < 3; ++start) {
      Vector x(2 * M);
      for (Index i = 0; i < M; ++i) {
        x(i) = std::clamp(rdraw(rng), spec.solver.r_lo, spec.solver.r_hi);
        x(M + i) = std::clamp(ndraw(rng), n_lo(i), spec.solver.n_hi);
      }
      double fx = objective_state(x, nullptr);
      if (!std::isfinite(fx)) continue;
      for (int iter = 0; iter < 250; ++iter) {
        Vector g(2 * M);
        Vector probe = x;
        for (Index i = 0; i < 2 * M; ++i) {
          const double h = 1e-5 * std::max(1.0, std::abs(x(i)));
          const double up = std::min(x(i) + h, hi(i));
          const double dn = std::max(x(i) - h, lo(i));
          probe(i) = up;
          const double fu = objective_state(probe, nullptr);
          probe(i) = dn;
          const double fd = objective_state(probe, nullptr);
          probe(i) = x(i);
          g(i) = (std::isfinite(fu) && std::isfinite(fd) && up > dn)
                     ? (fu - fd) / (up - dn)
                     : 0.0;
        }
        const Vector pg = x - (x - g).cwiseMax(lo).cwiseMin(hi);
        if (pg.cwiseAbs().maxCoeff() < 1e-7) break;
        double step = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls) {
          const Vector xn = (x - step * g).cwiseMax(lo).cwiseMin(hi);
          const double fn = objective_state(xn, nullptr);
          if (std::isfinite(fn) && fn < fx - 1e-12) {
            x = xn;
            fx = fn;
            moved = true;
            break;
          }
          step *= 0.5;
        }
        if (!moved) break;
      }
      if (fx < best_f) {
        best_f = fx;
        best_x = x;
      }
    }
    if (!best_x.size())
      throw ModelError("on-demand-only benchmark failed to start");
    objective_state(best_x, &row);
    return row;
  }

  // Separate platforms: iterated best response on the two wages.
  SingleService ride;
  ride.net = &spec.net;
  ride.lambda0 = params.lambda_r0;
  ride.c0 = params.c_r0;
  ride.sensitivity = params.eps;
  ride.cost = [&](Index i, Index j, double r, double w) {
    (void)i;
    return ride_cost(w, r, spec.net.t(i, j), params.alpha_r);
  };
  SingleService delivery;
  delivery.net = &spec.net;
  delivery.lambda0 = params.lambda_d0;
  delivery.c0 = params.c_d0;
  delivery.sensitivity = params.eta;
  delivery.cost = [&](Index i, Index j, double r, double w) {
    return params.alpha_d * w + params.pd(spec.net.t(i, j)) +
           r * spec.net.t(i, j);
  };
  auto rival_wage = [&](double required, double q_rival) {
    if (!(required > 0.0) || !(required < params.N0))
      throw InfeasibleSupplyError(required, params.N0);
    const double denom =
        std::exp(params.sigma * q_rival) + std::exp(params.sigma * params.q0);
    return std::log(required * denom / (params.N0 - required)) / params.sigma;
  };

  double q_ride = params.q0;
  double q_del = params.q0;
  SingleResult ride_sol, del_sol;
  bool converged = false;
  double prev_qr = q_ride, prev_qd = q_del;
  double prev2_qr = q_ride, prev2_qd = q_del;
  const bool delivery_active = params.lambda_d0.sum() > 0.0;
  for (int round = 0; round < 50; ++round) {
    ride.wage = [&](double req) { return rival_wage(req, q_del); };
    ride_sol = optimize_single(ride, spec.solver, spec.net, params,
                               stream_seed(spec.solver.seed, 0xB200 + round));
    const double new_qr = ride_sol.q;
    double new_qd = q_del;
    if (delivery_active) {
      delivery.wage = [&](double req) { return rival_wage(req, new_qr); };
      del_sol =
          optimize_single(delivery, spec.solver, spec.net, params,
                          stream_seed(spec.solver.seed, 0xB300 + round));
      new_qd = del_sol.q;
    }
    if (std::abs(new_qr - q_ride) <= 1e-4 && std::abs(new_qd - q_del) <= 1e-4) {
      q_ride = new_qr;
      q_del = new_qd;
      converged = true;
      break;
    }
    // two-cycle detection
    if (round >= 2 && std::abs(new_qr - prev2_qr) <= 1e-4 &&
        std::abs(new_qd - prev2_qd) <= 1e-4) {
      q_ride = 0.5 * (new_qr + prev_qr);
      q_del = 0.5 * (new_qd + prev_qd);
      row.cycled = true;
      break;
    }
    prev2_qr = prev_qr;
    prev2_qd = prev_qd;
    prev_qr = new_qr;
    prev_qd = new_qd;
    q_ride = new_qr;
    q_del = new_qd;
  }
  (void)converged;

  row.profit = ride_sol.profit + (delivery_active ? del_sol.profit : 0.0);
  row.drivers = ride_sol.required + (delivery_active ? del_sol.required : 0.0);
  row.passenger_rate = ride_sol.lambda.sum();
  row.delivery_rate = delivery_active ? del_sol.lambda.sum() : 0.0;
  row.avg_flex_fare = 0.0;
  row.avg_od_fare =
      delivery_active
          ? average_od_fare(del_sol.r, spec.net.t, del_sol.lambda)
          : 0.0;
  row.wage = q_ride;
  row.zonal_flex = Vector::Zero(M);
  row.zonal_od =
      delivery_active ? Vector(del_sol.lambda.rowwise().sum()) : Vector::Zero(M);
  row.zonal_idle = ride_sol.n_idle;
  return row;
}

std::vector<BenchmarkRow> run_all_benchmarks(const ScenarioSpec& spec,
                                             double level) {
  std::vector<BenchmarkRow> rows;
  for (BenchmarkCase c :
       {BenchmarkCase::Integrated, BenchmarkCase::Separate,
        BenchmarkCase::OndemandOnly, BenchmarkCase::RideOnly})
    rows.push_back(run_benchmark(spec, level, c));
  return rows;
}

}  // namespace comodal
