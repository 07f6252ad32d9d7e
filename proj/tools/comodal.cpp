#include "comodal/errors.hpp"
#include "comodal/market.hpp"
#include "comodal/report.hpp"
#include "comodal/scenario.hpp"
#include "comodal/sim.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>

namespace {

using namespace comodal;

struct CommonArgs {
  std::string scenario_path;
  std::string outdir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int starts = 0;
  double level = -1.0;
  bool level_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_out = false) {
  cmd->add_option("--scenario", args.scenario_path, "scenario file (JSON)")
      ->required();
  auto* out = cmd->add_option("--out", args.outdir, "output directory");
  if (needs_out) out->required();
  cmd->add_option("--seed", args.seed, "random seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--starts", args.starts, "multistart count");
  cmd->add_option("--level", args.level, "delivery demand level")
      ->each([&args](const std::string&) { args.level_set = true; });
}

ScenarioSpec load_with_overrides(const CommonArgs& args) {
  ScenarioSpec spec = load_scenario(args.scenario_path);
  if (args.seed_set) spec.solver.seed = args.seed;
  if (args.starts > 0) spec.solver.multistarts = args.starts;
  return spec;
}

double effective_level(const ScenarioSpec& spec, const CommonArgs& args) {
  return args.level_set ? args.level : spec.ratio;
}

void write_state_csv(const std::string& path, const EquilibriumState& st,
                     const ElementaryVars& vars, const Network& net) {
  CsvTable od;
  od.header = {"origin",    "dest",      "lambda_r", "lambda_df",
               "lambda_do", "t_df",      "r_df",     "c_df"};
  for (Index i = 0; i < net.M; ++i)
    for (Index j = 0; j < net.M; ++j)
      od.rows.push_back({std::to_string(i + 1), std::to_string(j + 1),
                         format_double(st.lambda_r(i, j)),
                         format_double(st.lambda_df(i, j)),
                         format_double(st.lambda_do(i, j)),
                         format_double(st.t_df(i, j)),
                         format_double(st.r_df(i, j)),
                         format_double(vars.c_df(i, j))});
  write_csv(path, od);
}

void write_zone_csv(const std::string& path, const EquilibriumState& st,
                    const ElementaryVars& vars, const Network& net) {
  CsvTable z;
  z.header = {"zone",  "r_r",  "n_idle", "n_bar", "w_dg",
              "w_r",   "w_I",  "w_df",   "n_ig",  "fp_residual",
              "little_residual"};
  for (Index i = 0; i < net.M; ++i)
    z.rows.push_back({std::to_string(i + 1), format_double(vars.r_r(i)),
                      format_double(vars.n_idle(i)),
                      format_double(vars.n_bar(i)),
                      format_double(vars.w_dg(i)), format_double(st.w_r(i)),
                      format_double(st.w_I(i)), format_double(st.w_df(i)),
                      format_double(st.n_ig(i)),
                      format_double(st.residuals.fixed_point(i)),
                      format_double(st.residuals.little(i))});
  write_csv(path, z);
}

int cmd_eval(const CommonArgs& args, bool dump_ctmc) {
  ScenarioSpec spec = load_with_overrides(args);
  const double level = effective_level(spec, args);
  const MarketParams params = market_at_level(spec, level);
  const InitialGuess guess = draw_initial_guess(
      spec.net, params, spec.solver, stream_seed(spec.solver.seed, 0xA100));
  const ApproxPoint point{guess.r_r, guess.c_df, guess.n_idle};
  const ElementaryVars vars =
      expand_approx(spec.net, params, spec.solver, point);
  const EquilibriumState st = evaluate(vars, spec.net, params);
  std::printf("scenario %s at level %s\n", spec.name.c_str(),
              format_double(level).c_str());
  std::printf("profit        %s $/min\n", format_double(st.profit).c_str());
  std::printf("wage          %s $/hr\n", format_double(st.q).c_str());
  std::printf("drivers       %s\n",
              format_double(st.required_drivers).c_str());
  std::printf("passengers    %s /min\n",
              format_double(st.lambda_r.sum()).c_str());
  std::printf("parcels       %s /min (flexible %s, on-demand %s)\n",
              format_double(st.lambda_df.sum() + st.lambda_do.sum()).c_str(),
              format_double(st.lambda_df.sum()).c_str(),
              format_double(st.lambda_do.sum()).c_str());
  std::printf("conservation  %s drivers\n",
              format_double(st.residuals.conservation).c_str());
  if (!args.outdir.empty()) {
    std::filesystem::create_directories(args.outdir);
    write_state_csv(args.outdir + "/state_od.csv", st, vars, spec.net);
    write_zone_csv(args.outdir + "/state_zone.csv", st, vars, spec.net);
    if (dump_ctmc) {
      CsvTable pc;
      pc.header = {"state"};
      for (Index s = 0; s < st.ctmc.Pc.rows(); ++s)
        pc.header.push_back("to_" + std::to_string(s));
      for (Index s = 0; s < st.ctmc.Pc.rows(); ++s) {
        std::vector<std::string> row{std::to_string(s)};
        for (Index s2 = 0; s2 < st.ctmc.Pc.cols(); ++s2)
          row.push_back(format_double(st.ctmc.Pc(s, s2)));
        pc.rows.push_back(row);
      }
      write_csv(args.outdir + "/ctmc_pc.csv", pc);
      CsvTable pi;
      pi.header = {"state", "zone", "carried", "pi", "hold_min", "drivers"};
      for (Index z = 0; z < spec.net.M; ++z)
        for (int n = 0; n <= params.Ca; ++n) {
          const Index s = st.ctmc.state(z, n);
          pi.rows.push_back({std::to_string(s), std::to_string(z + 1),
                             std::to_string(n), format_double(st.ctmc.pi(s)),
                             format_double(st.ctmc.hold(s)),
                             format_double(st.ctmc.n_state(s))});
        }
      write_csv(args.outdir + "/ctmc_pi.csv", pi);
    }
  }
  return 0;
}

int cmd_optimize(const CommonArgs& args, const std::string& method) {
  ScenarioSpec spec = load_with_overrides(args);
  const double level = effective_level(spec, args);
  const MarketParams params = market_at_level(spec, level);
  OptReport report;
  if (method == "direct") {
    report = direct_solve_multistart(spec.net, params, spec.solver);
  } else {
    report = algorithm1(spec.net, params, spec.solver);
  }
  std::printf("%s: profit %s $/min, residual %s%s (%.1f s, %ld evaluations)\n",
              method.c_str(), format_double(report.best_profit).c_str(),
              format_double(report.constraint_residual).c_str(),
              report.diverged ? ", diverged" : "", report.wall_seconds,
              report.evaluations);
  for (const auto& s : report.starts)
    std::printf("  start %d: approx %s refined %s residual %s (%.1f s)\n",
                s.start, format_double(s.approx_profit).c_str(),
                format_double(s.refined_profit).c_str(),
                format_double(s.constraint_residual).c_str(), s.wall_seconds);
  if (!args.outdir.empty() && method != "direct") {
    std::filesystem::create_directories(args.outdir);
    const EquilibriumState st = evaluate(report.best_vars, spec.net, params);
    write_state_csv(args.outdir + "/solution_od.csv", st, report.best_vars,
                    spec.net);
    write_zone_csv(args.outdir + "/solution_zone.csv", st, report.best_vars,
                   spec.net);
    CsvTable summary;
    summary.header = {"start", "approx_profit", "refined_profit",
                      "constraint_residual", "diverged"};
    for (const auto& s : report.starts)
      summary.rows.push_back({std::to_string(s.start),
                              format_double(s.approx_profit),
                              format_double(s.refined_profit),
                              format_double(s.constraint_residual),
                              s.diverged ? "1" : "0"});
    write_csv(args.outdir + "/optreport.csv", summary);
  }
  return report.diverged ? 2 : 0;
}

int cmd_sweep(const CommonArgs& args) {
  ScenarioSpec spec = load_with_overrides(args);
  std::vector<double> levels = spec.sweep_levels;
  if (levels.empty()) levels = {spec.ratio};
  const std::vector<SweepRow> rows = sweep(spec, levels);
  std::printf("level  profit       drivers   passengers  parcels    wage\n");
  for (const auto& r : rows)
    std::printf("%-6s %-12s %-9s %-11s %-10s %s\n",
                format_double(r.level).c_str(), format_double(r.profit).c_str(),
                format_double(r.drivers).c_str(),
                format_double(r.passenger_rate).c_str(),
                format_double(r.customer_rate).c_str(),
                format_double(r.wage).c_str());
  if (!args.outdir.empty()) {
    ReportBundle bundle;
    bundle.sweep = rows;
    emit_reports(bundle, args.outdir, scenario_to_json(spec),
                 spec.solver.seed);
  }
  return 0;
}

int cmd_benchmark(const CommonArgs& args) {
  ScenarioSpec spec = load_with_overrides(args);
  const double level = effective_level(spec, args);
  const std::vector<BenchmarkRow> rows = run_all_benchmarks(spec, level);
  std::printf(
      "case            profit      drivers  passengers  parcels  flex$  od$\n");
  for (const auto& r : rows)
    std::printf("%-15s %-11s %-8s %-11s %-8s %-6s %s%s\n", r.name.c_str(),
                format_double(r.profit).c_str(),
                format_double(r.drivers).c_str(),
                format_double(r.passenger_rate).c_str(),
                format_double(r.delivery_rate).c_str(),
                format_double(r.avg_flex_fare).c_str(),
                format_double(r.avg_od_fare).c_str(),
                r.cycled ? " (cycled)" : "");
  if (!args.outdir.empty()) {
    ReportBundle bundle;
    bundle.benchmarks = rows;
    bundle.benchmark_level = level;
    // reuse the report writer with a single-level sweep analog
    SweepRow stub;
    const BenchmarkRow& integrated = rows.front();
    stub.level = level;
    stub.profit = integrated.profit;
    stub.drivers = integrated.drivers;
    stub.passenger_rate = integrated.passenger_rate;
    stub.customer_rate = integrated.delivery_rate;
    stub.wage = integrated.wage;
    bundle.sweep = {stub};
    emit_reports(bundle, args.outdir, scenario_to_json(spec),
                 spec.solver.seed);
  }
  return 0;
}

struct ValidationRow {
  std::string check;
  double analytic;
  double estimate;
  double tolerance;
  bool pass;
};

int cmd_validate(const CommonArgs& args) {
  ScenarioSpec spec = load_with_overrides(args);
  const std::uint64_t seed = spec.solver.seed;
  std::vector<ValidationRow> rows;
  std::mt19937_64 rng(stream_seed(seed, 0xC000));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto random_chain = [&](Index M) {
    Matrix P(M, M);
    for (Index i = 0; i < M; ++i) {
      for (Index j = 0; j < M; ++j) P(i, j) = 0.1 + unit(rng);
      P.row(i) /= P.row(i).sum();
    }
    return P;
  };
  auto random_times = [&](Index M) {
    Matrix S(M, M);
    for (Index i = 0; i < M; ++i)
      for (Index j = 0; j < M; ++j) S(i, j) = 2.0 + 10.0 * unit(rng);
    return S;
  };

  // limiting distribution vs long-run occupancy
  for (int rep = 0; rep < 3; ++rep) {
    const Index M = 3;
    const int Ca = 2;
    const Matrix P = random_chain(M);
    Matrix lambda_df(M, M);
    for (Index i = 0; i < M; ++i)
      for (Index j = 0; j < M; ++j) lambda_df(i, j) = unit(rng);
    const Vector share = flexible_destination_shares(lambda_df);
    Vector tg(M), w_I(M), w_dg(M), tbar(M);
    for (Index i = 0; i < M; ++i) {
      tg(i) = 2.0 + 4.0 * unit(rng);
      w_I(i) = 3.0 + 5.0 * unit(rng);
      w_dg(i) = 2.0 + 6.0 * unit(rng);
      tbar(i) = 2.0 + 6.0 * unit(rng);
    }
    const SuccessRates rates = make_success_rates(
        tg, w_I, w_dg, tbar, share, Ca, spec.params.dist);
    const Matrix Pc = build_transitions(P, rates);
    const Vector hold = holding_times(Pc, w_I, tg, w_dg, tbar, M, Ca);
    const Vector pi = limiting_probabilities(Pc, hold);
    SimConfig cfg;
    cfg.seed = stream_seed(seed, 0xC100 + rep);
    cfg.horizon_events = 300000;
    const OccupancyEstimate occ = simulate_ctmc(Pc, hold, cfg);
    const double l1 = (occ.occupancy - pi).cwiseAbs().sum();
    rows.push_back({"ctmc_occupancy_L1_" + std::to_string(rep), 0.0, l1, 0.02,
                    l1 <= 0.02});
  }

  // first-passage times and delivery times
  for (int rep = 0; rep < 3; ++rep) {
    const Index M = 4;
    const Matrix P = random_chain(M);
    const Matrix S = random_times(M);
    const Matrix ET = first_passage_times(P, S);
    SimConfig cfg;
    cfg.seed = stream_seed(seed, 0xC200 + rep);
    const MeanEstimate fp = simulate_first_passage(P, S, 0, M - 1, cfg, 30000);
    const double rel = std::abs(fp.mean - ET(0, M - 1)) / ET(0, M - 1);
    rows.push_back({"first_passage_rel_" + std::to_string(rep), ET(0, M - 1),
                    fp.mean, 0.02, rel <= 0.02});
    Vector p_drop(M);
    for (Index i = 0; i < M; ++i) p_drop(i) = 0.3 + 0.6 * unit(rng);
    const Matrix t_df = flexible_delivery_time(ET, p_drop);
    const MeanEstimate dv =
        simulate_delivery(P, S, p_drop, 0, M - 1, cfg, 30000);
    const double rel_dv = std::abs(dv.mean - t_df(0, M - 1)) / t_df(0, M - 1);
    rows.push_back({"delivery_time_rel_" + std::to_string(rep), t_df(0, M - 1),
                    dv.mean, 0.02, rel_dv <= 0.02});
  }

  // race probabilities against closed forms
  for (DistFamily family : {DistFamily::Exponential, DistFamily::LogNormal}) {
    DistributionSpec dist = spec.params.dist;
    dist.family = family;
    const double tg = 3.0 + 4.0 * unit(rng);
    const double wi = 3.0 + 4.0 * unit(rng);
    const double wdg = 2.0 + 6.0 * unit(rng);
    const double tbar = 2.0 + 6.0 * unit(rng);
    SimConfig cfg;
    cfg.seed = stream_seed(seed, 0xC300 + static_cast<int>(family));
    const RaceEstimate race = simulate_race(dist, tg, wi, wdg, tbar, cfg,
                                            200000);
    const double p_drop = success_drop(tg, wi, dist);
    const PickProbs pick = success_pick(tbar, wdg, wi, dist);
    const std::string tag =
        family == DistFamily::Exponential ? "exp" : "lognormal";
    rows.push_back({"race_drop_" + tag, p_drop, race.p_drop,
                    3.0 * race.se_drop + 1e-4,
                    std::abs(race.p_drop - p_drop) <=
                        3.0 * race.se_drop + 1e-4});
    rows.push_back({"race_wait_" + tag, pick.wait_factor, race.p_wait,
                    3.0 * race.se_wait + 1e-4,
                    std::abs(race.p_wait - pick.wait_factor) <=
                        3.0 * race.se_wait + 1e-4});
    rows.push_back({"race_time_" + tag, pick.time_factor, race.p_time,
                    3.0 * race.se_time + 1e-4,
                    std::abs(race.p_time - pick.time_factor) <=
                        3.0 * race.se_time + 1e-4});
  }

  bool all_pass = true;
  CsvTable csv;
  csv.header = {"check", "analytic", "estimate", "tolerance", "pass"};
  for (const auto& r : rows) {
    std::printf("%-28s analytic %-12s estimate %-12s %s\n", r.check.c_str(),
                format_double(r.analytic).c_str(),
                format_double(r.estimate).c_str(), r.pass ? "PASS" : "FAIL");
    csv.rows.push_back({r.check, format_double(r.analytic),
                        format_double(r.estimate), format_double(r.tolerance),
                        r.pass ? "1" : "0"});
    all_pass = all_pass && r.pass;
  }
  if (!args.outdir.empty()) {
    std::filesystem::create_directories(args.outdir);
    write_csv(args.outdir + "/validation.csv", csv);
  }
  return all_pass ? 0 : 1;
}

int cmd_report(const CommonArgs& args) {
  ScenarioSpec spec = load_with_overrides(args);
  std::vector<double> levels = spec.sweep_levels;
  if (levels.empty()) levels = {spec.ratio};
  ReportBundle bundle;
  bundle.sweep = sweep(spec, levels);
  bundle.benchmark_level = effective_level(spec, args);
  bundle.benchmarks = run_all_benchmarks(spec, bundle.benchmark_level);
  const auto files = emit_reports(bundle, args.outdir,
                                  scenario_to_json(spec), spec.solver.seed);
  for (const auto& f : files) std::printf("wrote %s/%s\n", args.outdir.c_str(),
                                          f.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"integrated ride-sourcing and parcel-delivery market toolkit"};
  app.require_subcommand(1);

  CommonArgs eval_args, opt_args, sweep_args, bench_args, val_args, rep_args;
  bool dump_ctmc = false;
  std::string method = "algorithm1";

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a reference market state");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_flag("--dump-ctmc", dump_ctmc, "write the driver chain as CSV");

  auto* opt_cmd = app.add_subcommand("optimize", "solve the pricing problem");
  add_common(opt_cmd, opt_args);
  opt_cmd->add_option("--method", method,
                      "algorithm1 (default) or direct baseline")
      ->check(CLI::IsMember({"algorithm1", "direct"}));

  auto* sweep_cmd = app.add_subcommand("sweep", "solve across demand levels");
  add_common(sweep_cmd, sweep_args);

  auto* bench_cmd =
      app.add_subcommand("benchmark", "compare market structures");
  add_common(bench_cmd, bench_args);

  auto* val_cmd =
      app.add_subcommand("validate", "analytic vs Monte Carlo checks");
  add_common(val_cmd, val_args);

  auto* rep_cmd = app.add_subcommand("report", "full sweep + benchmark report");
  add_common(rep_cmd, rep_args, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (eval_cmd->parsed()) return cmd_eval(eval_args, dump_ctmc);
    if (opt_cmd->parsed()) return cmd_optimize(opt_args, method);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
    if (bench_cmd->parsed()) return cmd_benchmark(bench_args);
    if (val_cmd->parsed()) return cmd_validate(val_args);
    if (rep_cmd->parsed()) return cmd_report(rep_args);
  } catch (const comodal::InfeasibleSupplyError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 2;
  } catch (const comodal::InfeasibleRegionError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
