// lwrnet: scenario configs in, CSV + summary artifacts out.
//
// Modes are subcommands; the scenario config is a JSON document (dialect
// documented in the README). Exit codes: 0 ok, 2 validation, 3 model regime,
// 4 internal invariant. Every failure additionally prints one machine-parsable
// record to stderr:  error kind=<validation|regime|internal> exit=<n> msg="...".
// CSV output is deterministic: fixed iteration order, 17-significant-digit
// round-trip numbers, schema-version comment line, no wall-clock content.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lwrnet/config.hpp"
#include "lwrnet/counterexample.hpp"
#include "lwrnet/csv.hpp"
#include "lwrnet/diagnostics.hpp"
#include "lwrnet/errors.hpp"
#include "lwrnet/flux_model.hpp"
#include "lwrnet/front_tracking.hpp"
#include "lwrnet/godunov.hpp"
#include "lwrnet/network.hpp"
#include "lwrnet/piecewise_linear.hpp"
#include "lwrnet/step_function.hpp"

namespace {

using namespace lwrnet;
namespace fs = std::filesystem;

// --- logging ---------------------------------------------------------------
// LWRNET_LOG = quiet | info | debug (default info). Logs go to stderr and
// never into artifact files, so they cannot break CSV determinism.

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("LWRNET_LOG");
    if (!env) return LogLevel::info;
    const std::string v(env);
    if (v == "quiet") return LogLevel::quiet;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) std::cerr << "lwrnet: " << msg << '\n';
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) std::cerr << "lwrnet[debug]: " << msg << '\n';
}

void error_record(const std::string& kind, int code, const std::string& msg) {
  std::string quoted;
  quoted.reserve(msg.size() + 2);
  for (char c : msg) {
    if (c == '"' || c == '\\') quoted += '\\';
    quoted += (c == '\n') ? ' ' : c;
  }
  std::cerr << "error kind=" << kind << " exit=" << code << " msg=\"" << quoted << "\"\n";
}

// --- shared plumbing ---------------------------------------------------------

struct RunContext {
  Json cfg;
  fs::path out;
};

std::string out_path(const RunContext& ctx, const std::string& name) {
  return (ctx.out / name).string();
}

// Persist the effective config (after overrides) next to the artifacts so a
// run can be reproduced from its output directory alone.
void write_config_used(const RunContext& ctx) {
  std::ofstream out(ctx.out / "config_used.json", std::ios::binary);
  if (!out) throw ValidationError("cannot write into output directory " + ctx.out.string());
  out << ctx.cfg.dump(2) << '\n';
}

void write_step_csv(const std::string& path, const std::string& schema, const StepFunction& s) {
  CsvWriter csv(path, schema, {"piece", "x_left", "x_right", "value"});
  for (std::size_t i = 0; i < s.vs.size(); ++i) {
    const std::string lo = i == 0 ? std::string() : csv_num(s.xs[i - 1]);
    const std::string hi = i == s.xs.size() ? std::string() : csv_num(s.xs[i]);
    csv.row({csv_num(i), lo, hi, csv_num(s.vs[i])});
  }
}

double conservation_defect(const GridSolution& g) {
  return std::abs(g.mass_final - g.mass_initial - g.inflow_integral + g.outflow_integral);
}

// --- simulate ----------------------------------------------------------------

void run_simulate(const RunContext& ctx) {
  const FluxModel flux = flux_from_config(ctx.cfg);
  const Network net = network_from_config(ctx.cfg);
  const NetworkData data = data_from_config(ctx.cfg);
  const NetworkOptions opt = numerics_from_config(ctx.cfg);
  const double T = horizon_from_config(ctx.cfg);

  const NetworkSolution sol = solve_network(net, flux, data, T, opt);
  const double vacuum_eps = 1e-10 * flux.rho_max();

  // One CSV per road: density plus, for every path using the road, the
  // conserved fraction-mass m and the fraction theta = m / rho. Theta cells
  // are left empty where the road is at vacuum (the fraction is undefined
  // there, and writing a convention would invite reading meaning into it).
  for (const auto& [road, gs] : sol.rho) {
    std::vector<std::string> cols = {"time", "x", "rho"};
    std::vector<const ThetaSolution*> path_fields;
    std::vector<std::string> path_ids;
    for (const auto& [path, roads] : sol.theta) {
      const auto it = roads.find(road);
      if (it == roads.end()) continue;
      cols.push_back("m_" + path);
      cols.push_back("theta_" + path);
      path_fields.push_back(&it->second);
      path_ids.push_back(path);
    }
    CsvWriter csv(out_path(ctx, "road_" + road + ".csv"), "road-fields", cols);
    for (std::size_t ti = 0; ti < gs.times.size(); ++ti) {
      for (int j = 0; j < gs.grid.n_cells; ++j) {
        std::vector<std::string> row = {csv_num(gs.times[ti]), csv_num(gs.grid.center(j)),
                                        csv_num(gs.levels[ti][j])};
        for (const ThetaSolution* ts : path_fields) {
          const double m = ts->m_levels[ti][j];
          const double rho = gs.levels[ti][j];
          row.push_back(csv_num(m));
          row.push_back(rho > vacuum_eps ? csv_num(m / rho) : std::string());
        }
        csv.row(row);
      }
    }
    log_debug("wrote road_" + road + ".csv");
  }

  // Junction audit: per step and outgoing road the demand assembled from the
  // path traces, the density it inverts to, and the flux identity residual.
  {
    CsvWriter csv(out_path(ctx, "junctions.csv"), "junction-audit",
                  {"junction", "time", "out_road", "demand", "rho_bar", "residual"});
    for (const JunctionAudit& audit : sol.audits) {
      const JunctionResidual res = junction_flux_residual(sol, audit.junction);
      for (const auto& [road, dem] : audit.demand) {
        const std::vector<double>& rb = audit.rho_bar.at(road);
        const std::vector<double>& rr = res.by_out_road.at(road);
        for (std::size_t i = 0; i < dem.size(); ++i)
          csv.row({audit.junction, csv_num(audit.step_times[i]), road, csv_num(dem[i]),
                   csv_num(rb[i]), csv_num(rr[i])});
      }
    }
  }
  {
    CsvWriter csv(out_path(ctx, "junction_paths.csv"), "junction-path-flux",
                  {"junction", "time", "path", "exit_flux"});
    for (const JunctionAudit& audit : sol.audits)
      for (const auto& [path, fluxes] : audit.path_exit_flux)
        for (std::size_t i = 0; i < fluxes.size(); ++i)
          csv.row({audit.junction, csv_num(audit.step_times[i]), path, csv_num(fluxes[i])});
  }

  SummaryWriter summary(out_path(ctx, "summary.txt"));
  summary.kv("mode", std::string("simulate"));
  summary.kv("horizon", sol.horizon);
  summary.kv("roads", sol.rho.size());
  summary.kv("paths", sol.theta.size());
  summary.kv("junctions", sol.audits.size());
  summary.kv("recorded_times", sol.times.size());
  summary.kv("source_road", sol.source_road);
  summary.kv("max_junction_residual", sol.max_junction_residual);
  summary.kv("max_sum_to_one_residual", sol.max_sum_to_one);
  summary.kv("mass_balance_error", sol.mass_balance_error);
  summary.kv("min_density_seen", sol.min_density_seen);
  summary.kv("max_density_seen", sol.max_density_seen);
  summary.kv("theta_clamp_events", sol.theta_clamp_events);
  log_info("simulate: " + std::to_string(sol.rho.size()) + " roads, " +
           std::to_string(sol.theta.size()) + " paths -> " + ctx.out.string());
}

// --- counterexample ------------------------------------------------------------

void run_counterexample(const RunContext& ctx) {
  const Json c = ctx.cfg.value("counterexample", Json::object());
  CounterexampleSpec spec;
  spec.n_blocks = c.value("blocks", 8);
  const int fv_cells = c.value("fv_cells", 1152);
  const double cfl = c.value("cfl", 0.45);

  const BlowupReport rep = tv_blowup_report(spec, fv_cells, cfl);

  {
    CsvWriter csv(out_path(ctx, "trace.csv"), "origin-trace", {"block", "t", "u", "w"});
    for (std::size_t i = 0; i < rep.sigma.size(); ++i)
      csv.row({csv_num(spec.first_block() + static_cast<int>(i)), csv_num(rep.sigma[i]),
               csv_num(rep.exact_at_zero.samples[i]), csv_num(rep.flux_at_zero.samples[i])});
  }
  const CounterexampleDatum datum = counterexample_initial_datum(spec);
  write_step_csv(out_path(ctx, "datum.csv"), "step-datum", datum.u0);
  if (fv_cells != 0) {
    CsvWriter csv(out_path(ctx, "fv_trace.csv"), "probe-trace", {"sample", "value"});
    for (std::size_t i = 0; i < rep.fv_at_zero.samples.size(); ++i)
      csv.row({csv_num(i), csv_num(rep.fv_at_zero.samples[i])});
  }

  SummaryWriter summary(out_path(ctx, "summary.txt"));
  summary.kv("mode", std::string("counterexample"));
  summary.kv("blocks", spec.n_blocks);
  summary.kv("horizon", spec.horizon());
  summary.kv("fan_extent", rep.r);
  summary.kv("fan_speed", counterexample_fan_speed(spec));
  summary.kv("tv_datum", rep.tv_u0);
  summary.kv("tv_trace_u", rep.exact_at_zero.tv);
  summary.kv("tv_trace_u_positive", rep.exact_at_zero.positive_var);
  summary.kv("tv_trace_w", rep.flux_at_zero.tv);
  summary.kv("rh_max_residual", rep.rh_max_residual);
  summary.kv("fv_cells", rep.fv_cells);
  if (fv_cells != 0) summary.kv("tv_trace_fv", rep.fv_at_zero.tv);
  summary.kv("max_junction_residual", 0.0);  // no junctions in this mode
  summary.kv("max_sum_to_one_residual", 0.0);
  summary.kv("mass_balance_error", rep.fv_mass_balance);
  log_info("counterexample: trace TV " + csv_num(rep.exact_at_zero.tv) + " from datum TV " +
           csv_num(rep.tv_u0) + " -> " + ctx.out.string());
}

// --- verify-tv -------------------------------------------------------------------

template <class Flux>
void emit_verify_tv(const RunContext& ctx, const Flux& f, const Json& v) {
  const StepFunction u0 = step_from_json(v.at("datum"), "verify_tv.datum");
  const double alpha = v.value("alpha", 0.0);
  const double beta = v.value("beta", 1.0);
  const double T = v.value("horizon", 0.0);
  const std::vector<double> xs = v.value("positions", std::vector<double>{});
  const std::vector<int> cells = v.value("cells", std::vector<int>{});
  const bool through_flux = v.value("through_flux", true);
  const double cfl = v.value("cfl", 0.45);

  const TraceTvTable table = verify_flux_trace_tv(f, alpha, beta, u0, T, xs, cells,
                                                  through_flux, cfl);

  CsvWriter csv(out_path(ctx, "trace_tv.csv"), "trace-tv",
                {"cells", "position", "tv", "positive_var", "negative_var", "samples"});
  double max_spread = 0.0;
  for (std::size_t lev = 0; lev < table.reports.size(); ++lev)
    for (const TVReport& r : table.reports[lev])
      csv.row({csv_num(table.cells[lev]), csv_num(r.x), csv_num(r.tv), csv_num(r.positive_var),
               csv_num(r.negative_var()), csv_num(r.resolution)});
  for (std::size_t k = 0; k < xs.size(); ++k) max_spread = std::max(max_spread, table.spread(k));

  SummaryWriter summary(out_path(ctx, "summary.txt"));
  summary.kv("mode", std::string("verify-tv"));
  summary.kv("horizon", T);
  summary.kv("through_flux", std::string(through_flux ? "true" : "false"));
  summary.kv("tv_datum", table.tv_datum);
  summary.kv("tv_flux_datum", table.tv_flux_datum);
  summary.kv("max_tv", table.max_tv());
  summary.kv("max_spread", max_spread);
  summary.kv("levels", table.cells.size());
  summary.kv("positions", xs.size());
  summary.kv("max_junction_residual", 0.0);  // no junctions in this mode
  summary.kv("max_sum_to_one_residual", 0.0);
  summary.kv("mass_balance_error", table.max_mass_balance());
  log_info("verify-tv: max trace TV " + csv_num(table.max_tv()) + ", spread " +
           csv_num(max_spread) + " -> " + ctx.out.string());
}

void run_verify_tv(const RunContext& ctx) {
  const Json v = ctx.cfg.value("verify_tv", Json::object());
  if (v.value("burgers", false))
    emit_verify_tv(ctx, QuadraticFlux{}, v);
  else
    emit_verify_tv(ctx, flux_from_config(ctx.cfg), v);
}

// --- stability ---------------------------------------------------------------------

void run_stability(const RunContext& ctx) {
  const FluxModel flux = flux_from_config(ctx.cfg);
  const Network net = network_from_config(ctx.cfg);
  const NetworkData data = data_from_config(ctx.cfg);
  const NetworkOptions opt = numerics_from_config(ctx.cfg);
  const double T = horizon_from_config(ctx.cfg);
  const Json s = ctx.cfg.value("stability", Json::object());
  const std::string bump = s.value("bump_path", "");
  const std::string balance = s.value("balance_path", "");
  const std::vector<double> deltas = s.value("deltas", std::vector<double>{});

  const StabilityTable table =
      stability_experiment(net, flux, data, bump, balance, deltas, T, opt);

  CsvWriter csv(out_path(ctx, "stability.csv"), "stability", {"delta", "dist_rho", "dist_m"});
  for (const StabilityRow& row : table.rows)
    csv.row({csv_num(row.delta), csv_num(row.dist_rho), csv_num(row.dist_m)});

  SummaryWriter summary(out_path(ctx, "summary.txt"));
  summary.kv("mode", std::string("stability"));
  summary.kv("horizon", T);
  summary.kv("bump_path", bump);
  summary.kv("balance_path", balance);
  summary.kv("rows", table.rows.size());
  summary.kv("self_error_rho", table.self_error_rho);
  summary.kv("self_error_m", table.self_error_m);
  summary.kv("max_junction_residual", table.max_junction_residual);
  summary.kv("max_sum_to_one_residual", table.max_sum_to_one);
  summary.kv("mass_balance_error", table.mass_balance_error);
  log_info("stability: " + std::to_string(table.rows.size()) + " perturbations -> " +
           ctx.out.string());
}

// --- bv-propagation ---------------------------------------------------------------

void run_bv(const RunContext& ctx) {
  const FluxModel flux = flux_from_config(ctx.cfg);
  const Network net = network_from_config(ctx.cfg);
  const NetworkData data = data_from_config(ctx.cfg);
  const NetworkOptions opt = numerics_from_config(ctx.cfg);
  const double T = horizon_from_config(ctx.cfg);
  const std::vector<int> multipliers =
      ctx.cfg.value("bv", Json::object()).value("multipliers", std::vector<int>{1, 2});

  const BvTable table = bv_propagation_experiment(net, flux, data, T, multipliers, opt);

  CsvWriter csv(out_path(ctx, "bv_tv.csv"), "bv-tv",
                {"multiplier", "field", "road", "path", "time", "tv"});
  for (const BvLevel& level : table.levels) {
    for (const auto& [road, series] : level.rho_tv)
      for (std::size_t i = 0; i < series.times.size(); ++i)
        csv.row({csv_num(level.multiplier), "rho", road, std::string(),
                 csv_num(series.times[i]), csv_num(series.tv[i])});
    for (const auto& [path, roads] : level.theta_tv)
      for (const auto& [road, series] : roads)
        for (std::size_t i = 0; i < series.times.size(); ++i)
          csv.row({csv_num(level.multiplier), "theta", road, path, csv_num(series.times[i]),
                   csv_num(series.tv[i])});
  }

  SummaryWriter summary(out_path(ctx, "summary.txt"));
  summary.kv("mode", std::string("bv-propagation"));
  summary.kv("horizon", T);
  summary.kv("levels", table.levels.size());
  summary.kv("vacuum_eps", table.vacuum_eps);
  for (std::size_t i = 0; i < table.levels.size(); ++i) {
    const std::string tag = "level" + std::to_string(i) + "_";
    summary.kv(tag + "multiplier", table.levels[i].multiplier);
    summary.kv(tag + "max_rho_tv", table.levels[i].max_rho_tv);
    summary.kv(tag + "max_theta_tv", table.levels[i].max_theta_tv);
  }
  summary.kv("max_junction_residual", table.max_junction_residual);
  summary.kv("max_sum_to_one_residual", table.max_sum_to_one);
  summary.kv("mass_balance_error", table.mass_balance_error);
  log_info("bv-propagation: " + std::to_string(table.levels.size()) + " levels -> " +
           ctx.out.string());
}

// --- convergence -------------------------------------------------------------------

void run_convergence(const RunContext& ctx) {
  const Json c = ctx.cfg.value("convergence", Json::object());
  const int nu = c.value("nu", 6);
  const double alpha = c.value("alpha", 0.0);
  const double beta = c.value("beta", 1.0);
  const double T = c.value("horizon", 0.0);
  const double cfl = c.value("cfl", 0.45);
  const std::vector<int> cells = c.value("cells", std::vector<int>{});
  if (cells.empty()) throw ValidationError("convergence needs a cells list");
  if (!(T > 0.0)) throw ValidationError("convergence.horizon must be positive");

  const FluxModel flux = flux_from_config(ctx.cfg);
  const PiecewiseLinearFlux pl =
      PiecewiseLinearFlux::sample(flux, nu, 0.0, flux.rho_star());
  const StepFunction u0 =
      quantize_datum(step_from_json(c.at("datum"), "convergence.datum"), nu);

  // Reference profile: the wave front tracking solution is exact for the
  // piecewise linear flux and lattice data, so the finite-volume error is
  // measured against it cell-averaged, not against another grid.
  const FrontTrackingSolution ft = evolve(pl, u0, T);
  const StepFunction exact = sample_space_profile(ft, T);

  CsvWriter csv(out_path(ctx, "convergence.csv"), "l1-convergence", {"cells", "dx", "l1_error"});
  double last_err = 0.0;
  double mass_defect = 0.0;
  for (int n : cells) {
    const Grid g = Grid::uniform(alpha, beta, n);
    FvOptions opt;
    opt.cfl = cfl;
    opt.record_step_fields = false;
    const GridSolution fv = solve_cauchy_fv(pl, g, cells_from_step(g, u0), T, opt);
    double err = 0.0;
    for (int j = 0; j < n; ++j)
      err += std::abs(fv.levels.back()[j] * g.dx - exact.integral(g.face(j), g.face(j + 1)));
    csv.row({csv_num(n), csv_num(g.dx), csv_num(err)});
    last_err = err;
    mass_defect = std::max(mass_defect, conservation_defect(fv));
  }

  SummaryWriter summary(out_path(ctx, "summary.txt"));
  summary.kv("mode", std::string("convergence"));
  summary.kv("horizon", T);
  summary.kv("nu", nu);
  summary.kv("tv_datum", total_variation(u0));
  summary.kv("levels", cells.size());
  summary.kv("l1_error_finest", last_err);
  summary.kv("max_junction_residual", 0.0);  // no junctions in this mode
  summary.kv("max_sum_to_one_residual", 0.0);
  summary.kv("mass_balance_error", mass_defect);
  log_info("convergence: L1 error " + csv_num(last_err) + " at finest level -> " +
           ctx.out.string());
}

// --- dispatch ---------------------------------------------------------------------

int dispatch(const std::string& mode, const std::string& config_path,
             const std::string& out_flag, const std::vector<std::string>& overrides,
             int blocks_flag) {
  Json cfg = load_config_file(config_path);
  if (!mode.empty()) cfg["mode"] = mode;
  for (const std::string& kv : overrides) apply_override(cfg, kv);
  if (blocks_flag > 0) cfg["counterexample"]["blocks"] = blocks_flag;

  // No preflight gate here: the solvers enforce every constraint themselves
  // and their error types carry the exit-code taxonomy (a config can be
  // structurally fine yet out of regime, which must exit 3, not 2). The
  // `validate` subcommand is the place for the full diagnostics list.

  RunContext ctx;
  ctx.cfg = std::move(cfg);
  ctx.out = out_flag.empty() ? fs::path(ctx.cfg.value("out", "out")) : fs::path(out_flag);
  fs::create_directories(ctx.out);
  write_config_used(ctx);

  const std::string m = ctx.cfg.at("mode").get<std::string>();
  if (m == "simulate") run_simulate(ctx);
  else if (m == "counterexample") run_counterexample(ctx);
  else if (m == "verify-tv") run_verify_tv(ctx);
  else if (m == "stability") run_stability(ctx);
  else if (m == "bv-propagation") run_bv(ctx);
  else if (m == "convergence") run_convergence(ctx);
  else throw ValidationError("unknown mode: " + m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-path traffic network solver suite"};
  app.footer("Exit codes: 0 ok, 2 validation error, 3 model-regime error, 4 internal error.\n"
             "Environment: LWRNET_LOG=quiet|info|debug controls stderr verbosity.");
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  int threads = 1;
  int blocks_flag = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "scenario config file (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (default: config's `out`, else ./out)");
    sub->add_option("--set", overrides, "override a config entry, e.g. --set numerics.cfl=0.4")
        ->take_all();
    sub->add_option("--threads", threads, "worker threads for scenario sweeps")
        ->check(CLI::PositiveNumber);
    return sub;
  };

  add_common(app.add_subcommand("simulate", "solve a network scenario and dump fields"));
  CLI::App* ce = add_common(
      app.add_subcommand("counterexample", "trace-variation blow-up construction"));
  ce->add_option("--blocks", blocks_flag, "number of oscillation blocks")
      ->check(CLI::Range(1, 20));
  add_common(app.add_subcommand("verify-tv", "trace TV under grid refinement"));
  add_common(app.add_subcommand("stability", "entering-fraction perturbation distances"));
  add_common(app.add_subcommand("bv-propagation", "spatial TV through junctions vs refinement"));
  add_common(app.add_subcommand("convergence", "finite volume vs front tracking L1 error"));
  CLI::App* validate_cmd =
      app.add_subcommand("validate", "check a config without running anything");
  validate_cmd->add_option("--config", config_path, "scenario config file (JSON)")->required();
  validate_cmd->add_option("--set", overrides, "override a config entry")->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    error_record("validation", 2, std::string("bad command line: ") + e.what());
    return 2;
  }

  try {
    if (validate_cmd->parsed()) {
      Json cfg = load_config_file(config_path);
      for (const std::string& kv : overrides) apply_override(cfg, kv);
      const std::vector<std::string> diags = validate_config(cfg);
      for (const std::string& d : diags) std::cout << "diagnostic: " << d << '\n';
      if (diags.empty()) {
        std::cout << "ok\n";
        return 0;
      }
      return 2;
    }
    log_debug("threads=" + std::to_string(threads) +
              " (modes in this build run a single scenario; the flag caps sweep "
              "parallelism when a sweep is configured)");
    const std::string mode = app.get_subcommands().front()->get_name();
    return dispatch(mode, config_path, out_dir, overrides, blocks_flag);
  } catch (const ValidationError& e) {
    error_record("validation", 2, e.what());
    return 2;
  } catch (const RegimeError& e) {
    error_record("regime", 3, e.what());
    return 3;
  } catch (const InternalError& e) {
    error_record("internal", 4, e.what());
    return 4;
  } catch (const std::exception& e) {
    error_record("internal", 4, e.what());
    return 4;
  }
}
