#pragma once

// Tree networks of one-in/many-out junctions, solved road by road in
// topological order. Each step assembles junction data from the upstream
// road's per-path exit fluxes: the total demand is inverted through the free
// flux branch to an entering density, and per-path entering fractions are
// the flux ratios. Everything stays synchronous on one global time step, so
// the junction flux identity holds at the level of the scheme itself.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lwrnet/errors.hpp"
#include "lwrnet/flux_model.hpp"
#include "lwrnet/godunov.hpp"
#include "lwrnet/step_function.hpp"
#include "lwrnet/theta_transport.hpp"

namespace lwrnet {

struct RoadSpec {
  std::string id;
  double length = 1.0;
  int cells = 100;
};

struct JunctionSpec {
  std::string id;
  std::vector<std::string> incoming;  // must hold exactly one id
  std::vector<std::string> outgoing;
};

struct PathSpec {
  std::string id;
  std::vector<std::string> roads;
};

struct Network {
  std::vector<RoadSpec> roads;
  std::vector<JunctionSpec> junctions;
  std::vector<PathSpec> paths;
};

using PathRoadKey = std::pair<std::string, std::string>;

struct NetworkData {
  std::map<std::string, StepFunction> rho0;    // road id -> initial density (default: empty)
  std::map<PathRoadKey, StepFunction> theta0;  // (path, road) -> initial fraction (default: 0)
  StepFunction source_density = StepFunction::constant(0.0);  // entering density over time
  std::map<std::string, StepFunction> source_theta;           // path id -> entering fraction
};

struct NetworkOptions {
  double cfl = 0.45;
  std::vector<double> output_times;
  bool record_step_fields = false;
  VacuumRule vacuum_rule = VacuumRule::cascade;
  // Per-path override of the vacuum convention. An alternative assignment is
  // only admissible when the fractions it implies still sum to one across
  // the paths of a road (e.g. `one` for a single path, `zero` for the rest).
  std::map<std::string, VacuumRule> path_vacuum_rule;
  double theta_sum_tol = 1e-9;
  double demand_slack = 1e-10;
  // Test hook: bias added to every assembled junction density. Nonzero bias
  // breaks the junction flux identity and, through it, the fraction sums on
  // downstream roads — the two symptoms are equivalent and diagnosed together.
  double debug_rho_bar_bias = 0.0;
};

struct JunctionAudit {
  std::string junction;
  std::vector<double> step_times;
  std::map<std::string, std::vector<double>> demand;         // out road -> per-step flux sum
  std::map<std::string, std::vector<double>> rho_bar;        // out road -> per-step density
  std::map<std::string, std::vector<double>> path_exit_flux; // path -> per-step trace
  int clamp_events = 0;
};

struct NetworkSolution {
  Network net;
  double horizon = 0.0;
  std::vector<double> times;  // recorded instants, shared by all roads
  std::map<std::string, GridSolution> rho;
  std::map<std::string, std::map<std::string, ThetaSolution>> theta;  // path -> road -> m
  std::vector<JunctionAudit> audits;
  std::string source_road;
  std::vector<std::string> destination_roads;
  int theta_clamp_events = 0;
  double max_junction_residual = 0.0;
  double max_sum_to_one = 0.0;
  double mass_balance_error = 0.0;  // relative
  double min_density_seen = 0.0;
  double max_density_seen = 0.0;
};

namespace detail {

struct Topology {
  std::map<std::string, std::size_t> road_ix;
  std::vector<int> downstream;                     // road -> junction index or -1
  std::vector<int> upstream;                       // road -> junction index or -1
  std::size_t source = 0;
  std::vector<std::size_t> order;                  // topological road order
  std::vector<std::vector<std::size_t>> path_roads;      // path -> road indices
  std::vector<std::vector<std::size_t>> paths_through;   // road -> path indices
  std::vector<std::size_t> junction_in;                  // junction -> incoming road
  std::vector<std::vector<std::size_t>> junction_out;    // junction -> outgoing roads
};

inline void check_unique_ids(const Network& net, std::vector<std::string>& bad) {
  std::set<std::string> seen;
  for (const auto& r : net.roads)
    if (!seen.insert(r.id).second) bad.push_back("duplicate road id '" + r.id + "'");
  seen.clear();
  for (const auto& j : net.junctions)
    if (!seen.insert(j.id).second) bad.push_back("duplicate junction id '" + j.id + "'");
  seen.clear();
  for (const auto& p : net.paths)
    if (!seen.insert(p.id).second) bad.push_back("duplicate path id '" + p.id + "'");
}

inline std::pair<Topology, std::vector<std::string>> build_topology(const Network& net) {
  Topology topo;
  std::vector<std::string> bad;
  check_unique_ids(net, bad);
  if (net.roads.empty()) bad.push_back("network has no roads");
  if (net.paths.empty()) bad.push_back("network has no paths");

  for (std::size_t i = 0; i < net.roads.size(); ++i) {
    const auto& r = net.roads[i];
    if (!(r.length > 0.0)) bad.push_back("road '" + r.id + "' needs positive length");
    if (r.cells < 1) bad.push_back("road '" + r.id + "' needs at least one cell");
    topo.road_ix[r.id] = i;
  }
  topo.downstream.assign(net.roads.size(), -1);
  topo.upstream.assign(net.roads.size(), -1);
  topo.paths_through.assign(net.roads.size(), {});
  topo.junction_in.assign(net.junctions.size(), 0);
  topo.junction_out.assign(net.junctions.size(), {});

  const auto road_of = [&](const std::string& id) -> int {
    const auto it = topo.road_ix.find(id);
    return it == topo.road_ix.end() ? -1 : static_cast<int>(it->second);
  };

  for (std::size_t j = 0; j < net.junctions.size(); ++j) {
    const auto& jn = net.junctions[j];
    if (jn.incoming.size() != 1) {
      bad.push_back("non-T junction '" + jn.id + "': needs exactly one incoming road, has " +
                    std::to_string(jn.incoming.size()));
      continue;
    }
    const int in = road_of(jn.incoming.front());
    if (in < 0) {
      bad.push_back("junction '" + jn.id + "' references unknown road '" + jn.incoming.front() +
                    "'");
      continue;
    }
    if (jn.outgoing.empty()) bad.push_back("junction '" + jn.id + "' has no outgoing roads");
    if (topo.downstream[static_cast<std::size_t>(in)] != -1)
      bad.push_back("road '" + jn.incoming.front() + "' feeds more than one junction");
    topo.downstream[static_cast<std::size_t>(in)] = static_cast<int>(j);
    topo.junction_in[j] = static_cast<std::size_t>(in);
    std::set<std::string> outs;
    for (const auto& oid : jn.outgoing) {
      const int o = road_of(oid);
      if (o < 0) {
        bad.push_back("junction '" + jn.id + "' references unknown road '" + oid + "'");
        continue;
      }
      if (!outs.insert(oid).second)
        bad.push_back("junction '" + jn.id + "' lists road '" + oid + "' twice");
      if (oid == jn.incoming.front())
        bad.push_back("junction '" + jn.id + "' loops road '" + oid + "' onto itself");
      if (topo.upstream[static_cast<std::size_t>(o)] != -1)
        bad.push_back("non-T junction: road '" + oid + "' is fed by more than one junction");
      topo.upstream[static_cast<std::size_t>(o)] = static_cast<int>(j);
      topo.junction_out[j].push_back(static_cast<std::size_t>(o));
    }
  }

  // Paths: common source, consecutiveness through junctions, destination end.
  topo.path_roads.assign(net.paths.size(), {});
  std::string source_id;
  for (std::size_t p = 0; p < net.paths.size(); ++p) {
    const auto& path = net.paths[p];
    if (path.roads.empty()) {
      bad.push_back("path '" + path.id + "' is empty");
      continue;
    }
    if (p == 0) source_id = path.roads.front();
    if (path.roads.front() != source_id)
      bad.push_back("path '" + path.id + "' does not start at the shared source road '" +
                    source_id + "'");
    bool ok = true;
    std::set<std::string> dup;
    for (const auto& rid : path.roads) {
      if (road_of(rid) < 0) {
        bad.push_back("path '" + path.id + "' references unknown road '" + rid + "'");
        ok = false;
        break;
      }
      if (!dup.insert(rid).second) {
        bad.push_back("path '" + path.id + "' visits road '" + rid + "' twice");
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    for (std::size_t s = 0; s + 1 < path.roads.size(); ++s) {
      const auto a = static_cast<std::size_t>(road_of(path.roads[s]));
      const auto b = static_cast<std::size_t>(road_of(path.roads[s + 1]));
      const int j = topo.downstream[a];
      const bool linked =
          j >= 0 && std::find(topo.junction_out[static_cast<std::size_t>(j)].begin(),
                              topo.junction_out[static_cast<std::size_t>(j)].end(),
                              b) != topo.junction_out[static_cast<std::size_t>(j)].end();
      if (!linked)
        bad.push_back("path '" + path.id + "': roads '" + path.roads[s] + "' and '" +
                      path.roads[s + 1] + "' are not consecutive through a junction");
    }
    const auto last = static_cast<std::size_t>(road_of(path.roads.back()));
    if (topo.downstream[last] != -1)
      bad.push_back("path '" + path.id + "' ends on road '" + path.roads.back() +
                    "', which continues into a junction");
    for (const auto& rid : path.roads)
      topo.path_roads[p].push_back(static_cast<std::size_t>(road_of(rid)));
  }
  if (!bad.empty()) return {topo, bad};

  topo.source = topo.road_ix.at(source_id);
  if (topo.upstream[topo.source] != -1)
    bad.push_back("source road '" + source_id + "' has an upstream junction");

  for (std::size_t p = 0; p < net.paths.size(); ++p)
    for (std::size_t r : topo.path_roads[p]) topo.paths_through[r].push_back(p);
  for (std::size_t r = 0; r < net.roads.size(); ++r)
    if (topo.paths_through[r].empty())
      bad.push_back("road '" + net.roads[r].id + "' is not used by any path");

  // Breadth-first order from the source; a visited guard catches cycles.
  std::vector<char> seen(net.roads.size(), 0);
  std::vector<std::size_t> queue{topo.source};
  seen[topo.source] = 1;
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const std::size_t r = queue[qi];
    topo.order.push_back(r);
    const int j = topo.downstream[r];
    if (j < 0) continue;
    for (std::size_t o : topo.junction_out[static_cast<std::size_t>(j)]) {
      if (seen[o]) continue;
      seen[o] = 1;
      queue.push_back(o);
    }
  }
  for (std::size_t r = 0; r < net.roads.size(); ++r)
    if (!seen[r] && !topo.paths_through[r].empty())
      bad.push_back("road '" + net.roads[r].id + "' is not reachable from the source road");
  return {topo, bad};
}

}  // namespace detail

inline std::vector<std::string> validate(const Network& net) {
  return detail::build_topology(net).second;
}

inline NetworkSolution solve_network(const Network& net, const FluxModel& m,
                                     const NetworkData& data, double T,
                                     const NetworkOptions& opt = {}) {
  auto [topo, bad] = detail::build_topology(net);
  if (!bad.empty()) {
    std::string msg = "invalid network:";
    for (const auto& b : bad) msg += "\n  - " + b;
    throw ValidationError(msg);
  }
  if (!(T > 0.0)) throw ValidationError("network horizon must be positive");
  if (!(opt.cfl > 0.0 && opt.cfl <= 1.0)) throw ValidationError("cfl must lie in ]0, 1]");

  const double rho_star = m.rho_star();
  const double q_max = m.q_max();
  const double vacuum_eps = 1e-10 * m.rho_max();
  const std::size_t n_roads = net.roads.size();

  // --- data lookup with defaults -------------------------------------------
  const auto rho0_of = [&](const std::string& rid) {
    const auto it = data.rho0.find(rid);
    return it == data.rho0.end() ? StepFunction::constant(0.0) : it->second;
  };
  const auto theta0_of = [&](const std::string& pid, const std::string& rid) {
    const auto it = data.theta0.find({pid, rid});
    return it == data.theta0.end() ? StepFunction::constant(0.0) : it->second;
  };
  const auto check_density_range = [&](const StepFunction& s, const std::string& what) {
    for (double v : s.vs) {
      if (v < -1e-12) throw ValidationError(what + " is negative");
      if (v > rho_star + 1e-12)
        throw RegimeError(what + " leaves the free branch [0, rho_star]");
    }
  };
  const auto check_unit_range = [&](const StepFunction& s, const std::string& what) {
    for (double v : s.vs)
      if (v < -1e-12 || v > 1.0 + 1e-12) throw ValidationError(what + " outside [0, 1]");
  };

  check_density_range(data.source_density, "source density");
  for (const auto& r : net.roads)
    check_density_range(rho0_of(r.id), "initial density on road '" + r.id + "'");
  for (const auto& p : net.paths) {
    const auto it = data.source_theta.find(p.id);
    if (it == data.source_theta.end())
      throw ValidationError("missing entering fraction for path '" + p.id + "'");
    check_unit_range(it->second, "entering fraction for path '" + p.id + "'");
    for (const auto& rid : p.roads)
      check_unit_range(theta0_of(p.id, rid), "initial fraction for path '" + p.id + "'");
  }

  // Entering fractions must sum to one at all times.
  {
    std::vector<double> cuts{0.0};
    for (const auto& p : net.paths)
      for (double t : data.source_theta.at(p.id).xs) cuts.push_back(t);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (double t : cuts) {
      double s = 0.0;
      for (const auto& p : net.paths) s += data.source_theta.at(p.id)(t);
      if (std::abs(s - 1.0) > opt.theta_sum_tol)
        throw ValidationError("entering fractions sum to " + std::to_string(s) + " at t = " +
                              std::to_string(t));
    }
  }

  // --- per-road state -------------------------------------------------------
  struct RoadRun {
    Grid grid;
    std::vector<double> rho;
    std::vector<double> iface;
    double ghost = 0.0;
    std::vector<std::size_t> paths;          // global path indices through this road
    std::vector<std::vector<double>> mcells; // per local path
    std::vector<std::vector<double>> q;      // per local path (scratch)
    std::vector<double> th_in;               // per local path, refreshed every step
    std::vector<VacuumRule> rules;           // per local path
    GridSolution rec;
    std::vector<ThetaSolution> trec;         // aligned with `paths`
  };
  std::vector<RoadRun> runs(n_roads);

  for (std::size_t r = 0; r < n_roads; ++r) {
    RoadRun& run = runs[r];
    const RoadSpec& spec = net.roads[r];
    run.grid = Grid::uniform(0.0, spec.length, spec.cells);
    run.rho = cells_from_step(run.grid, rho0_of(spec.id));
    run.paths = topo.paths_through[r];
    run.th_in.assign(run.paths.size(), 0.0);
    run.rec.grid = run.grid;
    run.rec.cfl = opt.cfl;
    run.rec.horizon = T;
    run.rec.has_step_fields = opt.record_step_fields;
    for (double v : run.rho) run.rec.mass_initial += v;
    run.rec.mass_initial *= run.grid.dx;
    run.rec.value_min_seen = run.rec.value_max_seen = run.rho.empty() ? 0.0 : run.rho[0];
    for (double v : run.rho) {
      run.rec.value_min_seen = std::min(run.rec.value_min_seen, v);
      run.rec.value_max_seen = std::max(run.rec.value_max_seen, v);
    }

    for (std::size_t lp = 0; lp < run.paths.size(); ++lp) {
      const std::string& pid = net.paths[run.paths[lp]].id;
      const auto rule_it = opt.path_vacuum_rule.find(pid);
      run.rules.push_back(rule_it == opt.path_vacuum_rule.end() ? opt.vacuum_rule
                                                                : rule_it->second);
      const StepFunction th0 = theta0_of(pid, spec.id);
      std::vector<double> mc(static_cast<std::size_t>(spec.cells));
      for (int j = 0; j < spec.cells; ++j)
        mc[static_cast<std::size_t>(j)] =
            std::clamp(th0(run.grid.center(j)), 0.0, 1.0) * run.rho[static_cast<std::size_t>(j)];
      run.mcells.push_back(std::move(mc));
      ThetaSolution ts;
      ts.grid = run.grid;
      ts.horizon = T;
      ts.vacuum_eps = vacuum_eps;
      for (double v : run.mcells.back()) ts.mass_initial += v;
      ts.mass_initial *= run.grid.dx;
      run.trec.push_back(std::move(ts));
    }

    // Fractions must split the initial density wherever there is traffic.
    for (int j = 0; j < spec.cells; ++j) {
      if (run.rho[static_cast<std::size_t>(j)] <= vacuum_eps) continue;
      double s = 0.0;
      for (std::size_t lp = 0; lp < run.paths.size(); ++lp)
        s += theta0_of(net.paths[run.paths[lp]].id, spec.id)(run.grid.center(j));
      if (std::abs(s - 1.0) > opt.theta_sum_tol)
        throw ValidationError("initial fractions on road '" + spec.id + "' sum to " +
                              std::to_string(s) + " at x = " + std::to_string(run.grid.center(j)));
    }
  }

  // --- audits ----------------------------------------------------------------
  std::vector<JunctionAudit> audits(net.junctions.size());
  for (std::size_t j = 0; j < net.junctions.size(); ++j) {
    audits[j].junction = net.junctions[j].id;
    for (std::size_t o : topo.junction_out[j]) {
      audits[j].demand[net.roads[o].id] = {};
      audits[j].rho_bar[net.roads[o].id] = {};
    }
    for (std::size_t p : topo.paths_through[topo.junction_in[j]])
      audits[j].path_exit_flux[net.paths[p].id] = {};
  }

  // --- global stepping -------------------------------------------------------
  // One shared step: the free branch bounds every wave and transport speed by
  // the empty-road values, so a single conservative rate serves all roads.
  const double speed_scale =
      std::max({m.max_abs_deriv_on(0.0, rho_star), m.max_velocity_on(0.0, rho_star), 1e-12});
  double dx_min = runs[0].grid.dx;
  for (const auto& run : runs) dx_min = std::min(dx_min, run.grid.dx);
  const double dt_base = opt.cfl * dx_min / speed_scale;

  const std::vector<double> rec = detail::merge_record_times(opt.output_times, T);
  std::size_t rec_i = 0;
  NetworkSolution sol;
  const auto record_levels = [&](double t) {
    sol.times.push_back(t);
    for (auto& run : runs) {
      run.rec.times.push_back(t);
      run.rec.levels.push_back(run.rho);
      for (std::size_t lp = 0; lp < run.paths.size(); ++lp) {
        run.trec[lp].times.push_back(t);
        run.trec[lp].m_levels.push_back(run.mcells[lp]);
      }
    }
  };
  record_levels(rec[rec_i++]);

  double t = 0.0;
  const double t_eps = 1e-12 * std::max(1.0, T);
  int clamp_events = 0;
  while (t < T - t_eps) {
    const double dt = std::min(dt_base, rec[rec_i] - t);

    // Phase A: fluxes and junction assembly, upstream before downstream.
    for (std::size_t r : topo.order) {
      RoadRun& run = runs[r];
      if (topo.upstream[r] == -1) {
        run.ghost = data.source_density(t);
        for (std::size_t lp = 0; lp < run.paths.size(); ++lp)
          run.th_in[lp] =
              std::clamp(data.source_theta.at(net.paths[run.paths[lp]].id)(t), 0.0, 1.0);
      }
      detail::fv_fluxes(m, run.rho, run.ghost, run.iface);
      run.q.resize(run.paths.size());
      for (std::size_t lp = 0; lp < run.paths.size(); ++lp)
        detail::theta_fluxes(run.mcells[lp], run.rho, run.iface, run.th_in[lp], vacuum_eps,
                             run.rules[lp], run.q[lp]);

      // Step bookkeeping.
      run.rec.step_times.push_back(t);
      run.rec.step_dt.push_back(dt);
      run.rec.left_flux_steps.push_back(run.iface.front());
      run.rec.right_flux_steps.push_back(run.iface.back());
      run.rec.inflow_integral += run.iface.front() * dt;
      run.rec.outflow_integral += run.iface.back() * dt;
      if (opt.record_step_fields) {
        run.rec.cell_steps.push_back(run.rho);
        run.rec.iface_steps.push_back(run.iface);
      }
      for (std::size_t lp = 0; lp < run.paths.size(); ++lp) {
        ThetaSolution& ts = run.trec[lp];
        ts.step_times.push_back(t);
        ts.step_dt.push_back(dt);
        ts.entry_flux_steps.push_back(run.q[lp].front());
        ts.exit_flux_steps.push_back(run.q[lp].back());
        ts.inflow_integral += run.q[lp].front() * dt;
        ts.outflow_integral += run.q[lp].back() * dt;
      }

      // Junction assembly for the downstream roads, same time level.
      const int j = topo.downstream[r];
      if (j < 0) continue;
      JunctionAudit& audit = audits[static_cast<std::size_t>(j)];
      if (audit.step_times.empty() || audit.step_times.back() != t) audit.step_times.push_back(t);
      for (std::size_t lp = 0; lp < run.paths.size(); ++lp)
        audit.path_exit_flux[net.paths[run.paths[lp]].id].push_back(run.q[lp].back());

      for (std::size_t o : topo.junction_out[static_cast<std::size_t>(j)]) {
        RoadRun& out = runs[o];
        double demand = 0.0;
        for (std::size_t lp = 0; lp < run.paths.size(); ++lp) {
          const std::size_t p = run.paths[lp];
          const auto& pr = topo.path_roads[p];
          const auto pos = std::find(pr.begin(), pr.end(), r);
          if (pos != pr.end() && pos + 1 != pr.end() && *(pos + 1) == o)
            demand += run.q[lp].back();
        }
        if (demand > q_max + opt.demand_slack)
          throw RegimeError("junction '" + net.junctions[static_cast<std::size_t>(j)].id +
                            "': demand " + std::to_string(demand) + " for road '" +
                            net.roads[o].id + "' exceeds the capacity " + std::to_string(q_max));
        double rho_bar = m.invert_flux_free(std::min(demand, q_max));
        if (opt.debug_rho_bar_bias != 0.0)
          rho_bar = std::clamp(rho_bar + opt.debug_rho_bar_bias, 0.0, rho_star);
        const double g_bar = m.flux(rho_bar);
        out.ghost = rho_bar;
        for (std::size_t lo = 0; lo < out.paths.size(); ++lo) {
          const std::size_t p = out.paths[lo];
          const auto& pr = topo.path_roads[p];
          const auto pos = std::find(pr.begin(), pr.end(), o);
          double qk = 0.0;
          if (pos != pr.begin()) {
            // Locate this path's exit flux on the incoming road.
            const auto lp_it = std::find(run.paths.begin(), run.paths.end(), p);
            if (lp_it != run.paths.end())
              qk = run.q[static_cast<std::size_t>(lp_it - run.paths.begin())].back();
          }
          double th = 0.0;
          if (g_bar > 0.0) {
            const double raw = qk / g_bar;
            if (raw < -1e-12 || raw > 1.0 + 1e-12) ++clamp_events;
            th = std::clamp(raw, 0.0, 1.0);
          }
          out.th_in[lo] = th;
        }
        audit.demand[net.roads[o].id].push_back(demand);
        audit.rho_bar[net.roads[o].id].push_back(rho_bar);
      }
    }

    // Phase B: advance every road with its own mesh ratio.
    for (auto& run : runs) {
      const double lam = dt / run.grid.dx;
      detail::fv_apply(run.rho, run.iface, lam);
      for (std::size_t lp = 0; lp < run.paths.size(); ++lp) {
        detail::fv_apply(run.mcells[lp], run.q[lp], lam);
        ThetaSolution& ts = run.trec[lp];
        for (std::size_t c = 0; c < run.mcells[lp].size(); ++c) {
          ts.m_min_seen = std::min(ts.m_min_seen, run.mcells[lp][c]);
          ts.overrun_max = std::max(ts.overrun_max, run.mcells[lp][c] - run.rho[c]);
        }
      }
      for (double v : run.rho) {
        run.rec.value_min_seen = std::min(run.rec.value_min_seen, v);
        run.rec.value_max_seen = std::max(run.rec.value_max_seen, v);
        if (v < -1e-12 || v > rho_star + 1e-12)
          throw InternalError("density left [0, rho_star] on a road at t = " + std::to_string(t));
      }
    }

    t += dt;
    if (std::abs(t - rec[rec_i]) <= t_eps) {
      record_levels(rec[rec_i]);
      ++rec_i;
    }
  }

  // --- finalize ---------------------------------------------------------------
  sol.net = net;
  sol.horizon = T;
  sol.source_road = net.roads[topo.source].id;
  sol.theta_clamp_events = clamp_events;
  for (std::size_t j = 0; j < net.junctions.size(); ++j)
    audits[j].clamp_events = clamp_events;  // shared counter; per-junction split not needed
  sol.audits = std::move(audits);

  double mass_initial = 0.0, mass_final = 0.0, dest_out = 0.0;
  sol.min_density_seen = runs[0].rec.value_min_seen;
  sol.max_density_seen = runs[0].rec.value_max_seen;
  for (std::size_t r = 0; r < n_roads; ++r) {
    RoadRun& run = runs[r];
    if (opt.record_step_fields) run.rec.cell_steps.push_back(run.rho);
    run.rec.mass_final = 0.0;
    for (double v : run.rho) run.rec.mass_final += v;
    run.rec.mass_final *= run.grid.dx;
    mass_initial += run.rec.mass_initial;
    mass_final += run.rec.mass_final;
    if (topo.downstream[r] == -1) {
      dest_out += run.rec.outflow_integral;
      sol.destination_roads.push_back(net.roads[r].id);
    }
    sol.min_density_seen = std::min(sol.min_density_seen, run.rec.value_min_seen);
    sol.max_density_seen = std::max(sol.max_density_seen, run.rec.value_max_seen);

    for (std::size_t lp = 0; lp < run.paths.size(); ++lp) {
      ThetaSolution& ts = run.trec[lp];
      ts.mass_final = 0.0;
      for (double v : run.mcells[lp]) ts.mass_final += v;
      ts.mass_final *= run.grid.dx;
      sol.theta[net.paths[run.paths[lp]].id][net.roads[r].id] = std::move(ts);
    }
    sol.rho[net.roads[r].id] = std::move(run.rec);
  }
  const double source_in = sol.rho.at(sol.source_road).inflow_integral;
  sol.mass_balance_error = std::abs(mass_final - mass_initial - source_in + dest_out) /
                           std::max(1.0, mass_initial + source_in);

  // Junction flux identity: entering flux of each outgoing road vs demand.
  for (const auto& audit : sol.audits)
    for (const auto& [rid, dem] : audit.demand) {
      const auto& left = sol.rho.at(rid).left_flux_steps;
      for (std::size_t i = 0; i < dem.size() && i < left.size(); ++i)
        sol.max_junction_residual =
            std::max(sol.max_junction_residual, std::abs(dem[i] - left[i]));
    }

  // Fraction sums against the density, on every recorded level.
  for (std::size_t r = 0; r < n_roads; ++r) {
    const auto& rid = net.roads[r].id;
    const auto& rs = sol.rho.at(rid);
    for (std::size_t lev = 0; lev < rs.levels.size(); ++lev)
      for (std::size_t c = 0; c < rs.levels[lev].size(); ++c) {
        double s = 0.0;
        for (std::size_t p : topo.paths_through[r])
          s += sol.theta.at(net.paths[p].id).at(rid).m_levels[lev][c];
        sol.max_sum_to_one = std::max(sol.max_sum_to_one, std::abs(s - rs.levels[lev][c]));
      }
  }
  return sol;
}

struct JunctionResidual {
  std::vector<double> times;
  std::map<std::string, std::vector<double>> by_out_road;
  double max_abs = 0.0;
};

inline JunctionResidual junction_flux_residual(const NetworkSolution& sol,
                                               const std::string& junction) {
  for (const auto& audit : sol.audits) {
    if (audit.junction != junction) continue;
    JunctionResidual res;
    res.times = audit.step_times;
    for (const auto& [rid, dem] : audit.demand) {
      const auto& left = sol.rho.at(rid).left_flux_steps;
      std::vector<double> d(dem.size());
      for (std::size_t i = 0; i < dem.size(); ++i) {
        d[i] = std::abs(dem[i] - (i < left.size() ? left[i] : 0.0));
        res.max_abs = std::max(res.max_abs, d[i]);
      }
      res.by_out_road[rid] = std::move(d);
    }
    return res;
  }
  throw ValidationError("unknown junction '" + junction + "'");
}

struct SumToOneField {
  std::vector<double> times;
  std::vector<std::vector<double>> residual;  // per time, per cell
  double max_abs = 0.0;
};

inline SumToOneField sum_to_one_residual(const NetworkSolution& sol, const std::string& road) {
  const auto it = sol.rho.find(road);
  if (it == sol.rho.end()) throw ValidationError("unknown road '" + road + "'");
  const GridSolution& rs = it->second;
  SumToOneField out;
  out.times = rs.times;
  out.residual.assign(rs.levels.size(),
                      std::vector<double>(rs.levels.empty() ? 0 : rs.levels[0].size(), 0.0));
  for (std::size_t lev = 0; lev < rs.levels.size(); ++lev) {
    for (std::size_t c = 0; c < rs.levels[lev].size(); ++c) {
      double s = 0.0;
      for (const auto& [pid, by_road] : sol.theta) {
        const auto rit = by_road.find(road);
        if (rit != by_road.end()) s += rit->second.m_levels[lev][c];
      }
      out.residual[lev][c] = s - rs.levels[lev][c];
      out.max_abs = std::max(out.max_abs, std::abs(out.residual[lev][c]));
    }
  }
  return out;
}

}  // namespace lwrnet
