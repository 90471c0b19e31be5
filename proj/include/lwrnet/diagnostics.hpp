#pragma once

// Total-variation analytics and the regularity experiment drivers: trace TV
// under refinement, data-perturbation stability, and spatial-BV propagation
// through junctions. Everything here is a pure driver over solver outputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lwrnet/errors.hpp"
#include "lwrnet/godunov.hpp"
#include "lwrnet/network.hpp"
#include "lwrnet/step_function.hpp"

namespace lwrnet {

// Variation of an ordered sample set: the partition is the sample set itself,
// so this is a lower bound for the variation of the sampled function.
inline double total_variation(const std::vector<double>& samples) {
  if (samples.empty()) throw ValidationError("total_variation: need at least one sample");
  double tv = 0.0;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) tv += std::abs(samples[i + 1] - samples[i]);
  return tv;
}

inline double positive_variation(const std::vector<double>& samples) {
  if (samples.empty()) throw ValidationError("positive_variation: need at least one sample");
  double pv = 0.0;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i)
    pv += std::max(samples[i + 1] - samples[i], 0.0);
  return pv;
}

struct TVReport {
  double x = 0.0;               // probe location the series was sampled at
  std::vector<double> samples;  // trace values in time order
  double tv = 0.0;
  double positive_var = 0.0;
  std::size_t resolution = 0;  // number of samples behind the estimate

  // tv splits as positive + negative variation; the difference of the two
  // equals end - start, which callers can use as a consistency identity.
  double negative_var() const { return tv - positive_var; }
};

inline TVReport make_tv_report(double x, std::vector<double> samples) {
  TVReport r;
  r.x = x;
  r.tv = total_variation(samples);
  r.positive_var = positive_variation(samples);
  r.resolution = samples.size();
  r.samples = std::move(samples);
  return r;
}

// ---------------------------------------------------------------------------
// Trace TV under grid refinement.
//
// For a convex or concave flux the composed trace w = f(u(.,x)) has variation
// controlled by the data, uniformly in the grid; the raw density trace does
// not (a rarefaction through a probe sweeps a whole interval of values). The
// table reports TV per position per refinement level so callers can assert
// the spread stays small. Traces are sampled at every solver step, and the
// sample count is reported next to each value.
// ---------------------------------------------------------------------------

struct TraceTvTable {
  std::vector<double> positions;
  std::vector<int> cells;                      // one entry per refinement level
  std::vector<std::vector<TVReport>> reports;  // [level][position]
  std::vector<double> mass_balance;            // conservation defect per level
  bool through_flux = true;                    // series mapped through f or raw u
  double tv_datum = 0.0;                       // variation of u0
  double tv_flux_datum = 0.0;                  // variation of f(u0)

  double max_mass_balance() const {
    double hi = 0.0;
    for (double e : mass_balance) hi = std::max(hi, e);
    return hi;
  }

  // max/min of the TV across levels at one position; ~1 means the estimate
  // has stabilized under refinement.
  double spread(std::size_t pos) const {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& level : reports) {
      lo = std::min(lo, level.at(pos).tv);
      hi = std::max(hi, level.at(pos).tv);
    }
    return hi / std::max(lo, 1e-300);
  }

  double max_tv() const {
    double hi = 0.0;
    for (const auto& level : reports)
      for (const TVReport& r : level) hi = std::max(hi, r.tv);
    return hi;
  }
};

template <class Flux>
TraceTvTable verify_flux_trace_tv(const Flux& f, double alpha, double beta,
                                  const StepFunction& u0, double T,
                                  const std::vector<double>& xs,
                                  const std::vector<int>& cell_counts, bool through_flux = true,
                                  double cfl = 0.45) {
  if (xs.empty()) throw ValidationError("trace TV experiment needs at least one probe position");
  if (cell_counts.empty())
    throw ValidationError("trace TV experiment needs at least one refinement level");
  for (double x : xs)
    if (!(alpha < x && x < beta))
      throw ValidationError("probe position " + std::to_string(x) + " outside the domain");

  TraceTvTable table;
  table.positions = xs;
  table.through_flux = through_flux;
  table.tv_datum = total_variation(u0);
  {
    std::vector<double> w0 = u0.vs;
    for (double& v : w0) v = f.value(v);
    table.tv_flux_datum = total_variation(w0);
  }

  for (int n : cell_counts) {
    if (n < 1) throw ValidationError("refinement level needs at least one cell");
    const Grid g = Grid::uniform(alpha, beta, n);
    FvOptions opt;
    opt.cfl = cfl;
    opt.record_step_fields = false;  // probes are recorded regardless
    opt.probe_positions = xs;
    const GridSolution sol = solve_cauchy_fv(f, g, cells_from_step(g, u0), T, opt);

    std::vector<TVReport> level;
    level.reserve(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
      std::vector<double> series = sol.probe_steps[k];
      if (through_flux)
        for (double& v : series) v = f.value(v);
      level.push_back(make_tv_report(xs[k], std::move(series)));
    }
    table.cells.push_back(n);
    table.reports.push_back(std::move(level));
    table.mass_balance.push_back(std::abs(sol.mass_final - sol.mass_initial -
                                          sol.inflow_integral + sol.outflow_integral));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Network experiment plumbing.
// ---------------------------------------------------------------------------

inline Network refine_cells(Network net, int multiplier) {
  if (multiplier < 1) throw ValidationError("cell multiplier must be at least 1");
  for (RoadSpec& r : net.roads) r.cells *= multiplier;
  return net;
}

namespace detail {

// L1 distance of the final-time density fields of two runs on equal grids.
inline double l1_final_rho(const NetworkSolution& a, const NetworkSolution& b) {
  double acc = 0.0;
  for (const auto& [road, ga] : a.rho) {
    const GridSolution& gb = b.rho.at(road);
    const std::vector<double>& va = ga.levels.back();
    const std::vector<double>& vb = gb.levels.back();
    for (std::size_t j = 0; j < va.size(); ++j) acc += std::abs(va[j] - vb[j]) * ga.grid.dx;
  }
  return acc;
}

inline double l1_final_m(const NetworkSolution& a, const NetworkSolution& b) {
  double acc = 0.0;
  for (const auto& [path, roads] : a.theta) {
    for (const auto& [road, ta] : roads) {
      const ThetaSolution& tb = b.theta.at(path).at(road);
      const std::vector<double>& va = ta.m_levels.back();
      const std::vector<double>& vb = tb.m_levels.back();
      const double dx = a.rho.at(road).grid.dx;
      for (std::size_t j = 0; j < va.size(); ++j) acc += std::abs(va[j] - vb[j]) * dx;
    }
  }
  return acc;
}

// Same distances against a run with exactly doubled cells, compared through
// the pairwise mean of the fine cells (exact projection for a 2:1 ratio).
inline double l1_final_rho_halved(const NetworkSolution& coarse, const NetworkSolution& fine) {
  double acc = 0.0;
  for (const auto& [road, gc] : coarse.rho) {
    const std::vector<double>& vc = gc.levels.back();
    const std::vector<double>& vf = fine.rho.at(road).levels.back();
    if (vf.size() != 2 * vc.size())
      throw ValidationError("self-error comparison needs exactly doubled cells");
    for (std::size_t j = 0; j < vc.size(); ++j)
      acc += std::abs(vc[j] - 0.5 * (vf[2 * j] + vf[2 * j + 1])) * gc.grid.dx;
  }
  return acc;
}

inline double l1_final_m_halved(const NetworkSolution& coarse, const NetworkSolution& fine) {
  double acc = 0.0;
  for (const auto& [path, roads] : coarse.theta) {
    for (const auto& [road, tc] : roads) {
      const std::vector<double>& vc = tc.m_levels.back();
      const std::vector<double>& vf = fine.theta.at(path).at(road).m_levels.back();
      if (vf.size() != 2 * vc.size())
        throw ValidationError("self-error comparison needs exactly doubled cells");
      const double dx = coarse.rho.at(road).grid.dx;
      for (std::size_t j = 0; j < vc.size(); ++j)
        acc += std::abs(vc[j] - 0.5 * (vf[2 * j] + vf[2 * j + 1])) * dx;
    }
  }
  return acc;
}

inline StepFunction shift_values(StepFunction s, double delta) {
  for (double& v : s.vs) v += delta;
  s.merge_equal();
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stability of the network solve under entering-fraction perturbations.
//
// The entering fraction of `bump_path` is shifted by +delta and the shift is
// compensated on `balance_path` so the fractions still sum to one. Distances
// are L1 over all roads (density) and all path/road pairs (fraction mass) at
// the final time. The scheme's own resolution error - the distance between
// the base run and the same run with doubled cells - is reported so callers
// can tell "converged onto the base run" from "converged onto the scheme".
// ---------------------------------------------------------------------------

struct StabilityRow {
  double delta = 0.0;
  double dist_rho = 0.0;
  double dist_m = 0.0;
};

struct StabilityTable {
  std::vector<StabilityRow> rows;
  double self_error_rho = 0.0;
  double self_error_m = 0.0;
  // Worst residuals and density extrema over every run the experiment performed.
  double max_junction_residual = 0.0;
  double max_sum_to_one = 0.0;
  double mass_balance_error = 0.0;
  double min_density_seen = std::numeric_limits<double>::infinity();
  double max_density_seen = -std::numeric_limits<double>::infinity();
};

inline StabilityTable stability_experiment(const Network& net, const FluxModel& m,
                                           const NetworkData& base, const std::string& bump_path,
                                           const std::string& balance_path,
                                           const std::vector<double>& deltas, double T,
                                           const NetworkOptions& opt = {}) {
  if (bump_path == balance_path)
    throw ValidationError("stability experiment needs two distinct paths to trade fraction");
  if (!base.source_theta.count(bump_path) || !base.source_theta.count(balance_path))
    throw ValidationError("stability experiment: paths lack entering-fraction data");

  const NetworkSolution base_run = solve_network(net, m, base, T, opt);

  StabilityTable table;
  const auto absorb = [&table](const NetworkSolution& s) {
    table.max_junction_residual = std::max(table.max_junction_residual, s.max_junction_residual);
    table.max_sum_to_one = std::max(table.max_sum_to_one, s.max_sum_to_one);
    table.mass_balance_error = std::max(table.mass_balance_error, s.mass_balance_error);
    table.min_density_seen = std::min(table.min_density_seen, s.min_density_seen);
    table.max_density_seen = std::max(table.max_density_seen, s.max_density_seen);
  };
  absorb(base_run);
  for (double delta : deltas) {
    NetworkData data = base;
    data.source_theta[bump_path] = detail::shift_values(data.source_theta.at(bump_path), delta);
    data.source_theta[balance_path] =
        detail::shift_values(data.source_theta.at(balance_path), -delta);
    const NetworkSolution run = solve_network(net, m, data, T, opt);
    absorb(run);
    table.rows.push_back(
        {delta, detail::l1_final_rho(base_run, run), detail::l1_final_m(base_run, run)});
  }

  const NetworkSolution fine = solve_network(refine_cells(net, 2), m, base, T, opt);
  absorb(fine);
  table.self_error_rho = detail::l1_final_rho_halved(base_run, fine);
  table.self_error_m = detail::l1_final_m_halved(base_run, fine);
  return table;
}

// ---------------------------------------------------------------------------
// Spatial BV propagation through the network.
//
// For data bounded away from vacuum and from the critical density, both the
// densities and the fractions stay BV in space; the experiment reports the
// spatial TV of rho per road and of theta per path/road (restricted to cells
// with rho above the vacuum threshold) at each recorded time, across a set
// of refinement levels. The theorem-level claim is boundedness uniform in
// refinement, which callers assert on max_rho_tv / max_theta_tv.
// ---------------------------------------------------------------------------

struct TvSeries {
  std::vector<double> times;
  std::vector<double> tv;
  double max_tv = 0.0;
};

struct BvLevel {
  int multiplier = 1;
  std::map<std::string, TvSeries> rho_tv;                           // road -> series
  std::map<std::string, std::map<std::string, TvSeries>> theta_tv;  // path -> road -> series
  double max_rho_tv = 0.0;
  double max_theta_tv = 0.0;
};

struct BvTable {
  std::vector<BvLevel> levels;
  double vacuum_eps = 0.0;
  // Worst residuals and density extrema over the level runs.
  double max_junction_residual = 0.0;
  double max_sum_to_one = 0.0;
  double mass_balance_error = 0.0;
  double min_density_seen = std::numeric_limits<double>::infinity();
  double max_density_seen = -std::numeric_limits<double>::infinity();
};

inline BvTable bv_propagation_experiment(const Network& net, const FluxModel& m,
                                         const NetworkData& data, double T,
                                         const std::vector<int>& multipliers,
                                         const NetworkOptions& opt_in = {}) {
  if (multipliers.empty()) throw ValidationError("BV experiment needs at least one refinement level");
  NetworkOptions opt = opt_in;
  if (opt.output_times.empty()) {
    // Dense default sampling: the TV-in-time picture should not depend on
    // the caller remembering to ask for output instants.
    for (int i = 1; i < 120; ++i) opt.output_times.push_back(T * i / 120.0);
  }
  opt.record_step_fields = false;

  BvTable table;
  table.vacuum_eps = 1e-10 * m.rho_max();  // matches the network solver's threshold

  for (int mult : multipliers) {
    const NetworkSolution sol = solve_network(refine_cells(net, mult), m, data, T, opt);
    table.max_junction_residual = std::max(table.max_junction_residual, sol.max_junction_residual);
    table.max_sum_to_one = std::max(table.max_sum_to_one, sol.max_sum_to_one);
    table.mass_balance_error = std::max(table.mass_balance_error, sol.mass_balance_error);
    table.min_density_seen = std::min(table.min_density_seen, sol.min_density_seen);
    table.max_density_seen = std::max(table.max_density_seen, sol.max_density_seen);
    BvLevel level;
    level.multiplier = mult;

    for (const auto& [road, gs] : sol.rho) {
      TvSeries series;
      series.times = gs.times;
      for (const std::vector<double>& cells : gs.levels) {
        const double tv = total_variation(cells);
        series.tv.push_back(tv);
        series.max_tv = std::max(series.max_tv, tv);
      }
      level.max_rho_tv = std::max(level.max_rho_tv, series.max_tv);
      level.rho_tv.emplace(road, std::move(series));
    }

    for (const auto& [path, roads] : sol.theta) {
      for (const auto& [road, ts] : roads) {
        const GridSolution& gs = sol.rho.at(road);
        TvSeries series;
        series.times = ts.times;
        for (std::size_t i = 0; i < ts.m_levels.size(); ++i) {
          // Fractions are only defined where there is traffic; vacuum cells
          // are skipped rather than given a conventional value.
          std::vector<double> theta;
          const std::vector<double>& rho = gs.levels[i];
          const std::vector<double>& mm = ts.m_levels[i];
          for (std::size_t j = 0; j < mm.size(); ++j)
            if (rho[j] > table.vacuum_eps) theta.push_back(mm[j] / rho[j]);
          const double tv = theta.size() < 2 ? 0.0 : total_variation(theta);
          series.tv.push_back(tv);
          series.max_tv = std::max(series.max_tv, tv);
        }
        level.max_theta_tv = std::max(level.max_theta_tv, series.max_tv);
        level.theta_tv[path].emplace(road, std::move(series));
      }
    }
    table.levels.push_back(std::move(level));
  }
  return table;
}

}  // namespace lwrnet
