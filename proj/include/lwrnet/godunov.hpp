#pragma once

// First-order Godunov scheme driven by exact interval extrema of the flux:
// the interface flux between states a (left) and b (right) is the minimum of
// the flux over [a, b] when a <= b and the maximum over [b, a] otherwise.
// The left boundary consumes inflow data through a ghost cell (exact for
// fluxes that are nondecreasing over the attained range), the right boundary
// extrapolates (free outflow).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lwrnet/errors.hpp"
#include "lwrnet/step_function.hpp"
#include "lwrnet/trace_series.hpp"

namespace lwrnet {

struct Grid {
  double alpha = 0.0;
  double beta = 1.0;
  int n_cells = 0;
  double dx = 0.0;

  static Grid uniform(double alpha, double beta, int n_cells) {
    if (!(alpha < beta)) throw ValidationError("grid needs alpha < beta");
    if (n_cells < 1) throw ValidationError("grid needs at least one cell");
    Grid g;
    g.alpha = alpha;
    g.beta = beta;
    g.n_cells = n_cells;
    g.dx = (beta - alpha) / n_cells;
    return g;
  }

  double center(int j) const { return alpha + (j + 0.5) * dx; }
  double face(int j) const { return alpha + j * dx; }

  int cell_of(double x) const {
    int j = static_cast<int>(std::floor((x - alpha) / dx));
    return std::max(0, std::min(j, n_cells - 1));
  }
};

template <class Flux>
double godunov_flux(const Flux& f, double a, double b) {
  return a <= b ? f.min_on(a, b) : f.max_on(b, a);
}

// dt = cfl * dx / max(|g'| over the attained range, floor 1e-12); the floor
// keeps the step finite when the data sit exactly at a critical point.
template <class Flux>
double cfl_dt(const std::vector<double>& state, const Flux& f, double dx, double cfl) {
  if (state.empty()) throw ValidationError("cfl_dt: empty state");
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ValidationError("cfl must lie in ]0, 1]");
  const auto [lo, hi] = std::minmax_element(state.begin(), state.end());
  return cfl * dx / std::max(f.max_abs_deriv_on(*lo, *hi), 1e-12);
}

namespace detail {

// Step bound used by the driver. On top of max|g'| (density waves) this
// respects the transport speed v = g/rho when the flux exposes one, so that
// fraction fields advanced on this drive keep 0 <= m <= rho. Near the
// critical density v exceeds |g'| by an unbounded factor, so stepping on
// |g'| alone would let the upwind fraction update overshoot.
template <class Flux>
double drive_time_step(const Flux& f, double lo, double hi, double dx, double cfl) {
  double speed = f.max_abs_deriv_on(lo, hi);
  if constexpr (requires(const Flux& m) { m.max_velocity_on(lo, hi); })
    speed = std::max(speed, f.max_velocity_on(lo, hi));
  return cfl * dx / std::max(speed, 1e-12);
}

}  // namespace detail

struct FvOptions {
  double cfl = 0.45;
  std::vector<double> output_times;  // t=0 and t=T are always recorded
  bool record_step_fields = true;    // keep per-step cells/fluxes (transport drive)
  std::vector<double> probe_positions;
  // Data outside this closed interval are rejected up front (e.g. the free
  // branch [0, rho_star] for road runs). Unset: no restriction.
  std::optional<std::pair<double, double>> admissible_range;
  // Lower bound on the wave-speed scale for the time step. Coupled network
  // runs step every road against the full free-branch bound; passing the
  // same value here makes a standalone run reproduce a network road exactly.
  double min_speed_scale = 0.0;
};

struct GridSolution {
  Grid grid;
  double cfl = 0.45;
  double horizon = 0.0;

  std::vector<double> times;                 // recorded instants (t=0 first)
  std::vector<std::vector<double>> levels;   // cell averages at `times`

  std::vector<double> step_times;            // start of each step
  std::vector<double> step_dt;
  std::vector<double> left_flux_steps;       // entering interface flux per step
  std::vector<double> right_flux_steps;      // exiting interface flux per step

  bool has_step_fields = false;
  std::vector<std::vector<double>> cell_steps;   // cells at each step start + final state
  std::vector<std::vector<double>> iface_steps;  // n_cells+1 interface fluxes per step

  std::vector<double> probe_positions;
  std::vector<std::vector<double>> probe_steps;  // per probe: value at step starts + final

  double value_min_seen = std::numeric_limits<double>::infinity();
  double value_max_seen = -std::numeric_limits<double>::infinity();
  double mass_initial = 0.0;
  double mass_final = 0.0;
  double inflow_integral = 0.0;
  double outflow_integral = 0.0;

  TraceSeries left_flux_trace() const { return step_trace(left_flux_steps, TraceSide::alpha_plus); }
  TraceSeries right_flux_trace() const { return step_trace(right_flux_steps, TraceSide::beta_minus); }

  TraceSeries probe_trace(std::size_t k) const {
    if (k >= probe_steps.size()) throw ValidationError("probe index out of range");
    const std::vector<double>& vals = probe_steps[k];
    TraceSeries s;
    for (std::size_t i = 0; i < step_times.size(); ++i) {
      if (!s.values.empty() && s.values.back() == vals[i]) continue;
      s.times.push_back(step_times[i]);
      s.values.push_back(vals[i]);
    }
    // The final state holds at the horizon only; append it when it differs.
    if (!s.values.empty() && vals.back() != s.values.back() && step_times.back() < horizon) {
      s.times.push_back(horizon);
      s.values.push_back(vals.back());
    }
    if (s.times.empty()) {
      s.times.push_back(0.0);
      s.values.push_back(vals.back());
    }
    s.horizon = horizon;
    s.kind = TraceKind::strong;
    s.side = TraceSide::interior;
    return s;
  }

  const std::vector<double>& level_at(double t) const {
    for (std::size_t i = times.size(); i-- > 0;)
      if (std::abs(times[i] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return levels[i];
    throw ValidationError("no level recorded at t = " + std::to_string(t));
  }

private:
  TraceSeries step_trace(const std::vector<double>& per_step, TraceSide side) const {
    TraceSeries s;
    if (step_times.empty()) {
      s.times.push_back(0.0);
      s.values.push_back(0.0);
    } else {
      s.times.reserve(per_step.size());
      s.values.reserve(per_step.size());
      for (std::size_t i = 0; i < per_step.size(); ++i) {
        if (!s.values.empty() && s.values.back() == per_step[i]) continue;
        s.times.push_back(step_times[i]);
        s.values.push_back(per_step[i]);
      }
    }
    s.horizon = horizon;
    s.kind = TraceKind::strong;
    s.side = side;
    return s;
  }
};

// Exact cell averages. Cells without a datum jump inside copy the piece
// value verbatim (no quadrature noise), so constant stretches stay bitwise
// constant; only straddling cells average.
inline std::vector<double> cells_from_step(const Grid& g, const StepFunction& u0) {
  std::vector<double> cells(static_cast<std::size_t>(g.n_cells));
  std::size_t cut = 0;
  for (int j = 0; j < g.n_cells; ++j) {
    const double xl = g.face(j), xr = g.face(j + 1);
    while (cut < u0.xs.size() && u0.xs[cut] <= xl) ++cut;
    if (cut >= u0.xs.size() || u0.xs[cut] >= xr)
      cells[static_cast<std::size_t>(j)] = u0(0.5 * (xl + xr));
    else
      cells[static_cast<std::size_t>(j)] = u0.integral(xl, xr) / (xr - xl);
  }
  return cells;
}

template <class F>
std::vector<double> cells_from_fn(const Grid& g, F&& fn) {
  std::vector<double> cells(static_cast<std::size_t>(g.n_cells));
  for (int j = 0; j < g.n_cells; ++j) cells[static_cast<std::size_t>(j)] = fn(g.center(j));
  return cells;
}

namespace detail {

template <class Flux>
void fv_fluxes(const Flux& f, const std::vector<double>& cells, double ghost_left,
               std::vector<double>& iface) {
  const std::size_t n = cells.size();
  iface.resize(n + 1);
  iface[0] = godunov_flux(f, ghost_left, cells[0]);
  for (std::size_t j = 1; j < n; ++j) iface[j] = godunov_flux(f, cells[j - 1], cells[j]);
  iface[n] = godunov_flux(f, cells[n - 1], cells[n - 1]);
}

inline void fv_apply(std::vector<double>& cells, const std::vector<double>& iface, double lam) {
  for (std::size_t j = 0; j < cells.size(); ++j) cells[j] -= lam * (iface[j + 1] - iface[j]);
}

inline std::vector<double> merge_record_times(const std::vector<double>& user, double T) {
  std::vector<double> rec{0.0};
  for (double t : user)
    if (t > 0.0 && t < T) rec.push_back(t);
  rec.push_back(T);
  std::sort(rec.begin(), rec.end());
  rec.erase(std::unique(rec.begin(), rec.end(),
                        [](double a, double b) { return std::abs(a - b) <= 1e-14; }),
            rec.end());
  return rec;
}

// Shared driver. `inflow` empty means extrapolation on the left as well.
template <class Flux>
GridSolution run_fv(const Flux& f, const Grid& grid, std::vector<double> cells,
                    const std::optional<StepFunction>& inflow, double T, const FvOptions& opt) {
  if (!(T > 0.0)) throw ValidationError("finite-volume horizon must be positive");
  if (static_cast<int>(cells.size()) != grid.n_cells)
    throw ValidationError("cell vector does not match the grid");
  if (!(opt.cfl > 0.0 && opt.cfl <= 1.0)) throw ValidationError("cfl must lie in ]0, 1]");

  const auto in_range = [&](double v) {
    return !opt.admissible_range ||
           (v >= opt.admissible_range->first - 1e-12 && v <= opt.admissible_range->second + 1e-12);
  };
  for (double v : cells)
    if (!in_range(v))
      throw RegimeError("initial datum leaves the admissible range [" +
                        std::to_string(opt.admissible_range->first) + ", " +
                        std::to_string(opt.admissible_range->second) + "]");
  if (inflow)
    for (double v : inflow->vs)
      if (!in_range(v)) throw RegimeError("inflow datum leaves the admissible range");

  GridSolution sol;
  sol.grid = grid;
  sol.cfl = opt.cfl;
  sol.horizon = T;
  sol.has_step_fields = opt.record_step_fields;
  sol.probe_positions = opt.probe_positions;
  sol.probe_steps.resize(opt.probe_positions.size());
  std::vector<int> probe_cells;
  probe_cells.reserve(opt.probe_positions.size());
  for (double x : opt.probe_positions) probe_cells.push_back(grid.cell_of(x));

  const std::vector<double> rec = merge_record_times(opt.output_times, T);
  std::size_t rec_i = 0;
  const auto record_level = [&](double t) {
    sol.times.push_back(t);
    sol.levels.push_back(cells);
  };
  record_level(rec[rec_i++]);

  for (double v : cells) sol.mass_initial += v;
  sol.mass_initial *= grid.dx;

  std::vector<double> iface;
  double t = 0.0;
  const double t_eps = 1e-12 * std::max(1.0, T);
  while (t < T - t_eps) {
    double lo = cells[0], hi = cells[0];
    for (double v : cells) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double ghost_left = inflow ? (*inflow)(t) : cells[0];
    lo = std::min(lo, ghost_left);
    hi = std::max(hi, ghost_left);

    double dt = detail::drive_time_step(f, lo, hi, grid.dx, opt.cfl);
    if (opt.min_speed_scale > 0.0) dt = std::min(dt, opt.cfl * grid.dx / opt.min_speed_scale);
    dt = std::min(dt, rec[rec_i] - t);

    detail::fv_fluxes(f, cells, ghost_left, iface);

    sol.step_times.push_back(t);
    sol.step_dt.push_back(dt);
    sol.left_flux_steps.push_back(iface.front());
    sol.right_flux_steps.push_back(iface.back());
    if (opt.record_step_fields) {
      sol.cell_steps.push_back(cells);
      sol.iface_steps.push_back(iface);
    }
    for (std::size_t k = 0; k < probe_cells.size(); ++k)
      sol.probe_steps[k].push_back(cells[static_cast<std::size_t>(probe_cells[k])]);

    sol.inflow_integral += iface.front() * dt;
    sol.outflow_integral += iface.back() * dt;

    detail::fv_apply(cells, iface, dt / grid.dx);
    t += dt;

    for (double v : cells) {
      sol.value_min_seen = std::min(sol.value_min_seen, v);
      sol.value_max_seen = std::max(sol.value_max_seen, v);
      if (!in_range(v))
        throw InternalError("scheme left the admissible range at t = " + std::to_string(t));
    }
    if (std::abs(t - rec[rec_i]) <= 1e-12 * std::max(1.0, T)) {
      record_level(rec[rec_i]);
      ++rec_i;
    }
  }
  if (opt.record_step_fields) sol.cell_steps.push_back(cells);  // final state
  for (std::size_t k = 0; k < probe_cells.size(); ++k)
    sol.probe_steps[k].push_back(cells[static_cast<std::size_t>(probe_cells[k])]);
  if (std::abs(sol.times.back() - T) > 1e-12 * std::max(1.0, T)) record_level(T);

  sol.mass_final = 0.0;
  for (double v : cells) sol.mass_final += v;
  sol.mass_final *= grid.dx;
  return sol;
}

}  // namespace detail

// Road problem on [alpha, beta]: inflow data on the left, free outflow on the
// right. Data must stay on the increasing flux branch for the ghost-cell
// boundary treatment to attain the inflow exactly.
template <class Flux>
GridSolution solve_ibvp_fv(const Flux& f, const Grid& grid, const StepFunction& rho0,
                           const StepFunction& inflow, double T, const FvOptions& opt = {}) {
  return detail::run_fv(f, grid, cells_from_step(grid, rho0), inflow, T, opt);
}

// Whole-line surrogate: both boundaries extrapolate. Callers are responsible
// for a domain large enough that no wave reaches the edges before T.
template <class Flux>
GridSolution solve_cauchy_fv(const Flux& f, const Grid& grid, std::vector<double> cells0, double T,
                             const FvOptions& opt = {}) {
  return detail::run_fv(f, grid, std::move(cells0), std::nullopt, T, opt);
}

}  // namespace lwrnet
