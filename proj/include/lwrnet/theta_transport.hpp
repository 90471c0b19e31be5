#pragma once

// Upwind transport of path fractions on top of a recorded density run.
// The conserved unknown is m = rho * theta; the scheme moves m with the
// density interface fluxes weighted by the upwind fraction, which keeps
// 0 <= m <= rho cell by cell without any limiter.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lwrnet/errors.hpp"
#include "lwrnet/godunov.hpp"
#include "lwrnet/step_function.hpp"
#include "lwrnet/trace_series.hpp"

namespace lwrnet {

// Fraction read off a cell; empty on vacuum, where theta is not determined by m.
inline std::optional<double> theta_of(double m, double rho, double vacuum_eps) {
  if (rho <= vacuum_eps) return std::nullopt;
  return std::clamp(m / rho, 0.0, 1.0);
}

// What fraction a vacuum cell passes downstream. `cascade` repeats the last
// fraction seen upstream (entry value before any filled cell); the constant
// rules exist to demonstrate that the choice never shows up in m.
enum class VacuumRule { cascade, zero, one };

struct ThetaOptions {
  VacuumRule vacuum_rule = VacuumRule::cascade;
  double vacuum_eps_factor = 1e-10;  // vacuum_eps = factor * scale of the drive
  // Absolute override; network runs fix 1e-10 * rho_max so that a standalone
  // road run can reproduce a coupled one exactly.
  std::optional<double> vacuum_eps;
};

struct ThetaSolution {
  Grid grid;
  double horizon = 0.0;
  double vacuum_eps = 0.0;

  std::vector<double> times;                  // matches the drive's recorded times
  std::vector<std::vector<double>> m_levels;  // conserved fraction-mass at `times`

  std::vector<double> step_times;
  std::vector<double> step_dt;
  std::vector<double> entry_flux_steps;  // theta-weighted flux through alpha
  std::vector<double> exit_flux_steps;   // theta-weighted flux through beta

  double m_min_seen = 0.0;        // most negative m encountered (>= -rounding)
  double overrun_max = 0.0;       // largest positive excess of m over rho
  double mass_initial = 0.0;
  double mass_final = 0.0;
  double inflow_integral = 0.0;
  double outflow_integral = 0.0;

  TraceSeries entry_flux_trace() const { return step_trace(entry_flux_steps, TraceSide::alpha_plus); }
  TraceSeries exit_flux_trace() const { return step_trace(exit_flux_steps, TraceSide::beta_minus); }

private:
  TraceSeries step_trace(const std::vector<double>& per_step, TraceSide side) const {
    TraceSeries s;
    if (step_times.empty()) {
      s.times.push_back(0.0);
      s.values.push_back(0.0);
    } else {
      for (std::size_t i = 0; i < per_step.size(); ++i) {
        if (!s.values.empty() && s.values.back() == per_step[i]) continue;
        s.times.push_back(step_times[i]);
        s.values.push_back(per_step[i]);
      }
    }
    s.horizon = horizon;
    s.kind = TraceKind::distributional;
    s.side = side;
    return s;
  }
};

namespace detail {

// Upwind theta-fluxes q_j = F_j * theta_upwind. One O(n) sweep: `carry`
// holds the fraction of the nearest filled cell upstream, seeded with the
// entering fraction, so runs of vacuum cells forward whatever crosses them.
inline void theta_fluxes(const std::vector<double>& m, const std::vector<double>& rho_pre,
                         const std::vector<double>& iface, double theta_in, double vacuum_eps,
                         VacuumRule rule, std::vector<double>& q) {
  const std::size_t n = m.size();
  q.resize(n + 1);
  q[0] = iface[0] * theta_in;
  double carry = theta_in;
  for (std::size_t j = 0; j < n; ++j) {
    double th;
    if (auto t = theta_of(m[j], rho_pre[j], vacuum_eps)) {
      th = *t;
      carry = th;
    } else {
      th = rule == VacuumRule::cascade ? carry : (rule == VacuumRule::zero ? 0.0 : 1.0);
    }
    q[j + 1] = iface[j + 1] * th;
  }
}

}  // namespace detail

// Advance m through every step recorded in `drive` (needs record_step_fields).
// theta0 is the initial fraction profile (cell-averaged against the initial
// density), theta_in the entering fraction over time; both must sit in [0,1].
inline ThetaSolution solve_theta(const GridSolution& drive, const StepFunction& theta0,
                                 const StepFunction& theta_in, const ThetaOptions& opt = {}) {
  if (!drive.has_step_fields)
    throw ValidationError("transport needs a drive recorded with step fields");
  const auto check_unit = [](const StepFunction& s, const char* what) {
    for (double v : s.vs)
      if (v < -1e-12 || v > 1.0 + 1e-12)
        throw ValidationError(std::string(what) + " must lie in [0, 1]");
  };
  check_unit(theta0, "initial fraction");
  check_unit(theta_in, "entering fraction");

  const Grid& g = drive.grid;
  double scale = 1e-12;
  for (double v : drive.cell_steps.front()) scale = std::max(scale, std::abs(v));
  scale = std::max(scale, drive.value_max_seen);
  const double vacuum_eps =
      opt.vacuum_eps ? *opt.vacuum_eps : opt.vacuum_eps_factor * std::max(scale, 1e-12);

  ThetaSolution sol;
  sol.grid = g;
  sol.horizon = drive.horizon;
  sol.vacuum_eps = vacuum_eps;
  sol.step_times = drive.step_times;
  sol.step_dt = drive.step_dt;

  // Midpoint-sampled fractions: exact for cell-aligned data, and constants
  // pass through bit for bit (cell averaging would cost an ulp to face
  // rounding, breaking the theta = 1 identity with the density).
  std::vector<double> m(static_cast<std::size_t>(g.n_cells));
  {
    const std::vector<double>& rho0 = drive.cell_steps.front();
    for (int j = 0; j < g.n_cells; ++j)
      m[static_cast<std::size_t>(j)] =
          std::clamp(theta0(g.center(j)), 0.0, 1.0) * rho0[static_cast<std::size_t>(j)];
  }
  for (double v : m) sol.mass_initial += v;
  sol.mass_initial *= g.dx;

  std::size_t rec_i = 0;
  const auto maybe_record = [&](double t) {
    while (rec_i < drive.times.size() &&
           std::abs(drive.times[rec_i] - t) <= 1e-12 * std::max(1.0, drive.horizon)) {
      sol.times.push_back(drive.times[rec_i]);
      sol.m_levels.push_back(m);
      ++rec_i;
    }
  };
  maybe_record(0.0);

  std::vector<double> q;
  const std::size_t n_steps = drive.step_times.size();
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double t = drive.step_times[i];
    const double dt = drive.step_dt[i];
    const std::vector<double>& rho_pre = drive.cell_steps[i];
    const std::vector<double>& iface = drive.iface_steps[i];
    for (double F : iface)
      if (F < -1e-12 * std::max(1.0, scale))
        throw RegimeError("transport requires nonnegative drive fluxes");

    const double th_in = std::clamp(theta_in(t), 0.0, 1.0);
    detail::theta_fluxes(m, rho_pre, iface, th_in, vacuum_eps, opt.vacuum_rule, q);

    sol.entry_flux_steps.push_back(q.front());
    sol.exit_flux_steps.push_back(q.back());
    sol.inflow_integral += q.front() * dt;
    sol.outflow_integral += q.back() * dt;

    detail::fv_apply(m, q, dt / g.dx);

    const std::vector<double>& rho_post = drive.cell_steps[i + 1];
    for (std::size_t j = 0; j < m.size(); ++j) {
      sol.m_min_seen = std::min(sol.m_min_seen, m[j]);
      sol.overrun_max = std::max(sol.overrun_max, m[j] - rho_post[j]);
    }
    maybe_record(t + dt);
  }

  sol.mass_final = 0.0;
  for (double v : m) sol.mass_final += v;
  sol.mass_final *= g.dx;
  return sol;
}

}  // namespace lwrnet
