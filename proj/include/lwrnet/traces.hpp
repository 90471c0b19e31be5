#pragma once

// Boundary-trace extraction for both engines. A conservative scheme defines
// its own trace: the flux telescoping identity makes the recorded interface
// flux the distributional trace of the flow, so extraction is a read, not a
// reconstruction. The exact tracking engine instead has genuine strong
// traces: the flux of the sampled one-sided limit along the boundary.

#include "lwrnet/errors.hpp"
#include "lwrnet/front_tracking.hpp"
#include "lwrnet/godunov.hpp"
#include "lwrnet/piecewise_linear.hpp"
#include "lwrnet/theta_transport.hpp"
#include "lwrnet/trace_series.hpp"

namespace lwrnet {

// Finite volume: the strong flux trace at an endpoint is the interface flux
// recorded there, one value per step.
inline TraceSeries strong_flux_trace(const GridSolution& sol, TraceSide side) {
  if (side == TraceSide::alpha_plus) return sol.left_flux_trace();
  if (side == TraceSide::beta_minus) return sol.right_flux_trace();
  throw ValidationError("strong_flux_trace: pick an endpoint side");
}

// Exact tracking: f(u(t, alpha+)) resp. f(u(t, beta-)) from the sampled
// boundary time trace. Exact for piecewise-linear fluxes on lattice states.
inline TraceSeries strong_flux_trace(const FrontTrackingSolution& sol,
                                     const PiecewiseLinearFlux& f, TraceSide side) {
  if (!sol.bounded_domain)
    throw ValidationError("strong_flux_trace: endpoint traces need a bounded-domain run");
  if (side == TraceSide::interior)
    throw ValidationError("strong_flux_trace: pick an endpoint side");
  const bool at_alpha = side == TraceSide::alpha_plus;
  const TimeTrace tr = sample_time_trace(sol, at_alpha ? sol.alpha : sol.beta, at_alpha);
  TraceSeries s;
  s.times.reserve(tr.series.times.size());
  s.values.reserve(tr.series.values.size());
  for (std::size_t i = 0; i < tr.series.times.size(); ++i) {
    const double q = f.value(tr.series.values[i]);
    if (!s.values.empty() && s.values.back() == q) continue;  // flux may merge states
    s.times.push_back(tr.series.times[i]);
    s.values.push_back(q);
  }
  s.horizon = sol.horizon;
  s.kind = TraceKind::strong;
  s.side = side;
  return s;
}

// Transport solutions expose the theta-weighted flow through each endpoint.
// Values are stored physically oriented (rightward flow); use
// with_outward_sign for identities written against the outward normal.
inline TraceSeries distributional_theta_trace(const ThetaSolution& sol, TraceSide side) {
  if (side == TraceSide::alpha_plus) return sol.entry_flux_trace();
  if (side == TraceSide::beta_minus) return sol.exit_flux_trace();
  throw ValidationError("distributional_theta_trace: pick an endpoint side");
}

}  // namespace lwrnet
