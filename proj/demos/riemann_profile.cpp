// Front-tracking a Riemann problem on the piecewise linear free-branch flux
// and printing the self-similar profile at a few times, plus the variation
// of the time trace at a fixed probe against the variation of the datum.

#include <cstdio>

#include "lwrnet/diagnostics.hpp"
#include "lwrnet/flux_model.hpp"
#include "lwrnet/front_tracking.hpp"
#include "lwrnet/piecewise_linear.hpp"
#include "lwrnet/step_function.hpp"

using namespace lwrnet;

int main() {
  const FluxModel model = FluxModel::lwr_linear(1.0, 1.0);
  const int nu = 6;
  const PiecewiseLinearFlux f = PiecewiseLinearFlux::sample(model, nu, 0.0, model.rho_star());

  // left state below the right state: a shock; swapped: a rarefaction fan
  const StepFunction shock_datum({0.0}, {0.125, 0.375});
  const StepFunction fan_datum({0.0}, {0.375, 0.125});

  for (const auto& [name, u0] : {std::pair{"shock", shock_datum}, {"rarefaction", fan_datum}}) {
    const FrontTrackingSolution sol = evolve(f, u0, 1.0);
    std::printf("%s:\n", name);
    for (double t : {0.25, 0.5, 1.0}) {
      const StepFunction prof = sample_space_profile(sol, t);
      std::printf("  t=%.2f  pieces=%zu  values:", t, prof.vs.size());
      for (double v : prof.vs) std::printf(" %.6f", v);
      std::printf("\n");
    }
    const TimeTrace trace = sample_time_trace(sol, 0.2);
    std::printf("  trace at x=0.2: TV %.6f  (datum TV %.6f)\n\n",
                total_variation(trace.series.values), total_variation(u0));
  }
  return 0;
}
