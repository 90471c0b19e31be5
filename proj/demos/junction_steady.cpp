// One incoming road splitting onto two outgoing ones, driven with constant
// data that already sits at the coupled steady state. The exit densities must
// match the closed-form roots of g(rho) = theta * g(rho_in) on the free
// branch, and the junction flux identity must hold to solver tolerance.

#include <cmath>
#include <cstdio>

#include "lwrnet/flux_model.hpp"
#include "lwrnet/network.hpp"
#include "lwrnet/step_function.hpp"

using namespace lwrnet;

int main() {
  const FluxModel flux = FluxModel::lwr_linear(1.0, 1.0);

  Network net;
  net.roads = {{"I1", 1.0, 80}, {"I2", 1.0, 80}, {"I3", 1.0, 80}};
  net.junctions = {{"N", {"I1"}, {"I2", "I3"}}};
  net.paths = {{"PA", {"I1", "I2"}}, {"PB", {"I1", "I3"}}};

  const double rho_in = 0.2;
  const double q_in = flux.value(rho_in);
  // free-branch root of rho (1 - rho) = q for the linear velocity model
  const auto root = [](double q) { return 0.5 * (1.0 - std::sqrt(1.0 - 4.0 * q)); };
  const double rho2 = root(0.6 * q_in);
  const double rho3 = root(0.4 * q_in);

  NetworkData data;
  data.rho0 = {{"I1", StepFunction::constant(rho_in)},
               {"I2", StepFunction::constant(rho2)},
               {"I3", StepFunction::constant(rho3)}};
  data.theta0[{"PA", "I1"}] = StepFunction::constant(0.6);
  data.theta0[{"PB", "I1"}] = StepFunction::constant(0.4);
  data.theta0[{"PA", "I2"}] = StepFunction::constant(1.0);
  data.theta0[{"PB", "I3"}] = StepFunction::constant(1.0);
  data.source_density = StepFunction::constant(rho_in);
  data.source_theta = {{"PA", StepFunction::constant(0.6)},
                       {"PB", StepFunction::constant(0.4)}};

  const NetworkSolution sol = solve_network(net, flux, data, 4.0, {});

  std::printf("expected exit densities: I2 %.10f  I3 %.10f\n", rho2, rho3);
  for (const char* road : {"I2", "I3"}) {
    const GridSolution& g = sol.rho.at(road);
    double lo = 1.0, hi = 0.0;
    for (double v : g.levels.back()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    std::printf("final %s range: [%.10f, %.10f]\n", road, lo, hi);
  }
  std::printf("max junction residual: %.3e\n", sol.max_junction_residual);
  std::printf("max sum-to-one residual: %.3e\n", sol.max_sum_to_one);
  std::printf("mass balance error: %.3e\n", sol.mass_balance_error);
  return 0;
}
