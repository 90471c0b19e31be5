#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "lwrnet/errors.hpp"
#include "lwrnet/flux_model.hpp"
#include "lwrnet/godunov.hpp"
#include "lwrnet/step_function.hpp"

using namespace lwrnet;
using Catch::Approx;

namespace {

double l1_against(const GridSolution& sol, const std::vector<double>& level,
                  const std::function<double(double)>& exact) {
  double acc = 0.0;
  for (int j = 0; j < sol.grid.n_cells; ++j)
    acc += std::abs(level[static_cast<std::size_t>(j)] - exact(sol.grid.center(j))) * sol.grid.dx;
  return acc;
}

}  // namespace

TEST_CASE("interface flux: interval extrema by upwind direction") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  CHECK(godunov_flux(m, 0.2, 0.4) == Approx(0.16).margin(1e-14));  // rising: min
  CHECK(godunov_flux(m, 0.4, 0.2) == Approx(0.24).margin(1e-14));  // falling: max
  CHECK(godunov_flux(m, 0.7, 0.2) == Approx(0.25).margin(1e-14));  // peak inside
  CHECK(godunov_flux(m, 0.2, 0.7) == Approx(0.16).margin(1e-14));
  CHECK(godunov_flux(m, 0.3, 0.3) == Approx(0.21).margin(1e-14));

  const QuadraticFlux q;
  CHECK(godunov_flux(q, -1.0, 1.0) == 0.0);  // vertex inside a rising jump
  CHECK(godunov_flux(q, 1.0, -1.0) == 1.0);
}

TEST_CASE("time-step rule: attained range of g', with a floor at critical data") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  CHECK(cfl_dt({0.0, 0.5}, m, 0.01, 0.5) == Approx(0.005).epsilon(1e-9));
  CHECK(cfl_dt({0.0, 0.5}, m, 0.02, 0.5) == Approx(0.010).epsilon(1e-9));  // linear in dx
  CHECK(cfl_dt({0.5}, m, 0.01, 0.5) == Approx(0.5 * 0.01 / 1e-12).epsilon(1e-9));
  CHECK_THROWS_AS(cfl_dt({0.2}, m, 0.01, 1.5), ValidationError);
  CHECK_THROWS_AS(cfl_dt(std::vector<double>{}, m, 0.01, 0.5), ValidationError);
}

TEST_CASE("moving shock is captured at the exact chord speed") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  const Grid g = Grid::uniform(-1.0, 2.0, 600);
  // Rising density jump 0.1 -> 0.4: shock at (g(0.4)-g(0.1))/0.3 = 0.5.
  const StepFunction u0{{0.0}, {0.1, 0.4}};
  const double T = 1.0;
  auto sol = solve_cauchy_fv(m, g, cells_from_step(g, u0), T);
  const auto exact = [&](double x) { return x < 0.5 * T ? 0.1 : 0.4; };
  CHECK(l1_against(sol, sol.levels.back(), exact) < 0.02);
  CHECK(sol.times.back() == Approx(T));
}

TEST_CASE("rarefaction converges to the self-similar profile") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  const Grid g = Grid::uniform(-1.0, 2.0, 600);
  // Falling density jump 0.4 -> 0.1 opens a fan between speeds 0.2 and 0.8.
  const StepFunction u0{{0.0}, {0.4, 0.1}};
  const double T = 1.0;
  auto sol = solve_cauchy_fv(m, g, cells_from_step(g, u0), T);
  const auto exact = [&](double x) {
    const double s = x / T;
    if (s <= 0.2) return 0.4;
    if (s >= 0.8) return 0.1;
    return 0.5 * (1.0 - s);
  };
  CHECK(l1_against(sol, sol.levels.back(), exact) < 0.01);
}

TEST_CASE("random road runs: conservation ledger and data hull") {
  std::mt19937 rng(46212u);
  std::uniform_real_distribution<double> vd(0.0, 0.5);
  for (int rep = 0; rep < 10; ++rep) {
    const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
    const Grid g = Grid::uniform(0.0, 1.0, 120);
    std::vector<double> xs{0.3, 0.55, 0.8};
    const StepFunction u0{xs, {vd(rng), vd(rng), vd(rng), vd(rng)}};
    const StepFunction inflow{{0.4}, {vd(rng), vd(rng)}};
    FvOptions opt;
    opt.admissible_range = {0.0, m.rho_star()};
    auto sol = solve_ibvp_fv(m, g, u0, inflow, 0.8, opt);

    // Update telescopes: final mass = initial + inflow - outflow, to rounding.
    CHECK(sol.mass_final - sol.mass_initial ==
          Approx(sol.inflow_integral - sol.outflow_integral).margin(1e-12));

    // Monotone scheme: values remain in the hull of datum and inflow.
    double lo = 1e300, hi = -1e300;
    for (double v : u0.vs) lo = std::min(lo, v), hi = std::max(hi, v);
    for (double v : inflow.vs) lo = std::min(lo, v), hi = std::max(hi, v);
    CHECK(sol.value_min_seen >= lo - 1e-12);
    CHECK(sol.value_max_seen <= hi + 1e-12);
  }
}

TEST_CASE("inflow against an emptier road is attained exactly at the gate") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  const Grid g = Grid::uniform(0.0, 1.0, 50);
  auto sol = solve_ibvp_fv(m, g, StepFunction::constant(0.0), StepFunction::constant(0.25), 0.5);
  for (double F : sol.left_flux_steps) CHECK(F == Approx(m.flux(0.25)).margin(1e-15));
  CHECK(sol.left_flux_trace().values.size() == 1);
  CHECK(sol.left_flux_trace()(0.3) == Approx(0.1875).margin(1e-15));
}

TEST_CASE("data outside the admissible range are rejected") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  const Grid g = Grid::uniform(0.0, 1.0, 10);
  FvOptions opt;
  opt.admissible_range = {0.0, m.rho_star()};
  CHECK_THROWS_AS(
      solve_ibvp_fv(m, g, StepFunction::constant(0.6), StepFunction::constant(0.1), 1.0, opt),
      RegimeError);
  CHECK_THROWS_AS(
      solve_ibvp_fv(m, g, StepFunction::constant(0.1), StepFunction::constant(0.6), 1.0, opt),
      RegimeError);
}

TEST_CASE("requested output instants are recorded exactly") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  const Grid g = Grid::uniform(0.0, 1.0, 40);
  FvOptions opt;
  opt.output_times = {0.3, 0.7};
  opt.probe_positions = {0.5};
  auto sol = solve_ibvp_fv(m, g, StepFunction::constant(0.2), StepFunction::constant(0.2), 1.0, opt);
  REQUIRE(sol.times.size() == 4);
  CHECK(sol.times[0] == 0.0);
  CHECK(sol.times[1] == Approx(0.3).margin(1e-12));
  CHECK(sol.times[2] == Approx(0.7).margin(1e-12));
  CHECK(sol.times[3] == Approx(1.0).margin(1e-12));
  CHECK(sol.level_at(0.7)[0] == Approx(0.2).margin(1e-13));
  CHECK(sol.levels.size() == 4);

  // Constant run: the probe series is a single constant value.
  const auto probe = sol.probe_trace(0);
  CHECK(probe.values.size() == 1);
  CHECK(probe(0.9) == Approx(0.2).margin(1e-13));
  CHECK_THROWS_AS(sol.probe_trace(1), ValidationError);
}

TEST_CASE("step history is complete enough to replay the run") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  const Grid g = Grid::uniform(0.0, 1.0, 30);
  const StepFunction u0{{0.5}, {0.1, 0.3}};
  auto sol = solve_ibvp_fv(m, g, u0, StepFunction::constant(0.2), 0.6);
  REQUIRE(sol.has_step_fields);
  REQUIRE(sol.cell_steps.size() == sol.step_times.size() + 1);
  REQUIRE(sol.iface_steps.size() == sol.step_times.size());
  // Replaying each recorded step with its own fluxes reproduces the history.
  for (std::size_t i = 0; i < sol.step_times.size(); ++i) {
    std::vector<double> c = sol.cell_steps[i];
    detail::fv_apply(c, sol.iface_steps[i], sol.step_dt[i] / g.dx);
    for (std::size_t j = 0; j < c.size(); ++j) CHECK(c[j] == sol.cell_steps[i + 1][j]);
  }
  double sum_dt = 0.0;
  for (double dt : sol.step_dt) sum_dt += dt;
  CHECK(sum_dt == Approx(0.6).margin(1e-12));
}
