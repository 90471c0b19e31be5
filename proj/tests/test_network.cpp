#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lwrnet/flux_model.hpp"
#include "lwrnet/godunov.hpp"
#include "lwrnet/network.hpp"
#include "lwrnet/step_function.hpp"
#include "lwrnet/theta_transport.hpp"

using namespace lwrnet;

namespace {

// Source road feeding two outgoing roads; each path claims one of them.
Network two_out_net(int cells = 80) {
  Network net;
  net.roads = {{"I1", 1.0, cells}, {"I2", 1.0, cells}, {"I3", 1.0, cells}};
  net.junctions = {{"N", {"I1"}, {"I2", "I3"}}};
  net.paths = {{"PA", {"I1", "I2"}}, {"PB", {"I1", "I3"}}};
  return net;
}

NetworkData steady_data() {
  NetworkData d;
  d.rho0["I1"] = StepFunction::constant(0.2);
  d.rho0["I2"] = StepFunction::constant(0.2);
  d.rho0["I3"] = StepFunction::constant(0.2);
  d.theta0[{"PA", "I1"}] = StepFunction::constant(0.6);
  d.theta0[{"PB", "I1"}] = StepFunction::constant(0.4);
  d.theta0[{"PA", "I2"}] = StepFunction::constant(1.0);
  d.theta0[{"PB", "I3"}] = StepFunction::constant(1.0);
  d.source_density = StepFunction::constant(0.2);
  d.source_theta["PA"] = StepFunction::constant(0.6);
  d.source_theta["PB"] = StepFunction::constant(0.4);
  return d;
}

bool mentions(const std::vector<std::string>& violations, const std::string& needle) {
  return std::any_of(violations.begin(), violations.end(), [&](const std::string& v) {
    return v.find(needle) != std::string::npos;
  });
}

// Smaller root of rho * (1 - rho) = q, the entering density that carries
// flux q on the rising branch of the v = 1 - rho model.
double free_branch_root(double q) { return 0.5 * (1.0 - std::sqrt(1.0 - 4.0 * q)); }

}  // namespace

TEST_CASE("two-outgoing junction relaxes to the flux-inversion steady state") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  const Network net = two_out_net(80);
  REQUIRE(validate(net).empty());

  NetworkOptions opt;
  opt.output_times = {2.0};
  const NetworkSolution sol = solve_network(net, m, steady_data(), 4.0, opt);

  // Splitting the steady incoming flux 0.16 as 0.6 / 0.4 and inverting it
  // through rho * (1 - rho) gives the entering densities downstream.
  const double root_a = free_branch_root(0.6 * 0.16);
  const double root_b = free_branch_root(0.4 * 0.16);
  CHECK(std::abs(root_a - 0.107565) < 1e-3);
  CHECK(std::abs(root_b - 0.068119) < 1e-3);

  const auto& final_a = sol.rho.at("I2").levels.back();
  const auto& final_b = sol.rho.at("I3").levels.back();
  for (double v : final_a) {
    REQUIRE(std::abs(v - root_a) < 1e-3);
    REQUIRE(std::abs(v - 0.107565) < 1e-3);
  }
  for (double v : final_b) {
    REQUIRE(std::abs(v - root_b) < 1e-3);
    REQUIRE(std::abs(v - 0.068119) < 1e-3);
  }

  // The source road starts in its own steady state: every interface carries
  // the same flux, so the update is exactly zero and the cells never move.
  for (double v : sol.rho.at("I1").levels.back()) REQUIRE(v == 0.2);
  for (double v : sol.theta.at("PA").at("I1").m_levels.back())
    REQUIRE(std::abs(v - 0.6 * 0.2) < 1e-12);

  // Only one path runs on each outgoing road, so its fraction is 1 there.
  const auto& m_a = sol.theta.at("PA").at("I2").m_levels.back();
  for (std::size_t j = 0; j < final_a.size(); ++j) REQUIRE(std::abs(m_a[j] - final_a[j]) < 1e-6);

  // Junction bookkeeping: per-path exit fluxes and assembled boundary data.
  const JunctionAudit& audit = sol.audits.front();
  REQUIRE(audit.junction == "N");
  REQUIRE(audit.step_times.size() == sol.rho.at("I1").step_times.size());
  CHECK(std::abs(audit.path_exit_flux.at("PA").front() - 0.096) < 1e-12);
  CHECK(std::abs(audit.path_exit_flux.at("PA").back() - 0.096) < 1e-12);
  CHECK(std::abs(audit.path_exit_flux.at("PB").back() - 0.064) < 1e-12);
  for (double rb : audit.rho_bar.at("I2")) REQUIRE(std::abs(rb - root_a) < 1e-10);

  // The entering flux of each outgoing road is the inverted demand by
  // construction, so the residual sits at the inversion tolerance.
  const JunctionResidual jr = junction_flux_residual(sol, "N");
  REQUIRE(jr.max_abs <= 1e-8);
  CHECK(jr.max_abs <= 1e-10);

  REQUIRE(sum_to_one_residual(sol, "I1").max_abs <= 1e-9);
  REQUIRE(sum_to_one_residual(sol, "I2").max_abs <= 1e-6);
  REQUIRE(sol.max_sum_to_one <= 1e-6);
  REQUIRE(sol.mass_balance_error <= 1e-8);
  REQUIRE(sol.min_density_seen >= -1e-12);
  REQUIRE(sol.max_density_seen <= m.rho_star() + 1e-12);
  CHECK(sol.theta_clamp_events == 0);
}

TEST_CASE("identity junction passes density and fractions through unchanged") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  Network net;
  net.roads = {{"I1", 1.0, 60}, {"I2", 1.0, 60}};
  net.junctions = {{"N", {"I1"}, {"I2"}}};
  net.paths = {{"PA", {"I1", "I2"}}, {"PB", {"I1", "I2"}}};
  REQUIRE(validate(net).empty());

  NetworkData d;
  d.rho0["I1"] = StepFunction::constant(0.2);
  d.rho0["I2"] = StepFunction::constant(0.2);
  for (const char* rid : {"I1", "I2"}) {
    d.theta0[{"PA", rid}] = StepFunction::constant(0.6);
    d.theta0[{"PB", rid}] = StepFunction::constant(0.4);
  }
  d.source_density = StepFunction::constant(0.2);
  d.source_theta["PA"] = StepFunction::constant(0.6);
  d.source_theta["PB"] = StepFunction::constant(0.4);

  const NetworkSolution sol = solve_network(net, m, d, 2.0, {});

  // invert_flux_free(g(0.2)) = 0.2 up to the inversion tolerance, so the
  // junction is transparent: the downstream road never notices it.
  const auto& rho2 = sol.rho.at("I2").levels.back();
  const auto& ma = sol.theta.at("PA").at("I2").m_levels.back();
  const auto& mb = sol.theta.at("PB").at("I2").m_levels.back();
  for (std::size_t j = 0; j < rho2.size(); ++j) {
    REQUIRE(std::abs(rho2[j] - 0.2) < 1e-3);
    REQUIRE(std::abs(ma[j] / rho2[j] - 0.6) < 1e-3);
    REQUIRE(std::abs(mb[j] / rho2[j] - 0.4) < 1e-3);
    CHECK(std::abs(rho2[j] - 0.2) < 1e-8);   // construction is tight, not just 1e-3
    CHECK(std::abs(ma[j] / rho2[j] - 0.6) < 1e-8);
  }
  REQUIRE(junction_flux_residual(sol, "N").max_abs <= 1e-8);
  CHECK(sol.theta_clamp_events == 0);
}

TEST_CASE("a single-road network reduces exactly to the standalone solvers") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  Network net;
  net.roads = {{"R", 1.0, 120}};
  net.paths = {{"PA", {"R"}}, {"PB", {"R"}}};
  REQUIRE(validate(net).empty());

  const StepFunction rho0{{0.6}, {0.3, 0.0}};
  const StepFunction th0a{{0.3}, {0.5, 0.7}};
  const StepFunction th0b{{0.3}, {0.5, 0.3}};
  const StepFunction inflow{{0.8}, {0.25, 0.1}};
  const StepFunction bar_a = StepFunction::constant(0.6);
  const StepFunction bar_b = StepFunction::constant(0.4);

  NetworkData d;
  d.rho0["R"] = rho0;
  d.theta0[{"PA", "R"}] = th0a;
  d.theta0[{"PB", "R"}] = th0b;
  d.source_density = inflow;
  d.source_theta["PA"] = bar_a;
  d.source_theta["PB"] = bar_b;

  NetworkOptions nopt;
  nopt.output_times = {0.5, 1.0};
  const NetworkSolution sol = solve_network(net, m, d, 1.5, nopt);

  // Standalone run stepped against the same free-branch speed bound that the
  // network applies globally; with matching steps both pipelines do the same
  // arithmetic, so agreement is bitwise.
  FvOptions fopt;
  fopt.output_times = nopt.output_times;
  fopt.record_step_fields = true;
  fopt.min_speed_scale =
      std::max({m.max_abs_deriv_on(0.0, m.rho_star()), m.max_velocity_on(0.0, m.rho_star()), 1e-12});
  const Grid grid = Grid::uniform(0.0, 1.0, 120);
  const GridSolution drive = solve_ibvp_fv(m, grid, rho0, inflow, 1.5, fopt);

  ThetaOptions topt;
  topt.vacuum_eps = 1e-10 * m.rho_max();
  const ThetaSolution ta = solve_theta(drive, th0a, bar_a, topt);
  const ThetaSolution tb = solve_theta(drive, th0b, bar_b, topt);

  const GridSolution& nr = sol.rho.at("R");
  REQUIRE(nr.times == drive.times);
  REQUIRE(nr.step_times == drive.step_times);
  REQUIRE(nr.step_dt == drive.step_dt);
  REQUIRE(nr.levels == drive.levels);
  REQUIRE(nr.left_flux_steps == drive.left_flux_steps);
  REQUIRE(nr.right_flux_steps == drive.right_flux_steps);

  REQUIRE(sol.theta.at("PA").at("R").m_levels == ta.m_levels);
  REQUIRE(sol.theta.at("PB").at("R").m_levels == tb.m_levels);
  REQUIRE(sol.theta.at("PA").at("R").entry_flux_steps == ta.entry_flux_steps);
  REQUIRE(sol.theta.at("PA").at("R").exit_flux_steps == ta.exit_flux_steps);
}

TEST_CASE("network validation reports structural violations") {
  SECTION("well-formed fixtures pass") {
    REQUIRE(validate(two_out_net()).empty());
  }

  SECTION("two incoming roads") {
    Network net = two_out_net();
    net.junctions[0].incoming = {"I1", "I2"};
    REQUIRE(mentions(validate(net), "non-T junction"));
  }

  SECTION("road fed by two junctions") {
    Network net = two_out_net();
    net.roads.push_back({"I4", 1.0, 10});
    net.junctions.push_back({"N2", {"I2"}, {"I3"}});  // I3 already fed by N
    net.paths = {{"PA", {"I1", "I2", "I3"}}, {"PB", {"I1", "I3"}}};
    REQUIRE(mentions(validate(net), "fed by more than one junction"));
  }

  SECTION("path not starting at the shared source") {
    Network net = two_out_net();
    net.paths[1].roads = {"I2"};
    REQUIRE(mentions(validate(net), "does not start at the shared source road"));
  }

  SECTION("path with non-consecutive roads") {
    Network net = two_out_net();
    net.roads.push_back({"I4", 1.0, 10});
    net.junctions[0].outgoing = {"I2", "I3", "I4"};
    net.paths.push_back({"PC", {"I1", "I2", "I4"}});  // I2 has no junction into I4
    REQUIRE(mentions(validate(net), "not consecutive"));
  }

  SECTION("path stopping before a destination") {
    Network net = two_out_net();
    net.paths[0].roads = {"I1"};
    REQUIRE(mentions(validate(net), "continues into a junction"));
  }

  SECTION("road no path uses") {
    Network net = two_out_net();
    net.roads.push_back({"X", 1.0, 10});
    REQUIRE(mentions(validate(net), "not used by any path"));
  }

  SECTION("cycle back into the source") {
    Network net;
    net.roads = {{"A", 1.0, 10}, {"B", 1.0, 10}};
    net.junctions = {{"J1", {"A"}, {"B"}}, {"J2", {"B"}, {"A"}}};
    net.paths = {{"P", {"A", "B"}}};
    const auto bad = validate(net);
    REQUIRE_FALSE(bad.empty());
  }

  SECTION("solver refuses invalid networks") {
    Network net = two_out_net();
    net.junctions[0].incoming = {"I1", "I2"};
    REQUIRE_THROWS_AS(solve_network(net, FluxModel::lwr_linear(1.0, 1.0), steady_data(), 1.0, {}),
                      ValidationError);
  }
}

TEST_CASE("network data validation") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  const Network net = two_out_net(20);

  SECTION("missing entering fraction") {
    NetworkData d = steady_data();
    d.source_theta.erase("PB");
    REQUIRE_THROWS_AS(solve_network(net, m, d, 1.0, {}), ValidationError);
  }

  SECTION("entering fractions that do not sum to one") {
    NetworkData d = steady_data();
    d.source_theta["PB"] = StepFunction::constant(0.3);
    REQUIRE_THROWS_AS(solve_network(net, m, d, 1.0, {}), ValidationError);
  }

  SECTION("initial density beyond the free branch") {
    NetworkData d = steady_data();
    d.rho0["I2"] = StepFunction::constant(0.6);  // rho_star = 0.5
    REQUIRE_THROWS_AS(solve_network(net, m, d, 1.0, {}), RegimeError);
  }

  SECTION("initial fractions that do not split the traffic") {
    NetworkData d = steady_data();
    d.theta0[{"PA", "I1"}] = StepFunction::constant(0.3);  // 0.3 + 0.4 != 1
    REQUIRE_THROWS_AS(solve_network(net, m, d, 1.0, {}), ValidationError);
  }

  SECTION("fractions are unconstrained where there is no traffic") {
    NetworkData d = steady_data();
    d.rho0["I3"] = StepFunction::constant(0.0);
    d.theta0.erase({"PB", "I3"});  // defaults to 0; fine on an empty road
    REQUIRE_NOTHROW(solve_network(net, m, d, 0.5, {}));
  }
}

TEST_CASE("corrupted junction assembly trips both residual diagnostics together") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  const Network net = two_out_net(40);

  NetworkOptions clean;
  const NetworkSolution good = solve_network(net, m, steady_data(), 2.0, clean);
  REQUIRE(junction_flux_residual(good, "N").max_abs <= 1e-10);
  REQUIRE(good.max_sum_to_one <= 1e-6);

  // Biasing the assembled entering density corrupts every downstream
  // fraction datum through the shared denominator q_k / g(rho_bar): the
  // entering flux no longer matches the assembled demand, and the fraction
  // masses downstream stop summing to the density. The two symptoms are
  // equivalent and must fire together.
  NetworkOptions corrupt;
  corrupt.debug_rho_bar_bias = 0.05;
  const NetworkSolution bad = solve_network(net, m, steady_data(), 2.0, corrupt);
  REQUIRE(junction_flux_residual(bad, "N").max_abs > 1e-3);
  REQUIRE(bad.max_sum_to_one > 1e-3);
}

TEST_CASE("conservation and residuals hold under time-varying data") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);

  NetworkData d;
  d.rho0["I1"] = StepFunction{{0.5}, {0.1, 0.25}};
  d.theta0[{"PA", "I1"}] = StepFunction{{0.4}, {0.5, 0.8}};
  d.theta0[{"PB", "I1"}] = StepFunction{{0.4}, {0.5, 0.2}};
  d.theta0[{"PA", "I2"}] = StepFunction::constant(1.0);
  d.theta0[{"PB", "I3"}] = StepFunction::constant(1.0);
  d.source_density = StepFunction{{0.7, 1.4}, {0.1, 0.3, 0.15}};
  d.source_theta["PA"] = StepFunction{{1.0}, {0.5, 0.7}};
  d.source_theta["PB"] = StepFunction{{1.0}, {0.5, 0.3}};

  for (int cells : {40, 80}) {
    const Network net = two_out_net(cells);
    NetworkOptions opt;
    opt.output_times = {0.5, 1.0, 1.5};
    const NetworkSolution sol = solve_network(net, m, d, 2.5, opt);

    REQUIRE(sol.mass_balance_error <= 1e-8);
    REQUIRE(sol.max_sum_to_one <= 1e-6 * m.rho_max());
    REQUIRE(sol.min_density_seen >= -1e-12);
    REQUIRE(sol.max_density_seen <= m.rho_star() + 1e-12);
    CHECK(sol.rho.at("I2").outflow_integral > 0.0);

    // The boundary density is inverted from the very fluxes it must match,
    // so the junction identity holds at rounding level on every grid; the
    // spec's linear-in-dx envelope is satisfied with room to spare.
    REQUIRE(junction_flux_residual(sol, "N").max_abs <= 1e-10);
  }
}

TEST_CASE("zero-traffic network stays identically zero") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  const Network net = two_out_net(30);

  NetworkData d;
  d.source_theta["PA"] = StepFunction::constant(1.0);
  d.source_theta["PB"] = StepFunction::constant(0.0);

  const NetworkSolution sol = solve_network(net, m, d, 1.0, {});
  REQUIRE(junction_flux_residual(sol, "N").max_abs == 0.0);
  for (const auto& [rid, gs] : sol.rho)
    for (const auto& level : gs.levels)
      for (double v : level) REQUIRE(v == 0.0);
  const SumToOneField f = sum_to_one_residual(sol, "I2");
  for (const auto& level : f.residual)
    for (double v : level) REQUIRE(v == 0.0);  // holds for either sign of zero
}

TEST_CASE("vacuum fraction conventions leave the transported mass unchanged") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  const Network net = two_out_net(60);

  // Initially empty network filling from the source: the filling fronts keep
  // a band of below-vacuum cells where the fraction convention is free.
  NetworkData d;
  d.source_density = StepFunction::constant(0.25);
  d.source_theta["PA"] = StepFunction::constant(0.6);
  d.source_theta["PB"] = StepFunction::constant(0.4);

  // A valid alternative assignment must keep the vacuum fractions summing to
  // one across the paths of a road: give everything to PA and nothing to PB.
  // (Assigning `one` to every path would claim a total fraction of 2 on
  // vacuum cells, which no admissible solution does.)
  NetworkOptions a;
  a.vacuum_rule = VacuumRule::cascade;
  a.output_times = {1.0, 2.0};
  NetworkOptions b = a;
  b.path_vacuum_rule = {{"PA", VacuumRule::one}, {"PB", VacuumRule::zero}};

  const NetworkSolution sa = solve_network(net, m, d, 3.0, a);
  const NetworkSolution sb = solve_network(net, m, d, 3.0, b);

  double max_dm = 0.0, max_dr = 0.0;
  for (const auto& [pid, by_road] : sa.theta)
    for (const auto& [rid, ts] : by_road) {
      const auto& other = sb.theta.at(pid).at(rid);
      for (std::size_t lev = 0; lev < ts.m_levels.size(); ++lev)
        for (std::size_t c = 0; c < ts.m_levels[lev].size(); ++c)
          max_dm = std::max(max_dm,
                            std::abs(ts.m_levels[lev][c] - other.m_levels[lev][c]));
    }
  // The convention feeds into the densities only through sub-vacuum exit
  // fluxes at the junction, so they too agree at the vacuum threshold.
  for (const auto& [rid, gs] : sa.rho) {
    const auto& other = sb.rho.at(rid).levels;
    for (std::size_t lev = 0; lev < gs.levels.size(); ++lev)
      for (std::size_t c = 0; c < gs.levels[lev].size(); ++c)
        max_dr = std::max(max_dr, std::abs(gs.levels[lev][c] - other[lev][c]));
  }
  REQUIRE(max_dm <= 1e-10);
  REQUIRE(max_dr <= 1e-10);
}

TEST_CASE("residual extractors reject unknown names") {
  const FluxModel m = FluxModel::lwr_linear(1.0, 1.0);
  const NetworkSolution sol = solve_network(two_out_net(10), m, steady_data(), 0.2, {});
  REQUIRE_THROWS_AS(junction_flux_residual(sol, "nope"), ValidationError);
  REQUIRE_THROWS_AS(sum_to_one_residual(sol, "nope"), ValidationError);
}
