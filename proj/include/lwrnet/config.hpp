#pragma once

// Scenario configuration: one JSON document holding the mode, the flux law,
// the network, the data, the numerics, and per-mode parameter blocks. The
// dialect is documented in the README; helpers here turn the document into
// solver inputs and collect validation diagnostics without running anything.

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lwrnet/errors.hpp"
#include "lwrnet/flux_model.hpp"
#include "lwrnet/network.hpp"
#include "lwrnet/step_function.hpp"

namespace lwrnet {

using Json = nlohmann::json;

inline Json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  try {
    return Json::parse(in, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const Json::exception& e) {
    throw ValidationError("config parse error in " + path + ": " + e.what());
  }
}

// Applies an override of the form "a.b.c=value"; the value is parsed as JSON
// when possible (numbers, booleans, arrays) and kept as a string otherwise.
inline void apply_override(Json& cfg, const std::string& keyval) {
  const auto eq = keyval.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("override must look like key.path=value, got: " + keyval);
  std::string pointer = "/" + keyval.substr(0, eq);
  for (char& c : pointer)
    if (c == '.') c = '/';
  const std::string raw = keyval.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::exception&) {
    value = raw;  // plain string
  }
  try {
    cfg[Json::json_pointer(pointer)] = value;
  } catch (const Json::exception& e) {
    throw ValidationError("cannot apply override '" + keyval + "': " + e.what());
  }
}

// A step datum is either a bare number (constant) or {"xs": [...], "vs": [...]}.
inline StepFunction step_from_json(const Json& j, const std::string& what) {
  if (j.is_number()) return StepFunction::constant(j.get<double>());
  if (j.is_object() && j.contains("vs")) {
    try {
      std::vector<double> xs = j.value("xs", std::vector<double>{});
      std::vector<double> vs = j.at("vs").get<std::vector<double>>();
      return StepFunction(std::move(xs), std::move(vs));
    } catch (const Json::exception& e) {
      throw ValidationError(what + ": malformed step function: " + e.what());
    }
  }
  throw ValidationError(what + ": expected a number or {xs, vs}");
}

inline FluxModel flux_from_config(const Json& cfg) {
  if (!cfg.contains("flux")) return FluxModel::lwr_linear(1.0, 1.0);
  const Json& f = cfg.at("flux");
  if (!f.is_object()) throw ValidationError("flux: expected an object");
  const double rho_max = f.value("rho_max", 1.0);
  if (f.contains("velocity_poly")) {
    try {
      return FluxModel::from_velocity_poly(f.at("velocity_poly").get<std::vector<double>>(),
                                           rho_max);
    } catch (const Json::exception& e) {
      throw ValidationError(std::string("flux.velocity_poly: ") + e.what());
    }
  }
  return FluxModel::lwr_linear(f.value("v_free", 1.0), rho_max);
}

inline Network network_from_config(const Json& cfg) {
  if (!cfg.contains("network")) throw ValidationError("config needs a network section");
  const Json& n = cfg.at("network");
  Network net;
  try {
    for (const Json& r : n.value("roads", Json::array())) {
      RoadSpec spec;
      spec.id = r.at("id").get<std::string>();
      spec.length = r.value("length", 1.0);
      spec.cells = r.value("cells", 100);
      net.roads.push_back(std::move(spec));
    }
    for (const Json& jn : n.value("junctions", Json::array())) {
      JunctionSpec spec;
      spec.id = jn.at("id").get<std::string>();
      if (jn.contains("in") && jn.at("in").is_string())
        spec.incoming.push_back(jn.at("in").get<std::string>());
      else
        spec.incoming = jn.value("in", std::vector<std::string>{});
      spec.outgoing = jn.value("out", std::vector<std::string>{});
      net.junctions.push_back(std::move(spec));
    }
    for (const Json& p : n.value("paths", Json::array())) {
      PathSpec spec;
      spec.id = p.at("id").get<std::string>();
      spec.roads = p.value("roads", std::vector<std::string>{});
      net.paths.push_back(std::move(spec));
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("network section: ") + e.what());
  }
  return net;
}

inline NetworkData data_from_config(const Json& cfg) {
  NetworkData data;
  if (!cfg.contains("data")) return data;
  const Json& d = cfg.at("data");
  // .items() iterates by reference, so the containers must be named lvalues
  // rather than the temporaries .value() returns.
  const Json rho0 = d.value("rho0", Json::object());
  const Json theta0 = d.value("theta0", Json::object());
  const Json source_theta = d.value("source_theta", Json::object());
  try {
    for (const auto& [road, j] : rho0.items())
      data.rho0[road] = step_from_json(j, "data.rho0." + road);
    for (const auto& [path, roads] : theta0.items())
      for (const auto& [road, j] : roads.items())
        data.theta0[{path, road}] = step_from_json(j, "data.theta0." + path + "." + road);
    if (d.contains("source_density"))
      data.source_density = step_from_json(d.at("source_density"), "data.source_density");
    for (const auto& [path, j] : source_theta.items())
      data.source_theta[path] = step_from_json(j, "data.source_theta." + path);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("data section: ") + e.what());
  }
  return data;
}

inline NetworkOptions numerics_from_config(const Json& cfg) {
  NetworkOptions opt;
  if (!cfg.contains("numerics")) return opt;
  const Json& n = cfg.at("numerics");
  try {
    opt.cfl = n.value("cfl", opt.cfl);
    opt.output_times = n.value("output_times", std::vector<double>{});
    opt.record_step_fields = n.value("record_step_fields", false);
    opt.theta_sum_tol = n.value("theta_sum_tol", opt.theta_sum_tol);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("numerics section: ") + e.what());
  }
  return opt;
}

inline double horizon_from_config(const Json& cfg) {
  if (!cfg.contains("horizon")) throw ValidationError("config needs a horizon (time) entry");
  if (!cfg.at("horizon").is_number()) throw ValidationError("horizon must be a number");
  return cfg.at("horizon").get<double>();
}

// Schema, referential, and data-constraint checks; returns human-readable
// diagnostics (empty means the config is runnable). Solvers re-enforce the
// same constraints at run time; this is the cheap preflight.
inline std::vector<std::string> validate_config(const Json& cfg) {
  std::vector<std::string> bad;
  static const std::set<std::string> kModes = {"simulate",  "counterexample", "verify-tv",
                                               "stability", "bv-propagation", "convergence"};
  const std::string mode = cfg.value("mode", "");
  if (!kModes.count(mode)) {
    bad.push_back("mode must be one of simulate|counterexample|verify-tv|stability|"
                  "bv-propagation|convergence");
    return bad;
  }

  FluxModel flux = FluxModel::lwr_linear(1.0, 1.0);
  try {
    flux = flux_from_config(cfg);
  } catch (const ValidationError& e) {
    bad.push_back(e.what());
  }

  const bool needs_network =
      mode == "simulate" || mode == "stability" || mode == "bv-propagation";
  if (needs_network) {
    if (!cfg.contains("horizon") || !cfg.at("horizon").is_number() ||
        !(cfg.at("horizon").get<double>() > 0.0))
      bad.push_back("horizon must be a positive number");
    Network net;
    try {
      net = network_from_config(cfg);
      for (std::string& v : validate(net)) bad.push_back(std::move(v));
    } catch (const ValidationError& e) {
      bad.push_back(e.what());
      return bad;
    }

    NetworkData data;
    try {
      data = data_from_config(cfg);
    } catch (const ValidationError& e) {
      bad.push_back(e.what());
      return bad;
    }

    // Free-regime ranges for the densities.
    const double rho_star = flux.rho_star();
    const auto check_density = [&](const StepFunction& s, const std::string& what) {
      for (double v : s.vs) {
        if (v < 0.0) bad.push_back(what + " has a negative density");
        if (v > rho_star + 1e-12)
          bad.push_back(what + " leaves the free branch [0, " + std::to_string(rho_star) + "]");
      }
    };
    check_density(data.source_density, "data.source_density");
    for (const auto& [road, s] : data.rho0) check_density(s, "data.rho0." + road);

    // Entering fractions: present for every path, in range, summing to one
    // at every jump of every series.
    std::vector<double> checkpoints = {0.0};
    for (const PathSpec& p : net.paths) {
      const auto it = data.source_theta.find(p.id);
      if (it == data.source_theta.end()) {
        bad.push_back("data.source_theta misses path '" + p.id + "'");
        continue;
      }
      for (double v : it->second.vs)
        if (v < 0.0 || v > 1.0)
          bad.push_back("data.source_theta." + p.id + " leaves [0, 1]");
      for (double t : it->second.xs) checkpoints.push_back(t);
    }
    if (data.source_theta.size() == net.paths.size()) {
      for (double t : checkpoints) {
        double sum = 0.0;
        for (const PathSpec& p : net.paths) sum += data.source_theta.at(p.id)(t);
        if (std::abs(sum - 1.0) > 1e-9) {
          bad.push_back("entering fractions sum to " + std::to_string(sum) + " at t = " +
                        std::to_string(t) + "; they must sum to one");
          break;
        }
      }
    }

    // Referential integrity of the data maps.
    std::set<std::string> road_ids;
    for (const RoadSpec& r : net.roads) road_ids.insert(r.id);
    std::set<std::string> path_ids;
    for (const PathSpec& p : net.paths) path_ids.insert(p.id);
    for (const auto& [road, s] : data.rho0)
      if (!road_ids.count(road)) bad.push_back("data.rho0 references unknown road '" + road + "'");
    for (const auto& [key, s] : data.theta0) {
      if (!path_ids.count(key.first))
        bad.push_back("data.theta0 references unknown path '" + key.first + "'");
      if (!road_ids.count(key.second))
        bad.push_back("data.theta0 references unknown road '" + key.second + "'");
      for (double v : s.vs)
        if (v < 0.0 || v > 1.0)
          bad.push_back("data.theta0." + key.first + "." + key.second + " leaves [0, 1]");
    }
    for (const auto& [path, s] : data.source_theta)
      if (!path_ids.count(path))
        bad.push_back("data.source_theta references unknown path '" + path + "'");
  }

  if (mode == "stability") {
    const Json s = cfg.value("stability", Json::object());
    if (!s.contains("bump_path") || !s.contains("balance_path"))
      bad.push_back("stability section needs bump_path and balance_path");
    if (s.value("deltas", std::vector<double>{}).empty())
      bad.push_back("stability section needs a nonempty deltas list");
  }
  if (mode == "bv-propagation") {
    const Json b = cfg.value("bv", Json::object());
    for (int m : b.value("multipliers", std::vector<int>{1, 2}))
      if (m < 1) bad.push_back("bv.multipliers must be positive");
  }
  if (mode == "counterexample") {
    const Json c = cfg.value("counterexample", Json::object());
    const int blocks = c.value("blocks", 8);
    if (blocks < 1 || blocks > 20) bad.push_back("counterexample.blocks must lie in [1, 20]");
    if (c.value("fv_cells", 1152) < 0) bad.push_back("counterexample.fv_cells must be >= 0");
  }
  if (mode == "verify-tv") {
    const Json v = cfg.value("verify_tv", Json::object());
    if (!v.contains("datum")) bad.push_back("verify_tv section needs a datum");
    if (v.value("positions", std::vector<double>{}).empty())
      bad.push_back("verify_tv section needs probe positions");
    if (v.value("cells", std::vector<int>{}).empty())
      bad.push_back("verify_tv section needs a cells list (refinement levels)");
    if (!(v.value("horizon", 0.0) > 0.0)) bad.push_back("verify_tv.horizon must be positive");
  }
  if (mode == "convergence") {
    const Json c = cfg.value("convergence", Json::object());
    if (!c.contains("datum")) bad.push_back("convergence section needs a datum");
    if (c.value("cells", std::vector<int>{}).empty())
      bad.push_back("convergence section needs a cells list");
    if (!(c.value("horizon", 0.0) > 0.0)) bad.push_back("convergence.horizon must be positive");
  }
  return bad;
}

}  // namespace lwrnet
