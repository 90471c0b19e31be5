#pragma once

// Piecewise-constant time series: the common currency for boundary traces
// (density, flux, type-flux) extracted from either solver engine.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lwrnet/errors.hpp"

namespace lwrnet {

enum class TraceKind { strong, distributional };
enum class TraceSide { alpha_plus, beta_minus, interior };

struct TraceSeries {
  std::vector<double> times;   // strictly increasing, times[0] is the start
  std::vector<double> values;  // values[i] rules [times[i], times[i+1][
  double horizon = 0.0;        // values.back() extends to this instant
  TraceKind kind = TraceKind::strong;
  TraceSide side = TraceSide::interior;

  void validate() const {
    if (times.empty() || times.size() != values.size())
      throw ValidationError("trace series needs matching, non-empty times/values");
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
      if (!(times[i] < times[i + 1]))
        throw ValidationError("trace series times must be strictly increasing");
    if (!(horizon >= times.back()))
      throw ValidationError("trace series horizon predates its last sample");
  }

  double operator()(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times.begin());
    return values[i == 0 ? 0 : i - 1];
  }

  double total_variation() const {
    double tv = 0.0;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) tv += std::abs(values[i + 1] - values[i]);
    return tv;
  }
};

// L1 distance on the overlap of the two series' spans, via the merged jump
// partition (both functions are constant between consecutive cut points).
inline double trace_l1_distance(const TraceSeries& a, const TraceSeries& b) {
  a.validate();
  b.validate();
  if (a.kind != b.kind)
    throw ValidationError("trace_l1_distance: cannot compare traces of different kinds");
  const double t0 = std::max(a.times.front(), b.times.front());
  const double t1 = std::min(a.horizon, b.horizon);
  if (!(t0 < t1)) return 0.0;
  std::vector<double> cuts{t0, t1};
  for (double t : a.times)
    if (t > t0 && t < t1) cuts.push_back(t);
  for (double t : b.times)
    if (t > t0 && t < t1) cuts.push_back(t);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    acc += std::abs(a(mid) - b(mid)) * (cuts[i + 1] - cuts[i]);
  }
  return acc;
}

// Orientation helper. Stored trace values are physical rightward flows; the
// distributional trace of the flux at a boundary carries the outward sign:
// entering flow at the left end shows up with a minus, exiting flow at the
// right end with a plus. Interior traces have no preferred normal.
inline double outward_sign(TraceSide side) {
  switch (side) {
    case TraceSide::alpha_plus: return -1.0;
    case TraceSide::beta_minus: return +1.0;
    case TraceSide::interior: return +1.0;
  }
  return +1.0;
}

inline TraceSeries with_outward_sign(TraceSeries s) {
  const double sgn = outward_sign(s.side);
  for (double& v : s.values) v *= sgn;
  return s;
}

}  // namespace lwrnet
