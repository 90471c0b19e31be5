#pragma once

// Piecewise-constant functions of one variable, used for initial data,
// boundary series (as functions of time) and front-tracking profiles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "lwrnet/errors.hpp"

namespace lwrnet {

struct StepFunction {
  std::vector<double> xs;  // strictly increasing jump abscissae
  std::vector<double> vs;  // xs.size()+1 values; vs[i] rules ]xs[i-1], xs[i][

  StepFunction() : vs{0.0} {}
  explicit StepFunction(double c) : vs{c} {}
  StepFunction(std::vector<double> xs_, std::vector<double> vs_)
      : xs(std::move(xs_)), vs(std::move(vs_)) {
    if (vs.size() != xs.size() + 1)
      throw ValidationError("step function needs one more value than jump points");
    for (double v : vs)
      if (!std::isfinite(v)) throw ValidationError("step function has a non-finite value");
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
      if (!(xs[i] < xs[i + 1]))
        throw ValidationError("step function jump points must be strictly increasing");
    merge_equal();
  }

  static StepFunction constant(double c) { return StepFunction(c); }

  // Right-continuous evaluation: at a jump point the right piece wins.
  double operator()(double x) const {
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    return vs[static_cast<std::size_t>(it - xs.begin())];
  }

  double value_left(double x) const {
    const auto it = std::lower_bound(xs.begin(), xs.end(), x);
    return vs[static_cast<std::size_t>(it - xs.begin())];
  }

  std::size_t piece_count() const { return vs.size(); }

  double integral(double a, double b) const {
    if (!(a <= b)) throw ValidationError("integral: empty interval");
    double acc = 0.0, lo = a;
    for (std::size_t i = 0; i < xs.size() && lo < b; ++i) {
      if (xs[i] <= lo) continue;
      const double hi = std::min(xs[i], b);
      acc += vs[i] * (hi - lo);
      lo = hi;
    }
    if (lo < b) acc += vs.back() * (b - lo);
    return acc;
  }

  // Drops zero-strength jumps in place.
  void merge_equal() {
    std::vector<double> nx;
    std::vector<double> nv{vs[0]};
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (vs[i + 1] != nv.back()) {
        nx.push_back(xs[i]);
        nv.push_back(vs[i + 1]);
      }
    }
    xs = std::move(nx);
    vs = std::move(nv);
  }
};

inline double total_variation(const StepFunction& u) {
  double tv = 0.0;
  for (std::size_t i = 0; i + 1 < u.vs.size(); ++i) tv += std::abs(u.vs[i + 1] - u.vs[i]);
  return tv;
}

// L1 distance; +infinity when the functions disagree at either tail (the
// difference is then not integrable).
inline double l1_distance(const StepFunction& a, const StepFunction& b) {
  if (a.vs.front() != b.vs.front() || a.vs.back() != b.vs.back())
    return std::numeric_limits<double>::infinity();
  std::vector<double> cuts;
  cuts.reserve(a.xs.size() + b.xs.size());
  cuts.insert(cuts.end(), a.xs.begin(), a.xs.end());
  cuts.insert(cuts.end(), b.xs.begin(), b.xs.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    acc += std::abs(a(mid) - b(mid)) * (cuts[i + 1] - cuts[i]);
  }
  return acc;
}

// Nearest lattice point of u * 2^nu, ties rounded toward zero so that the
// quantization never pushes a value away from the origin on a tie.
inline double round_to_lattice(double u, int nu) {
  const double s = std::ldexp(u, nu);
  const double fl = std::floor(s);
  const double frac = s - fl;
  double j;
  if (frac > 0.5)
    j = fl + 1.0;
  else if (frac < 0.5)
    j = fl;
  else
    j = (s >= 0.0) ? fl : fl + 1.0;  // tie: pick the lattice point closer to 0
  return std::ldexp(j, -nu);
}

// Projects the values of a step datum onto the lattice 2^-nu * Z and merges
// jumps that collapse. Total variation can grow by at most 2^-nu per jump.
inline StepFunction quantize_datum(const StepFunction& u, int nu) {
  StepFunction q = u;
  for (double& v : q.vs) v = round_to_lattice(v, nu);
  q.merge_equal();
  return q;
}

}  // namespace lwrnet
