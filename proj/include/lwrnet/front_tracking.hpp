#pragma once

// Exact wave front tracking for scalar conservation laws with piecewise
// linear flux. Riemann fans are read off the convex (rising jump) or concave
// (falling jump) envelope of the flux between the two states, every front
// travels at its exact Rankine-Hugoniot speed, and pairwise collisions are
// resolved from a global event queue until the horizon. With data on the
// value lattice the whole evolution stays on the lattice, so variation
// bookkeeping is exact in double arithmetic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "lwrnet/errors.hpp"
#include "lwrnet/piecewise_linear.hpp"
#include "lwrnet/step_function.hpp"
#include "lwrnet/trace_series.hpp"

namespace lwrnet {

struct Front {
  double birth_time = 0.0;
  double birth_pos = 0.0;
  double speed = 0.0;
  double left = 0.0;   // state to the left of the discontinuity
  double right = 0.0;  // state to the right
  double position(double t) const { return birth_pos + speed * (t - birth_time); }
};

struct CollisionRecord {
  double time = 0.0;
  double pos = 0.0;
  int incoming = 0;  // fronts merged by the event
  int outgoing = 0;  // fronts in the replacing fan
};

// Riemann fan between two lattice states: the chords of the lower convex
// envelope for u_l < u_r, of the upper concave envelope for u_l > u_r.
// Fronts are emitted left-to-right with strictly increasing speeds.
inline std::vector<Front> solve_riemann_pl(const PiecewiseLinearFlux& f, double u_l, double u_r,
                                           double t0 = 0.0, double x0 = 0.0) {
  const std::int64_t a = f.index_of(u_l);
  const std::int64_t b = f.index_of(u_r);
  std::vector<Front> fan;
  if (a == b) return fan;

  const std::int64_t lo = std::min(a, b), hi = std::max(a, b);
  // cross(o,p,q) in index/value coordinates; the integer abscissae keep the
  // orientation test well conditioned.
  const auto cross = [&f](std::int64_t o, std::int64_t p, std::int64_t q) {
    const double fo = f.value_at_index(o), fp = f.value_at_index(p), fq = f.value_at_index(q);
    return static_cast<double>(p - o) * (fq - fo) - (fp - fo) * static_cast<double>(q - o);
  };

  std::vector<std::int64_t> hull;
  hull.reserve(static_cast<std::size_t>(hi - lo) + 1);
  if (a < b) {
    // Lower convex envelope: pop while the middle point is not strictly below
    // the chord, which also merges collinear (zero-strength) vertices.
    for (std::int64_t j = lo; j <= hi; ++j) {
      while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), j) <= 0.0)
        hull.pop_back();
      hull.push_back(j);
    }
  } else {
    // Upper concave envelope over [u_r, u_l].
    for (std::int64_t j = lo; j <= hi; ++j) {
      while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), j) >= 0.0)
        hull.pop_back();
      hull.push_back(j);
    }
  }

  const auto chord = [&f](std::int64_t p, std::int64_t q) {
    return (f.value_at_index(q) - f.value_at_index(p)) /
           (static_cast<double>(q - p) * f.h());
  };
  if (a < b) {
    for (std::size_t m = 0; m + 1 < hull.size(); ++m)
      fan.push_back({t0, x0, chord(hull[m], hull[m + 1]), f.breakpoint(hull[m]),
                     f.breakpoint(hull[m + 1])});
  } else {
    // Traverse from the left state (top of the hull) down to the right state;
    // concavity makes the chord slopes increase along the way.
    for (std::size_t m = hull.size() - 1; m-- > 0;)
      fan.push_back({t0, x0, chord(hull[m], hull[m + 1]), f.breakpoint(hull[m + 1]),
                     f.breakpoint(hull[m])});
  }
  for (std::size_t m = 0; m + 1 < fan.size(); ++m)
    if (!(fan[m].speed < fan[m + 1].speed))
      throw InternalError("Riemann fan speeds are not strictly increasing");
  return fan;
}

// Oleinik chord condition against the sampled flux, used as a test oracle:
// a falling jump must ride on (or above) the flux at every intermediate
// lattice point, a rising jump on or below it.
inline bool front_is_admissible(const PiecewiseLinearFlux& f, double left, double right,
                                double tol = 1e-12) {
  const std::int64_t a = f.index_of(left), b = f.index_of(right);
  if (a == b) return false;
  const std::int64_t lo = std::min(a, b), hi = std::max(a, b);
  const double fa = f.value_at_index(a), fb = f.value_at_index(b);
  for (std::int64_t j = lo + 1; j < hi; ++j) {
    const double t = static_cast<double>(j - a) / static_cast<double>(b - a);
    const double on_chord = fa + t * (fb - fa);
    const double fj = f.value_at_index(j);
    if (a < b && fj < on_chord - tol) return false;  // rising jump: chord below the flux
    if (a > b && fj > on_chord + tol) return false;  // falling jump: chord above the flux
  }
  return true;
}

struct FrontTrackingSolution {
  struct Slice {
    double time = 0.0;
    double leftmost = 0.0;      // state to the left of every front
    std::vector<Front> fronts;  // anchored at `time`, sorted by position
  };

  double horizon = 0.0;
  bool bounded_domain = false;
  double alpha = -std::numeric_limits<double>::infinity();
  double beta = std::numeric_limits<double>::infinity();
  double sample_span = 1.0;  // used to scale the collision-avoidance nudge

  std::vector<Slice> slices;  // slices[s] rules [slices[s].time, next time[
  std::vector<CollisionRecord> collisions;
  std::vector<Front> birth_log;  // every front ever created, in birth order
  std::vector<std::pair<double, double>> boundary_changes;  // (t, inflow value)
  int max_live_fronts = 0;
  int peak_fan_width = 0;

  const Slice& slice_at(double t) const {
    if (slices.empty()) throw InternalError("front tracking solution has no slices");
    std::size_t lo = 0, hi = slices.size();
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (slices[mid].time <= t ? lo : hi) = mid;
    }
    return slices[lo];
  }
};

namespace detail {

class FtEngine {
public:
  FtEngine(const PiecewiseLinearFlux& f, double horizon) : f_(f) {
    if (!(horizon > 0.0)) throw ValidationError("front tracking horizon must be positive");
    out_.horizon = horizon;
  }

  void seed(const StepFunction& u0, double leftmost_override, bool has_override, double x_override) {
    for (double v : u0.vs)
      if (!f_.is_lattice(v))
        throw ValidationError("front tracking datum must take lattice values inside the sampled flux range");
    leftmost_ = u0.vs.front();
    double lo_x = u0.xs.empty() ? 0.0 : u0.xs.front();
    double hi_x = u0.xs.empty() ? 0.0 : u0.xs.back();
    if (has_override) {
      // Prepend the boundary state: datum for x < x_override.
      leftmost_ = leftmost_override;
      lo_x = std::min(lo_x, x_override);
      if (!f_.is_lattice(leftmost_override))
        throw ValidationError("inflow values must be lattice values");
      append_fan(solve_riemann_pl(f_, leftmost_override, u0.vs.front(), 0.0, x_override));
    }
    for (std::size_t i = 0; i < u0.xs.size(); ++i)
      append_fan(solve_riemann_pl(f_, u0.vs[i], u0.vs[i + 1], 0.0, u0.xs[i]));
    out_.sample_span = std::max(1.0, hi_x - lo_x);
    for (int i = head_; i != -1; i = nodes_[i].next)
      if (nodes_[i].next != -1) push_event(i, nodes_[i].next);
    record_slice(0.0);
  }

  void set_boundary_schedule(std::vector<std::pair<double, double>> schedule, double alpha) {
    boundary_ = std::move(schedule);
    boundary_alpha_ = alpha;
    for (auto& [t, v] : boundary_)
      if (!f_.is_lattice(v)) throw ValidationError("inflow values must be lattice values");
  }

  FrontTrackingSolution run() {
    std::size_t bi = 0;
    while (true) {
      purge_stale();
      const double t_event = queue_.empty() ? kInf : queue_.top().time;
      const double t_bound = bi < boundary_.size() ? boundary_[bi].first : kInf;
      const double t_next = std::min(t_event, t_bound);
      if (t_next > out_.horizon || t_next == kInf) break;
      if (t_bound <= t_event) {
        process_boundary(boundary_[bi].first, boundary_[bi].second);
        ++bi;
      } else {
        process_collision();
      }
    }
    return std::move(out_);
  }

  FrontTrackingSolution& out() { return out_; }

private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  static constexpr double kTimeTol = 1e-13;

  struct Node {
    double ref_t = 0.0, pos = 0.0, speed = 0.0, left = 0.0, right = 0.0;
    int prev = -1, next = -1;
    bool alive = true;
  };

  struct Event {
    double time, pos;
    int a, b;
    bool operator>(const Event& o) const {
      if (time != o.time) return time > o.time;
      return pos > o.pos;  // simultaneous collisions resolve left to right
    }
  };

  double pos_at(int i, double t) const {
    const Node& n = nodes_[i];
    return n.pos + n.speed * (t - n.ref_t);
  }

  int new_node(double t, double x, const Front& fr) {
    Node n;
    n.ref_t = t;
    n.pos = x;
    n.speed = fr.speed;
    n.left = fr.left;
    n.right = fr.right;
    nodes_.push_back(n);
    out_.birth_log.push_back({t, x, fr.speed, fr.left, fr.right});
    return static_cast<int>(nodes_.size()) - 1;
  }

  // Appends a fan born at the datum seeding stage to the end of the list.
  void append_fan(const std::vector<Front>& fan) {
    for (const Front& fr : fan) {
      const int id = new_node(fr.birth_time, fr.birth_pos, fr);
      nodes_[id].prev = tail_;
      if (tail_ != -1)
        nodes_[tail_].next = id;
      else
        head_ = id;
      tail_ = id;
    }
    live_ += static_cast<int>(fan.size());
    out_.max_live_fronts = std::max(out_.max_live_fronts, live_);
  }

  void push_event(int a, int b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (!(na.speed > nb.speed)) return;  // never meet
    const double gap = pos_at(b, t_now_) - pos_at(a, t_now_);
    if (gap < -1e-9 * (1.0 + std::abs(nodes_[a].pos)))
      throw InternalError("front ordering violated before a collision was scheduled");
    double t = t_now_ + std::max(gap, 0.0) / (na.speed - nb.speed);
    queue_.push({t, pos_at(a, t), a, b});
  }

  bool event_valid(const Event& e) const {
    return nodes_[e.a].alive && nodes_[e.b].alive && nodes_[e.a].next == e.b;
  }

  void purge_stale() {
    while (!queue_.empty() && !event_valid(queue_.top())) queue_.pop();
  }

  void process_collision() {
    const Event ev = queue_.top();
    queue_.pop();
    if (ev.time < t_now_ - kTimeTol)
      throw InternalError("event queue time regressed beyond tolerance");
    const double t = std::max(ev.time, t_now_);
    t_now_ = t;
    const double xstar = pos_at(ev.a, t);
    const double eps_x = 1e-12 * (1.0 + std::abs(xstar));

    int L = ev.a, R = ev.b;
    while (nodes_[L].prev != -1 && std::abs(pos_at(nodes_[L].prev, t) - xstar) <= eps_x)
      L = nodes_[L].prev;
    while (nodes_[R].next != -1 && std::abs(pos_at(nodes_[R].next, t) - xstar) <= eps_x)
      R = nodes_[R].next;

    const double uL = nodes_[L].left;
    const double uR = nodes_[R].right;
    const int p = nodes_[L].prev;
    const int n = nodes_[R].next;

    int killed = 0;
    for (int i = L;; i = nodes_[i].next) {
      nodes_[i].alive = false;
      ++killed;
      if (i == R) break;
    }
    live_ -= killed;

    const std::vector<Front> fan = solve_riemann_pl(f_, uL, uR, t, xstar);
    link_fan(fan, p, n, t, xstar);
    out_.collisions.push_back({t, xstar, killed, static_cast<int>(fan.size())});
    out_.peak_fan_width = std::max(out_.peak_fan_width, static_cast<int>(fan.size()));
    record_slice(t);
  }

  void process_boundary(double t, double value) {
    if (t < t_now_ - kTimeTol) throw InternalError("boundary schedule time regressed");
    t_now_ = std::max(t_now_, t);
    const double u_inside = (head_ != -1) ? nodes_[head_].left : leftmost_;
    out_.boundary_changes.emplace_back(t, value);
    if (value == u_inside) {
      leftmost_ = value;
      return;
    }
    const std::vector<Front> fan = solve_riemann_pl(f_, value, u_inside, t, boundary_alpha_);
    link_fan(fan, -1, head_, t, boundary_alpha_);
    leftmost_ = value;
    record_slice(t);
  }

  void link_fan(const std::vector<Front>& fan, int p, int n, double t, double x) {
    int prev = p;
    for (const Front& fr : fan) {
      const int id = new_node(t, x, fr);
      nodes_[id].prev = prev;
      if (prev != -1)
        nodes_[prev].next = id;
      else
        head_ = id;
      prev = id;
    }
    if (prev != -1)
      nodes_[prev].next = n;
    else
      head_ = n;
    if (n != -1)
      nodes_[n].prev = prev;
    else
      tail_ = prev;
    live_ += static_cast<int>(fan.size());
    out_.max_live_fronts = std::max(out_.max_live_fronts, live_);
    if (p != -1 && nodes_[p].next != -1) push_event(p, nodes_[p].next);
    if (prev != -1 && nodes_[prev].next != -1) push_event(prev, nodes_[prev].next);
  }

  void record_slice(double t) {
    FrontTrackingSolution::Slice s;
    s.time = t;
    s.leftmost = leftmost_;
    double last = -kInf;
    for (int i = head_; i != -1; i = nodes_[i].next) {
      const double px = pos_at(i, t);
      if (px < last - 1e-9 * (1.0 + std::abs(px)))
        throw InternalError("front positions out of order while recording a slice");
      last = std::max(last, px);
      s.fronts.push_back({t, px, nodes_[i].speed, nodes_[i].left, nodes_[i].right});
    }
    out_.slices.push_back(std::move(s));
  }

  const PiecewiseLinearFlux& f_;
  FrontTrackingSolution out_;
  std::vector<Node> nodes_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  std::vector<std::pair<double, double>> boundary_;
  double boundary_alpha_ = 0.0;
  int head_ = -1, tail_ = -1;
  int live_ = 0;
  double leftmost_ = 0.0;
  double t_now_ = 0.0;
};

}  // namespace detail

// Cauchy evolution of a lattice-valued step datum up to the horizon.
inline FrontTrackingSolution evolve(const PiecewiseLinearFlux& f, const StepFunction& u0,
                                    double horizon) {
  detail::FtEngine engine(f, horizon);
  engine.seed(u0, 0.0, false, 0.0);
  return engine.run();
}

// Initial-boundary value problem on [alpha, beta] with inflow data at alpha,
// for fluxes that are nondecreasing on the attained value range (every wave
// then travels rightward and the boundary data are attained exactly). The
// solution is the restriction of a whole-line evolution whose datum carries
// the inflow state left of alpha; inflow jumps inject boundary Riemann fans.
inline FrontTrackingSolution solve_ibvp_ft(const PiecewiseLinearFlux& f, const StepFunction& u0,
                                           const StepFunction& inflow, double alpha, double beta,
                                           double horizon) {
  if (!(alpha < beta)) throw ValidationError("solve_ibvp_ft: need alpha < beta");
  for (double t : inflow.xs)
    if (!(t > 0.0 && t < horizon))
      throw ValidationError("inflow jump times must lie strictly inside ]0, horizon[");
  for (double x : u0.xs)
    if (!(x > alpha && x < beta))
      throw ValidationError("datum jump points must lie strictly inside ]alpha, beta[");

  double lo = u0.vs.front(), hi = lo;
  for (double v : u0.vs) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : inflow.vs) lo = std::min(lo, v), hi = std::max(hi, v);
  if (f.min_slope_on(lo, hi) < 0.0)
    throw RegimeError("solve_ibvp_ft: flux must be nondecreasing on the attained range "
                      "for the boundary coupling to be exact");

  detail::FtEngine engine(f, horizon);
  engine.seed(u0, inflow.vs.front(), true, alpha);
  std::vector<std::pair<double, double>> schedule;
  for (std::size_t i = 0; i < inflow.xs.size(); ++i)
    schedule.emplace_back(inflow.xs[i], inflow.vs[i + 1]);
  engine.set_boundary_schedule(std::move(schedule), alpha);
  engine.out().boundary_changes.emplace_back(0.0, inflow.vs.front());
  FrontTrackingSolution sol = engine.run();
  sol.bounded_domain = true;
  sol.alpha = alpha;
  sol.beta = beta;
  sol.sample_span = beta - alpha;
  return sol;
}

namespace detail {

inline double eval_slice(const FrontTrackingSolution::Slice& s, double t, double x,
                         bool right_limit) {
  double v = s.leftmost;
  for (const Front& fr : s.fronts) {
    const double p = fr.position(t);
    if (right_limit ? (p <= x) : (p < x))
      v = fr.right;
    else
      break;
  }
  return v;
}

}  // namespace detail

struct TimeTrace {
  TraceSeries series;
  double x_requested = 0.0;
  double x_used = 0.0;
  bool nudged = false;
};

// Piecewise-constant time trace t -> u(t, x+) (or x-) with exact crossing
// times. If x sits on a collision point (within 1e-13) the sampler nudges it
// by 1e-9 of the domain span and flags the result.
inline TimeTrace sample_time_trace(const FrontTrackingSolution& sol, double x,
                                   bool right_limit = true) {
  TimeTrace out;
  out.x_requested = x;

  if (sol.bounded_domain && x == sol.alpha && right_limit) {
    // The trace at the inflow end is the attained boundary state itself.
    out.x_used = x;
    std::vector<std::pair<double, double>> raw(sol.boundary_changes);
    if (raw.empty()) raw.emplace_back(0.0, sol.slices.front().leftmost);
    TraceSeries& s = out.series;
    for (const auto& [t, v] : raw) {
      if (!s.times.empty() && s.times.back() == t) {
        s.values.back() = v;
        continue;
      }
      if (!s.values.empty() && s.values.back() == v) continue;
      s.times.push_back(t);
      s.values.push_back(v);
    }
    s.horizon = sol.horizon;
    s.kind = TraceKind::strong;
    s.side = TraceSide::alpha_plus;
    return out;
  }

  for (int attempt = 0; attempt < 100; ++attempt) {
    bool clash = false;
    for (const CollisionRecord& c : sol.collisions)
      if (std::abs(c.pos - x) <= 1e-13) {
        clash = true;
        break;
      }
    if (!clash) break;
    x += 1e-9 * sol.sample_span;
    out.nudged = true;
  }
  out.x_used = x;

  std::vector<std::pair<double, double>> raw;
  for (std::size_t s = 0; s < sol.slices.size(); ++s) {
    const auto& slice = sol.slices[s];
    const double t_end = (s + 1 < sol.slices.size()) ? sol.slices[s + 1].time : sol.horizon;
    raw.emplace_back(slice.time, detail::eval_slice(slice, slice.time, x, right_limit));
    std::vector<std::pair<double, double>> crossings;
    for (const Front& fr : slice.fronts) {
      if (fr.speed == 0.0) continue;
      const double tc = fr.birth_time + (x - fr.birth_pos) / fr.speed;
      if (tc > slice.time && tc < t_end)
        crossings.emplace_back(tc, fr.speed > 0.0 ? fr.left : fr.right);
    }
    std::sort(crossings.begin(), crossings.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    raw.insert(raw.end(), crossings.begin(), crossings.end());
  }

  TraceSeries& s = out.series;
  for (const auto& [t, v] : raw) {
    if (!s.times.empty() && s.times.back() == t) {
      s.values.back() = v;
      if (s.values.size() >= 2 && s.values[s.values.size() - 2] == v) {
        s.values.pop_back();
        s.times.pop_back();
      }
      continue;
    }
    if (!s.values.empty() && s.values.back() == v) continue;
    s.times.push_back(t);
    s.values.push_back(v);
  }
  if (s.times.empty()) {
    s.times.push_back(0.0);
    s.values.push_back(sol.slices.front().leftmost);
  }
  s.horizon = sol.horizon;
  s.kind = TraceKind::strong;
  s.side = TraceSide::interior;
  return out;
}

// Spatial profile at time t (clamped to [0, horizon]). Zero-width pieces of
// freshly born fans collapse into a single jump. For a bounded-domain run the
// profile is clipped to [alpha, beta].
inline StepFunction sample_space_profile(const FrontTrackingSolution& sol, double t) {
  t = std::min(std::max(t, 0.0), sol.horizon);
  const auto& slice = sol.slice_at(t);
  std::vector<double> xs;
  std::vector<double> vs{slice.leftmost};
  for (const Front& fr : slice.fronts) {
    const double p = fr.position(t);
    if (!xs.empty() && p <= xs.back()) {
      if (p < xs.back() - 1e-9 * (1.0 + std::abs(p)))
        throw InternalError("profile breakpoints out of order");
      vs.back() = fr.right;  // zero-width intermediate state collapses
    } else {
      xs.push_back(p);
      vs.push_back(fr.right);
    }
  }
  StepFunction profile(std::move(xs), std::move(vs));
  if (!sol.bounded_domain) return profile;

  std::vector<double> cx;
  std::vector<double> cv{profile(sol.alpha)};
  for (std::size_t i = 0; i < profile.xs.size(); ++i) {
    if (profile.xs[i] <= sol.alpha || profile.xs[i] >= sol.beta) continue;
    cx.push_back(profile.xs[i]);
    cv.push_back(profile.vs[i + 1]);
  }
  return StepFunction(std::move(cx), std::move(cv));
}

}  // namespace lwrnet
