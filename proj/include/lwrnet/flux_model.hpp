#pragma once

// Road flux q(rho) = rho * v(rho) for a polynomial velocity law v.
// The model requires v(rho_max) = 0, v >= 0, and a unimodal flux profile:
// strictly increasing on [0, rho_star], non-increasing on [rho_star, rho_max].
// Junction coupling lives entirely on the increasing ("free") branch, where
// the flux can be inverted uniquely.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lwrnet/errors.hpp"

namespace lwrnet {

namespace detail {

inline double poly_eval(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
  return acc;
}

inline std::vector<double> poly_derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t i = 1; i < c.size(); ++i) d.push_back(static_cast<double>(i) * c[i]);
  if (d.empty()) d.push_back(0.0);
  return d;
}

}  // namespace detail

class FluxModel {
public:
  // v(rho) = v_free * (1 - rho / rho_max), the classic triangular-free-flow law.
  static FluxModel lwr_linear(double v_free = 1.0, double rho_max = 1.0) {
    if (!(v_free > 0.0) || !(rho_max > 0.0))
      throw ValidationError("lwr_linear: v_free and rho_max must be positive");
    return FluxModel({v_free, -v_free / rho_max}, rho_max);
  }

  // v(rho) = sum_i coeffs[i] * rho^i. The constructor rejects laws whose flux
  // is not unimodal or whose velocity goes negative on [0, rho_max].
  static FluxModel from_velocity_poly(std::vector<double> coeffs, double rho_max) {
    if (coeffs.empty()) throw ValidationError("velocity polynomial needs at least one coefficient");
    for (double c : coeffs)
      if (!std::isfinite(c)) throw ValidationError("velocity polynomial has a non-finite coefficient");
    if (!(rho_max > 0.0)) throw ValidationError("rho_max must be positive");
    return FluxModel(std::move(coeffs), rho_max);
  }

  double rho_max() const { return rho_max_; }
  double rho_star() const { return rho_star_; }
  double q_max() const { return q_max_; }

  double velocity(double rho) const { return detail::poly_eval(vel_, clamp_domain(rho)); }

  double flux(double rho) const {
    rho = clamp_domain(rho);
    return rho * detail::poly_eval(vel_, rho);
  }

  double flux_prime(double rho) const {
    rho = clamp_domain(rho);
    return detail::poly_eval(vel_, rho) + rho * detail::poly_eval(velp_, rho);
  }

  // Scalar-flux interface shared with the other flux types (Godunov kernel).
  double value(double u) const { return flux(u); }
  double deriv(double u) const { return flux_prime(u); }

  // Exact interval extrema: unimodality puts the minimum on an endpoint and
  // the maximum either on an endpoint or at rho_star. Requires a <= b.
  double min_on(double a, double b) const { return std::min(flux(a), flux(b)); }
  double max_on(double a, double b) const {
    if (a <= rho_star_ && rho_star_ <= b) return q_max_;
    return std::max(flux(a), flux(b));
  }

  double max_abs_deriv_on(double a, double b) const {
    if (a > b) std::swap(a, b);
    a = clamp_domain(a);
    b = clamp_domain(b);
    // The derivative is a low-degree polynomial; a modest sample is plenty
    // under the CFL safety factor used by the schemes.
    constexpr int kSamples = 128;
    double m = std::max(std::abs(flux_prime(a)), std::abs(flux_prime(b)));
    for (int i = 1; i < kSamples; ++i) {
      double rho = a + (b - a) * static_cast<double>(i) / kSamples;
      m = std::max(m, std::abs(flux_prime(rho)));
    }
    return m;
  }

  // Fastest transport speed over [a, b]. Fractions ride at v = g/rho, which
  // dominates g' wherever v is falling, so coupled runs must step against
  // this bound and not against max|g'| alone.
  double max_velocity_on(double a, double b) const {
    if (a > b) std::swap(a, b);
    a = clamp_domain(a);
    b = clamp_domain(b);
    constexpr int kSamples = 128;
    double m = std::max(velocity(a), velocity(b));
    for (int i = 1; i < kSamples; ++i) {
      double rho = a + (b - a) * static_cast<double>(i) / kSamples;
      m = std::max(m, velocity(rho));
    }
    return std::max(m, 0.0);
  }

  // Unique rho in [0, rho_star] with flux(rho) = q. Demands that overshoot
  // q_max by at most kInvertSlack are clamped to rho_star; anything larger is
  // infeasible for this road.
  double invert_flux_free(double q) const {
    if (!std::isfinite(q)) throw ValidationError("invert_flux_free: non-finite flux demand");
    if (q <= 0.0) {
      if (q < -kInvertSlack) throw ValidationError("invert_flux_free: negative flux demand");
      return 0.0;
    }
    if (q >= q_max_) {
      if (q > q_max_ + kInvertSlack)
        throw RegimeError("invert_flux_free: demand " + std::to_string(q) +
                          " exceeds the road capacity " + std::to_string(q_max_));
      return rho_star_;
    }
    double lo = 0.0, hi = rho_star_;
    while (hi - lo > kInvertTol) {
      double mid = 0.5 * (lo + hi);
      (flux(mid) < q ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  static constexpr double kInvertSlack = 1e-10;
  static constexpr double kInvertTol = 1e-12;

private:
  FluxModel(std::vector<double> vel, double rho_max)
      : vel_(std::move(vel)), velp_(detail::poly_derivative(vel_)), rho_max_(rho_max) {
    validate_and_locate_peak();
  }

  double clamp_domain(double rho) const {
    const double slack = 1e-9 * rho_max_;
    if (!(rho >= -slack && rho <= rho_max_ + slack))
      throw ValidationError("density " + std::to_string(rho) + " outside [0, rho_max=" +
                            std::to_string(rho_max_) + "]");
    return std::min(std::max(rho, 0.0), rho_max_);
  }

  void validate_and_locate_peak() {
    constexpr int kGrid = 10'000;
    std::vector<double> q(kGrid + 1);
    double v_scale = 0.0, q_scale = 0.0;
    for (int i = 0; i <= kGrid; ++i) {
      const double rho = rho_max_ * static_cast<double>(i) / kGrid;
      const double v = detail::poly_eval(vel_, rho);
      v_scale = std::max(v_scale, std::abs(v));
      q[i] = rho * v;
      q_scale = std::max(q_scale, std::abs(q[i]));
    }
    const double v_end = detail::poly_eval(vel_, rho_max_);
    if (std::abs(v_end) > 1e-9 * std::max(1.0, v_scale))
      throw ValidationError("velocity law must vanish at rho_max (v(rho_max) = " +
                            std::to_string(v_end) + ")");
    for (int i = 0; i <= kGrid; ++i) {
      const double rho = rho_max_ * static_cast<double>(i) / kGrid;
      if (detail::poly_eval(vel_, rho) < -1e-12 * std::max(1.0, v_scale))
        throw ValidationError("velocity law is negative at rho = " + std::to_string(rho));
    }
    int peak = 0;
    for (int i = 1; i <= kGrid; ++i)
      if (q[i] > q[peak]) peak = i;
    if (peak == 0 || peak == kGrid || !(q[peak] > 0.0))
      throw ValidationError("flux profile is degenerate: no interior maximum");
    const double mono_tol = 1e-12 * std::max(1.0, q_scale);
    for (int i = 0; i < kGrid; ++i) {
      const double d = q[i + 1] - q[i];
      if (i < peak && d < -mono_tol)
        throw ValidationError("flux profile is not unimodal (dip before its maximum)");
      if (i >= peak && d > mono_tol)
        throw ValidationError("flux profile is not unimodal (second rise after its maximum)");
    }
    // Refine the peak by bisecting the sign change of q' around the grid argmax.
    double lo = rho_max_ * static_cast<double>(peak - 1) / kGrid;
    double hi = rho_max_ * static_cast<double>(peak + 1) / kGrid;
    while (hi - lo > 1e-13 * rho_max_) {
      double mid = 0.5 * (lo + hi);
      (flux_prime_unchecked(mid) > 0.0 ? lo : hi) = mid;
    }
    rho_star_ = 0.5 * (lo + hi);
    q_max_ = rho_star_ * detail::poly_eval(vel_, rho_star_);
  }

  double flux_prime_unchecked(double rho) const {
    return detail::poly_eval(vel_, rho) + rho * detail::poly_eval(velp_, rho);
  }

  std::vector<double> vel_, velp_;
  double rho_max_ = 1.0;
  double rho_star_ = 0.0;
  double q_max_ = 0.0;
};

// Convex flux u^2 (interior minimum at 0). Not a road law - used by the
// regularity experiments, where the flux is genuinely nonmonotone.
struct QuadraticFlux {
  double value(double u) const { return u * u; }
  double deriv(double u) const { return 2.0 * u; }
  double min_on(double a, double b) const {
    return (a <= 0.0 && 0.0 <= b) ? 0.0 : std::min(a * a, b * b);
  }
  double max_on(double a, double b) const { return std::max(a * a, b * b); }
  double max_abs_deriv_on(double a, double b) const {
    return 2.0 * std::max(std::abs(a), std::abs(b));
  }
};

}  // namespace lwrnet
