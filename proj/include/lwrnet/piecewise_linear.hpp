#pragma once

// Piecewise linear interpolation of a flux on the dyadic lattice 2^-nu * Z.
// Breakpoint values are the exact flux values, so chords between lattice
// points carry exact Rankine-Hugoniot speeds and interval extrema can be
// read off the breakpoints.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lwrnet/errors.hpp"

namespace lwrnet {

class PiecewiseLinearFlux {
public:
  template <class F>
  static PiecewiseLinearFlux sample(F&& f, int nu, double u_min, double u_max) {
    if (!(u_min < u_max)) throw ValidationError("piecewise linear flux: empty value range");
    if (nu < 0 || nu > 40) throw ValidationError("piecewise linear flux: nu out of range");
    PiecewiseLinearFlux pl;
    pl.nu_ = nu;
    pl.h_ = std::ldexp(1.0, -nu);
    pl.j_lo_ = static_cast<std::int64_t>(std::floor(std::ldexp(u_min, nu) + 1e-12));
    pl.j_hi_ = static_cast<std::int64_t>(std::ceil(std::ldexp(u_max, nu) - 1e-12));
    if (pl.j_hi_ <= pl.j_lo_) pl.j_hi_ = pl.j_lo_ + 1;
    pl.fv_.reserve(static_cast<std::size_t>(pl.j_hi_ - pl.j_lo_ + 1));
    for (std::int64_t j = pl.j_lo_; j <= pl.j_hi_; ++j) {
      const double u = std::ldexp(static_cast<double>(j), -nu);
      if constexpr (requires { f(u); })
        pl.fv_.push_back(f(u));
      else
        pl.fv_.push_back(f.value(u));
    }
    return pl;
  }

  std::size_t breakpoint_count() const { return fv_.size(); }

  int nu() const { return nu_; }
  double h() const { return h_; }
  double u_min() const { return breakpoint(j_lo_); }
  double u_max() const { return breakpoint(j_hi_); }
  std::int64_t j_lo() const { return j_lo_; }
  std::int64_t j_hi() const { return j_hi_; }

  double breakpoint(std::int64_t j) const { return std::ldexp(static_cast<double>(j), -nu_); }
  double value_at_index(std::int64_t j) const {
    check_index(j);
    return fv_[static_cast<std::size_t>(j - j_lo_)];
  }

  // Chord slope of the lattice cell [j, j+1].
  double cell_slope(std::int64_t j) const {
    check_index(j);
    check_index(j + 1);
    return (fv_[static_cast<std::size_t>(j + 1 - j_lo_)] -
            fv_[static_cast<std::size_t>(j - j_lo_)]) / h_;
  }

  // Nearest lattice index; rejects values that are not lattice points.
  std::int64_t index_of(double u) const {
    const double s = std::ldexp(u, nu_);
    const std::int64_t j = static_cast<std::int64_t>(std::llround(s));
    if (std::abs(u - breakpoint(j)) > 1e-12)
      throw ValidationError("value " + std::to_string(u) + " is not on the 2^-" +
                            std::to_string(nu_) + " lattice");
    check_index(j);
    return j;
  }

  bool is_lattice(double u) const {
    const double s = std::ldexp(u, nu_);
    const std::int64_t j = static_cast<std::int64_t>(std::llround(s));
    return std::abs(u - breakpoint(j)) <= 1e-12 && j >= j_lo_ && j <= j_hi_;
  }

  double value(double u) const {
    std::int64_t j = cell_of(u);
    const double xj = breakpoint(j);
    const double t = (u - xj) / h_;  // in [0, 1] within the cell
    return t * fv_[static_cast<std::size_t>(j + 1 - j_lo_)] +
           (1.0 - t) * fv_[static_cast<std::size_t>(j - j_lo_)];
  }

  // One-sided derivative: the slope of the cell to the right (left at u_max).
  double deriv(double u) const { return cell_slope(cell_of(u)); }

  double min_on(double a, double b) const { return extremum_on(a, b, /*want_max=*/false); }
  double max_on(double a, double b) const { return extremum_on(a, b, /*want_max=*/true); }

  double max_abs_deriv_on(double a, double b) const {
    if (a > b) std::swap(a, b);
    const std::int64_t lo = cell_of(a), hi = cell_of(std::nextafter(b, a));
    double m = 0.0;
    for (std::int64_t j = lo; j <= hi; ++j) m = std::max(m, std::abs(cell_slope(j)));
    return m;
  }

  double min_slope_on(double a, double b) const {
    if (a > b) std::swap(a, b);
    if (a == b) return 0.0;
    const std::int64_t lo = cell_of(a), hi = cell_of(std::nextafter(b, a));
    double m = cell_slope(lo);
    for (std::int64_t j = lo; j <= hi; ++j) m = std::min(m, cell_slope(j));
    return m;
  }

private:
  PiecewiseLinearFlux() = default;

  void check_index(std::int64_t j) const {
    if (j < j_lo_ || j > j_hi_)
      throw ValidationError("lattice index " + std::to_string(j) + " outside the sampled range");
  }

  // Cell index j with breakpoint(j) <= u < breakpoint(j+1), clamped at the top.
  std::int64_t cell_of(double u) const {
    if (u < breakpoint(j_lo_) - 1e-12 || u > breakpoint(j_hi_) + 1e-12)
      throw ValidationError("value " + std::to_string(u) + " outside the sampled flux range");
    std::int64_t j = static_cast<std::int64_t>(std::floor(std::ldexp(u, nu_)));
    return std::max(j_lo_, std::min(j, j_hi_ - 1));
  }

  double extremum_on(double a, double b, bool want_max) const {
    if (a > b) std::swap(a, b);
    double best = want_max ? std::max(value(a), value(b)) : std::min(value(a), value(b));
    const std::int64_t lo = cell_of(a), hi = cell_of(std::nextafter(b, a));
    for (std::int64_t j = lo + 1; j <= hi; ++j) {
      const double fj = fv_[static_cast<std::size_t>(j - j_lo_)];
      best = want_max ? std::max(best, fj) : std::min(best, fj);
    }
    return best;
  }

  int nu_ = 0;
  double h_ = 1.0;
  std::int64_t j_lo_ = 0, j_hi_ = 0;
  std::vector<double> fv_;
};

}  // namespace lwrnet
