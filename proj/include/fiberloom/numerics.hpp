#pragma once

#include <cmath>
#include <functional>

namespace fiberloom::numerics {

inline constexpr double kInvPhi = 0.6180339887498949;  // (sqrt(5) - 1) / 2

/// Golden-section search for a minimizer of a unimodal `f` on [lo, hi].
/// Stops once the bracket is narrower than `tol`.
template <typename F>
double golden_section_minimize(F&& f, double lo, double hi, double tol, int max_iter = 200) {
  double c = hi - kInvPhi * (hi - lo);
  double d = lo + kInvPhi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < max_iter && (hi - lo) > tol; ++i) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - kInvPhi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + kInvPhi * (hi - lo);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

/// Smallest x in [lo, hi] with pred(x) true, for a predicate that is false below
/// some threshold and true above it. Requires pred(hi). Returns the upper end of
/// the final bracket, so pred holds at the returned value.
template <typename Pred>
double bisect_threshold(Pred&& pred, double lo, double hi, double tol, int max_iter = 200) {
  for (int i = 0; i < max_iter && (hi - lo) > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (pred(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace fiberloom::numerics
