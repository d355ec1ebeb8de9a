#include "fiberloom/bezier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

#include "fiberloom/errors.hpp"
#include "fiberloom/numerics.hpp"

namespace fiberloom {

Point2 QuadBezier::at(double t) const {
  const double s = 1.0 - t;
  return p0 * (s * s) + p1 * (2.0 * s * t) + p2 * (t * t);
}

Point2 QuadBezier::d1(double t) const { return (p1 - p0) * (2.0 * (1.0 - t)) + (p2 - p1) * (2.0 * t); }

Point2 QuadBezier::d2(double) const { return (p2 - p1 * 2.0 + p0) * 2.0; }

Point2 CubicBezier::at(double t) const {
  const double s = 1.0 - t;
  return p0 * (s * s * s) + p1 * (3.0 * s * s * t) + p2 * (3.0 * s * t * t) + p3 * (t * t * t);
}

Point2 CubicBezier::d1(double t) const {
  const double s = 1.0 - t;
  return (p1 - p0) * (3.0 * s * s) + (p2 - p1) * (6.0 * s * t) + (p3 - p2) * (3.0 * t * t);
}

Point2 CubicBezier::d2(double t) const {
  return (p2 - p1 * 2.0 + p0) * (6.0 * (1.0 - t)) + (p3 - p2 * 2.0 + p1) * (6.0 * t);
}

namespace {

void check_range(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("curve parameter outside [0, 1]");
}

Point2 raw_d1(const Curve& c, double t) {
  return std::visit([t](const auto& b) { return b.d1(t); }, c);
}

Point2 raw_d2(const Curve& c, double t) {
  return std::visit([t](const auto& b) { return b.d2(t); }, c);
}

Point2 raw_at(const Curve& c, double t) {
  return std::visit([t](const auto& b) { return b.at(t); }, c);
}

// Largest control-polygon extent; the length scale for "numerically zero" tests.
double extent(const Curve& c) {
  return std::visit(
      [](const auto& b) {
        double e = distance(b.p0, b.p1);
        if constexpr (std::is_same_v<std::decay_t<decltype(b)>, QuadBezier>) {
          e = std::max({e, distance(b.p1, b.p2), distance(b.p0, b.p2)});
        } else {
          e = std::max({e, distance(b.p1, b.p2), distance(b.p2, b.p3), distance(b.p0, b.p3)});
        }
        return e;
      },
      c);
}

// Signed curvature, or +/-infinity where the derivative vanishes.
double curvature_or_inf(const Curve& c, double t) {
  const Point2 a = raw_d1(c, t);
  const Point2 b = raw_d2(c, t);
  const double speed2 = dot(a, a);
  if (speed2 == 0.0) return std::numeric_limits<double>::infinity();
  return cross(a, b) / (speed2 * std::sqrt(speed2));
}

CurvatureMax scan_max_curvature(const Curve& c, int samples, double tol) {
  samples = std::max(samples, 3);
  int best = 0;
  double best_abs = -1.0;
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    const double k = std::abs(curvature_or_inf(c, t));
    if (k > best_abs) {
      best_abs = k;
      best = i;
    }
  }
  const double lo = static_cast<double>(std::max(best - 1, 0)) / (samples - 1);
  const double hi = static_cast<double>(std::min(best + 1, samples - 1)) / (samples - 1);
  const double t_scan = static_cast<double>(best) / (samples - 1);
  if (std::isinf(best_abs)) return {t_scan, best_abs};
  const double t_ref = numerics::golden_section_minimize(
      [&](double t) { return -std::abs(curvature_or_inf(c, t)); }, lo, hi, tol);
  const double k_ref = curvature_or_inf(c, t_ref);
  if (std::abs(k_ref) >= best_abs) return {t_ref, k_ref};
  return {t_scan, curvature_or_inf(c, t_scan)};
}

// ---- curvature-optimal cubic in a canonical frame -------------------------
// U at the origin, V = (1, 0), W = ratio * (cos angle, sin angle). The optimum
// scales linearly with the legs, so one canonical solve serves every size.

struct CanonicalFit {
  double cs = 0.0;
  double ct = 0.0;
};

constexpr int kOptScanSamples = 64;
constexpr double kOptTol = 1e-6;
constexpr int kMaxSweeps = 50;

CubicBezier canonical_cubic(double angle, double ratio, double cs, double ct) {
  const Point2 dir{std::cos(angle), std::sin(angle)};
  return CubicBezier{{1.0, 0.0}, {cs, 0.0}, dir * ct, dir * ratio};
}

double canonical_objective(double angle, double ratio, double cs, double ct) {
  const Curve c = canonical_cubic(angle, ratio, cs, ct);
  return std::abs(scan_max_curvature(c, kOptScanSamples, 1e-10).kappa);
}

// Coarse scan then golden refinement in the best scan cell.
template <typename F>
std::pair<double, double> line_minimize(F&& f, double lo, double hi) {
  constexpr int n = 17;
  double best_x = lo;
  double best_f = std::numeric_limits<double>::infinity();
  int best_i = 0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * i / (n - 1);
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
      best_i = i;
    }
  }
  const double a = lo + (hi - lo) * std::max(best_i - 1, 0) / (n - 1);
  const double b = lo + (hi - lo) * std::min(best_i + 1, n - 1) / (n - 1);
  const double x = numerics::golden_section_minimize(f, a, b, kOptTol);
  const double fx = f(x);
  if (fx < best_f) return {x, fx};
  return {best_x, best_f};
}

CanonicalFit optimize_canonical(double angle, double ratio) {
  auto obj = [&](double cs, double ct) { return canonical_objective(angle, ratio, cs, ct); };

  // Symmetric start: c_s = c_t.
  auto [c0, f0] = line_minimize([&](double c) { return obj(c, c); }, 0.0, std::min(1.0, ratio));
  double cs = c0;
  double ct = c0;
  double best = f0;

  // Unequal legs can put the optimum far off the diagonal, in a different basin.
  constexpr int kSeedGrid = 24;
  for (int i = 1; i <= kSeedGrid; ++i) {
    for (int j = 1; j <= kSeedGrid; ++j) {
      const double s = static_cast<double>(i) / kSeedGrid;
      const double t = ratio * j / kSeedGrid;
      const double f = obj(s, t);
      if (f < best) {
        best = f;
        cs = s;
        ct = t;
      }
    }
  }

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    const double before = best;
    auto [xs, fs] = line_minimize([&](double x) { return obj(x, ct); }, 0.0, 1.0);
    if (fs < best) {
      cs = xs;
      best = fs;
    }
    auto [xt, ft] = line_minimize([&](double x) { return obj(cs, x); }, 0.0, ratio);
    if (ft < best) {
      ct = xt;
      best = ft;
    }
    // Move along the current (c_s, c_t) ray; max |kappa| is not smooth where two
    // curvature peaks are equal, and single-coordinate moves stall there.
    const double len = std::hypot(cs, ct);
    if (len > 0.0) {
      const double ux = cs / len;
      const double uy = ct / len;
      const double lmax = std::min(ux > 0 ? 1.0 / ux : 1e9, uy > 0 ? ratio / uy : 1e9);
      auto [l, fl] = line_minimize([&](double s) { return obj(s * ux, s * uy); }, 0.0, lmax);
      if (fl < best) {
        cs = l * ux;
        ct = l * uy;
        best = fl;
      }
    }
    if (before - best <= 1e-12 * before) break;
  }

  // Coordinate moves stall on the ridge where two curvature peaks balance.
  // Follow it with a nested search: c_t re-optimized for every trial c_s.
  double ridge_ct = ct;
  auto inner = [&](double s) {
    auto [t, f] = line_minimize([&](double x) { return obj(s, x); }, 0.0, ratio);
    ridge_ct = t;
    return f;
  };
  const double s_lo = std::max(0.0, cs - 0.1);
  const double s_hi = std::min(1.0, cs + 0.1);
  const double s_best = numerics::golden_section_minimize(inner, s_lo, s_hi, kOptTol);
  const double f_best = inner(s_best);
  if (f_best < best) {
    cs = s_best;
    ct = ridge_ct;
  }
  return {cs, ct};
}

std::mutex g_cache_mutex;
bool g_cache_enabled = true;
std::map<std::pair<double, double>, CanonicalFit> g_cache;

CanonicalFit canonical_fit(double angle, double ratio) {
  const auto key = std::make_pair(angle, ratio);
  {
    std::lock_guard lock(g_cache_mutex);
    if (g_cache_enabled) {
      if (auto it = g_cache.find(key); it != g_cache.end()) return it->second;
    }
  }
  const CanonicalFit fit = optimize_canonical(angle, ratio);
  std::lock_guard lock(g_cache_mutex);
  if (g_cache_enabled) g_cache.emplace(key, fit);
  return fit;
}

}  // namespace

Point2 eval(const Curve& c, double t) {
  check_range(t);
  return raw_at(c, t);
}

Point2 deriv1(const Curve& c, double t) {
  check_range(t);
  return raw_d1(c, t);
}

Point2 deriv2(const Curve& c, double t) {
  check_range(t);
  return raw_d2(c, t);
}

Point2 start_point(const Curve& c) { return raw_at(c, 0.0); }
Point2 end_point(const Curve& c) { return raw_at(c, 1.0); }

double curvature(const Curve& c, double t) {
  check_range(t);
  const Point2 a = raw_d1(c, t);
  if (norm(a) <= 1e-12 * std::max(extent(c), 1e-300)) {
    throw GeometryError("curvature undefined: vanishing first derivative");
  }
  return curvature_or_inf(c, t);
}

CurvatureMax max_curvature(const Curve& c, int samples) {
  CurvatureMax m = scan_max_curvature(c, samples, 1e-9);
  if (std::isfinite(m.kappa) && std::abs(m.kappa) * extent(c) < 1e-12) m.kappa = 0.0;
  return m;
}

double min_radius(const Curve& c, int samples) {
  const double k = std::abs(max_curvature(c, samples).kappa);
  if (k == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / k;
}

double scale_isosceles_for_radius(double angle, double r_min, CurveKind kind) {
  if (!(r_min > 0.0)) throw std::invalid_argument("minimum radius must be positive");
  if (!(angle > 0.0)) throw std::invalid_argument("inner angle must be positive");
  if (angle >= M_PI) return 0.0;
  Curve unit;
  if (kind == CurveKind::quadratic) {
    unit = QuadBezier{{1.0, 0.0}, {0.0, 0.0}, {std::cos(angle), std::sin(angle)}};
  } else {
    const CanonicalFit fit = canonical_fit(angle, 1.0);
    unit = canonical_cubic(angle, 1.0, fit.cs, fit.ct);
  }
  // Curvature scales with 1/length.
  return r_min / min_radius(unit);
}

CurveKind select_kind(double angle) {
  if (angle >= M_PI) return CurveKind::quadratic;
  const double q = scale_isosceles_for_radius(angle, 1.0, CurveKind::quadratic);
  const double c = scale_isosceles_for_radius(angle, 1.0, CurveKind::cubic);
  return q <= 1.01 * c ? CurveKind::quadratic : CurveKind::cubic;
}

CubicFit construct_cubic(Point2 v, Point2 u, Point2 w) {
  const Point2 uv = v - u;
  const Point2 uw = w - u;
  const double len_v = norm(uv);
  const double len_w = norm(uw);
  if (len_v == 0.0 || len_w == 0.0) throw std::invalid_argument("control triangle has a zero leg");
  const double angle = angle_between(uv, uw);
  if (angle < 1e-9) throw std::invalid_argument("control triangle legs point the same way");
  if (angle > M_PI - 1e-9) {
    const Point2 chord = w - v;
    CubicFit fit;
    fit.curve = CubicBezier{v, v + chord / 3.0, v + chord * (2.0 / 3.0), w};
    fit.c_s = distance(u, fit.curve.p1);
    fit.c_t = distance(u, fit.curve.p2);
    fit.straight = true;
    return fit;
  }
  const CanonicalFit cf = canonical_fit(angle, len_w / len_v);
  CubicFit fit;
  fit.c_s = cf.cs * len_v;
  fit.c_t = cf.ct * len_v;
  fit.curve = CubicBezier{v, u + uv * (fit.c_s / len_v), u + uw * (fit.c_t / len_w), w};
  return fit;
}

void set_cubic_cache_enabled(bool enabled) {
  std::lock_guard lock(g_cache_mutex);
  g_cache_enabled = enabled;
}

void clear_cubic_cache() {
  std::lock_guard lock(g_cache_mutex);
  g_cache.clear();
}

Curve make_bow_curve(Point2 v, Point2 u, Point2 w, CurveKind kind) {
  if (kind == CurveKind::quadratic) return QuadBezier{v, u, w};
  return construct_cubic(v, u, w).curve;
}

std::vector<double> arclength_parameters(const Curve& c, int samples) {
  if (samples < 2) throw std::invalid_argument("need at least two samples");
  constexpr int kTable = 2048;
  std::vector<double> cum(kTable + 1, 0.0);
  Point2 prev = raw_at(c, 0.0);
  for (int k = 1; k <= kTable; ++k) {
    const Point2 p = raw_at(c, static_cast<double>(k) / kTable);
    cum[k] = cum[k - 1] + distance(prev, p);
    prev = p;
  }
  const double total = cum.back();
  std::vector<double> ts(samples);
  ts.front() = 0.0;
  ts.back() = 1.0;
  if (total == 0.0) {
    for (int i = 1; i + 1 < samples; ++i) ts[i] = static_cast<double>(i) / (samples - 1);
    return ts;
  }
  int k = 0;
  for (int i = 1; i + 1 < samples; ++i) {
    const double s = total * i / (samples - 1);
    while (k < kTable && cum[k + 1] < s) ++k;
    const double seg = cum[k + 1] - cum[k];
    const double f = seg > 0.0 ? (s - cum[k]) / seg : 0.0;
    ts[i] = (k + f) / kTable;
  }
  return ts;
}

std::vector<Point2> sample_curve(const Curve& c, int samples) {
  std::vector<Point2> pts;
  pts.reserve(samples);
  for (double t : arclength_parameters(c, samples)) pts.push_back(raw_at(c, t));
  return pts;
}

OffsetPolyline offset_curve(const Curve& c, double distance_mm, int samples) {
  const std::vector<double> ts = arclength_parameters(c, samples);
  OffsetPolyline out;
  out.offset_distance = distance_mm;
  out.points.reserve(ts.size());
  if (distance_mm != 0.0) {
    auto check = [&](double t) {
      const double k = curvature_or_inf(c, t);
      if (distance_mm * k >= 1.0 - 1e-9) {
        throw GeometryError("offset distance reaches the inward radius of curvature");
      }
    };
    for (int i = 0; i < kDefaultCurvatureSamples; ++i) check(static_cast<double>(i) / (kDefaultCurvatureSamples - 1));
    for (double t : ts) check(t);
  }
  for (double t : ts) {
    const Point2 d = raw_d1(c, t);
    const double speed = norm(d);
    if (speed == 0.0) throw GeometryError("offset undefined: vanishing first derivative");
    out.points.push_back(raw_at(c, t) + left_normal(d) * (distance_mm / speed));
  }
  return out;
}

std::vector<double> polyline_curvature(std::span<const Point2> pts) {
  if (pts.size() < 3) throw std::invalid_argument("polyline curvature needs at least three points");
  std::vector<double> out;
  out.reserve(pts.size() - 2);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (pts[i] == pts[i + 1]) throw std::invalid_argument("duplicate adjacent polyline points");
  }
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const Point2 a = pts[i - 1];
    const Point2 b = pts[i];
    const Point2 c = pts[i + 1];
    const double cr = cross(b - a, c - b);
    out.push_back(2.0 * cr / (distance(a, b) * distance(b, c) * distance(a, c)));
  }
  return out;
}

}  // namespace fiberloom
