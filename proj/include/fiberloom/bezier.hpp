#pragma once

#include <span>
#include <variant>
#include <vector>

#include "fiberloom/point.hpp"

namespace fiberloom {

/// Quadratic Bezier B(t) = (1-t)^2 p0 + 2(1-t)t p1 + t^2 p2.
/// In a wedge, p0 and p2 are rim points and p1 the tangent intersection.
struct QuadBezier {
  Point2 p0, p1, p2;

  Point2 at(double t) const;
  Point2 d1(double t) const;
  Point2 d2(double t) const;
};

/// Cubic Bezier B(t) = (1-t)^3 p0 + 3(1-t)^2 t p1 + 3(1-t) t^2 p2 + t^3 p3.
struct CubicBezier {
  Point2 p0, p1, p2, p3;

  Point2 at(double t) const;
  Point2 d1(double t) const;
  Point2 d2(double t) const;
};

using Curve = std::variant<QuadBezier, CubicBezier>;

enum class CurveKind { quadratic, cubic };

// Range-checked evaluation; throw std::out_of_range for t outside [0, 1].
Point2 eval(const Curve& c, double t);
Point2 deriv1(const Curve& c, double t);
Point2 deriv2(const Curve& c, double t);

Point2 start_point(const Curve& c);
Point2 end_point(const Curve& c);

/// Signed curvature (1/mm), positive for a left (counter-clockwise) turn.
/// Throws GeometryError where the first derivative vanishes.
double curvature(const Curve& c, double t);

struct CurvatureMax {
  double t = 0.0;
  double kappa = 0.0;  ///< signed curvature at t; |kappa| is the maximum
};

inline constexpr int kDefaultCurvatureSamples = 512;

/// Location and value of max |kappa| over [0, 1]: uniform scan followed by
/// golden-section refinement around the best sample.
CurvatureMax max_curvature(const Curve& c, int samples = kDefaultCurvatureSamples);

/// 1 / max |kappa|; +infinity for a straight curve.
double min_radius(const Curve& c, int samples = kDefaultCurvatureSamples);

/// Leg length |UV| = |UW| of an isosceles control triangle with inner angle
/// `angle` at U whose curve has minimum radius exactly `r_min`. Cubic curves use
/// the curvature-optimal inner control points. Returns 0 for angle >= pi.
double scale_isosceles_for_radius(double angle, double r_min, CurveKind kind);

/// Quadratic unless a cubic saves more than 1% leg length at this inner angle.
CurveKind select_kind(double angle);

struct CubicFit {
  CubicBezier curve;
  double c_s = 0.0;  ///< |U S|
  double c_t = 0.0;  ///< |U T|
  bool straight = false;
};

/// Cubic through v and w with inner points S = U + c_s * unit(UV) and
/// T = U + c_t * unit(UW), with (c_s, c_t) minimizing max |kappa|.
/// Collinear input yields a straight segment with `straight` set.
CubicFit construct_cubic(Point2 v, Point2 u, Point2 w);

/// Controls the memo of optimal (c_s, c_t) keyed on (angle, leg ratio).
/// Results are identical with and without it.
void set_cubic_cache_enabled(bool enabled);
void clear_cubic_cache();

/// Edge-bow curve for the control triangle (v, u, w).
Curve make_bow_curve(Point2 v, Point2 u, Point2 w, CurveKind kind);

struct OffsetPolyline {
  std::vector<Point2> points;
  double offset_distance = 0.0;
  int source = -1;
};

inline constexpr int kDefaultOffsetSamples = 128;

/// Parameters giving `samples` points equally spaced in arc length.
std::vector<double> arclength_parameters(const Curve& c, int samples);

/// Points B(t_i) + d * n(t_i) with n the unit left normal, at arclength-uniform t_i.
/// Throws GeometryError if an inward offset reaches the local radius.
OffsetPolyline offset_curve(const Curve& c, double distance, int samples = kDefaultOffsetSamples);

/// Signed 1/circumradius of each consecutive point triple; collinear -> 0.
/// One value per interior point. Throws std::invalid_argument on duplicate
/// adjacent points or fewer than three points.
std::vector<double> polyline_curvature(std::span<const Point2> points);

/// Sampled polyline of the curve at arclength-uniform parameters.
std::vector<Point2> sample_curve(const Curve& c, int samples = kDefaultOffsetSamples);

}  // namespace fiberloom
