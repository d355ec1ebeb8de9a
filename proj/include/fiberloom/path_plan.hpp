#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fiberloom/bezier.hpp"
#include "fiberloom/graph.hpp"
#include "fiberloom/pattern.hpp"

namespace fiberloom {

struct PlanParams {
  double fiber_width = 2.0;  ///< mm, also the rim point spacing
  double min_radius = 10.0;  ///< mm
  bool interlooping = true;  ///< join concentric rings of one closed loop
};

/// One edge seen from a junction. Slots are indexed 0..n-1 from the left,
/// looking from the junction P toward the far vertex O.
struct Side {
  int edge = 0;
  int far_vertex = 0;
  int n_bundles = 0;
  double spacing = 0.0;  ///< bundle width on this edge
  Point2 dir;          ///< unit P -> O
  Point2 left;         ///< unit left normal of dir
  double angle = 0.0;  ///< polar angle of dir
  double a = 0.0;      ///< axial distance of the rim line from P
  double a_left = 0.0;   ///< value required by the wedge on the left, before correction
  double a_right = 0.0;  ///< value required by the wedge on the right, before correction

  /// Lateral offset of slot j from the edge axis, along `left`.
  double lateral(int j) const { return (n_bundles - 1) * spacing / 2.0 - j * spacing; }
  double half_width() const { return (n_bundles - 1) * spacing / 2.0; }
  Point2 rim(Point2 p, int j) const { return p + dir * a + left * lateral(j); }
};

/// Region between side `from` and the next side counter-clockwise, `to`.
struct Wedge {
  int from = 0;  ///< side index
  int to = 0;
  double beta = 0.0;         ///< counter-clockwise angle from `from` to `to`
  double turn_angle = 0.0;   ///< inner angle of the control triangle, min(beta, 2 pi - beta)
  bool constrained = false;  ///< needs a minimum-radius bow
  CurveKind kind = CurveKind::quadratic;
  Point2 U;  ///< tangent intersection of the wedge-end rim lines
  double u_from = 0.0, u_to = 0.0;
  double v_from = 0.0, v_to = 0.0;
  double gamma = 1.0;
};

struct JunctionGeometry {
  int vertex = 0;
  Point2 center;
  std::vector<Side> sides;  ///< counter-clockwise
  std::vector<Wedge> wedges;
  int fixed_wedge = -1;
  bool straight = false;  ///< degree 2 with collinear sides

  int side_of_edge(int edge) const;
  /// Axis-aligned box of all rim points: the junction hull.
  std::pair<Point2, Point2> hull() const;  // Box
};

/// Rim distances for every junction. Depends only on geometry, targets,
/// fiber width and minimum radius, so one result serves all layers.
/// Throws GeometryError when a junction cannot reach the radius or an edge is
/// too short for the rim distances at both ends.
JunctionGeometry parameterize_junction(const FiberGraph& g, int vertex, const PlanParams& params);
std::vector<JunctionGeometry> parameterize_all(const FiberGraph& g, const PlanParams& params);

/// Control polygon of the edge bow between the wedge-end rims using the given
/// legs along each side (v measured from U).
Curve wedge_curve(const JunctionGeometry& j, const Wedge& wedge, double v_from, double v_to);

enum class BowKind { edge, solitary, s_shape, straight };

const char* to_string(BowKind k);

using Box = std::pair<Point2, Point2>;

/// Edge bow on the tangent intersection U of the rim lines (r1, d1) and (r2, d2),
/// d pointing from P toward O. nullopt if the lines are parallel, a leg is not
/// positive, or U lies outside `hull` when one is given.
std::optional<Curve> build_edge_bow(Point2 r1, Point2 d1, Point2 r2, Point2 d2, const Box* hull = nullptr);

/// Cubic with inner points I = R - ((1/3) / |R1 R2|) * PO at each end, where PO
/// is the vector from the junction centre to that side's far vertex.
/// Throws GeometryError for coincident rim points.
CubicBezier build_solitary_bow(Point2 r1, Point2 po1, Point2 r2, Point2 po2);

/// Crossing cubic (r1, I1, I2, r2) with I1, I2 the intersections of line h1 h2
/// with the rim tangents. nullopt if they are not distinct, lie outside `hull`,
/// or sit beyond the rims.
std::optional<CubicBezier> build_s_bow(Point2 r1, Point2 d1, Point2 r2, Point2 d2, Point2 h1, Point2 h2,
                                       const Box* hull = nullptr);

struct Bow {
  BowKind kind = BowKind::edge;
  int vertex = 0;
  int connection = 0;
  int family = 0;  ///< index of the bow family within the layer
  int side_from = 0, slot_from = 0;
  int side_to = 0, slot_to = 0;
  bool reference = false;
  double offset = 0.0;            ///< signed distance from the family reference
  std::optional<Curve> curve;     ///< set for references and individually built bows
  std::vector<Point2> points;     ///< from the `from` rim to the `to` rim
};

struct StraightSegment {
  int edge = 0;
  int slot = 0;  ///< canonical (from the left at v1, looking toward v2)
  Point2 a, b;   ///< rim at v1 end, rim at v2 end
};

struct InterloopConnector {
  int edge = 0;
  int index = 0;  ///< 0 is the reference, k is offset by k fiber widths
  double b = 0.0;
  std::optional<Curve> curve;
  std::vector<Point2> points;
};

struct FiberPath {
  int instance = 0;
  int loop = -1;  ///< sheet loop whose connection sequence this path follows, or -1
  bool closed = false;
  bool interlooped = false;
  std::vector<int> connections;
  std::vector<Point2> points;
};

struct FillPolygon {
  int edge = -1;    ///< unused slot run along an edge
  int vertex = -1;  ///< junction void
  std::vector<Point2> points;
};

struct LayerPathPlan {
  int layer = 0;
  int sheet = 0;
  std::vector<JunctionGeometry> junctions;  ///< indexed by vertex
  std::vector<StraightSegment> segments;
  std::vector<Bow> bows;
  std::vector<InterloopConnector> connectors;
  std::vector<FiberPath> paths;
  std::vector<FillPolygon> fills;
  std::vector<std::string> warnings;
};

/// Paths for one layer. `junctions` may carry a precomputed parameterization.
LayerPathPlan assemble_layer(const FiberGraph& g, const LayerSolution& layer, const PlanParams& params,
                             const std::vector<JunctionGeometry>* junctions = nullptr);

/// Interlooping parameter: the smallest b such that the reference connector and
/// its offsets by 1..offsets fiber widths all keep the minimum radius.
double interloop_b(double fiber_width, double min_radius, int offsets);

/// Reference connector: E1 = (0,0), I1 = (b,0), I2 = (b,w), E2 = (2b,w).
CubicBezier interloop_reference(double b, double fiber_width);

struct PlanViolation {
  enum class Kind { curvature, overlap } kind = Kind::curvature;
  int vertex = -1;
  double value = 0.0;
  std::string message;
};

struct PlanReport {
  std::vector<PlanViolation> curvature;
  std::vector<PlanViolation> overlap;
  bool clean() const { return curvature.empty() && overlap.empty(); }
};

/// Samples every bow and connector: |kappa| above (1/R)(1 + 1e-3) is a curvature
/// violation; two distinct bows of one junction closer than 0.99 w overlap.
PlanReport check_plan(const LayerPathPlan& plan, const PlanParams& params);

}  // namespace fiberloom
