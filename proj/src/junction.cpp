#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "fiberloom/errors.hpp"
#include "fiberloom/numerics.hpp"
#include "fiberloom/path_plan.hpp"

namespace fiberloom {

namespace {

constexpr double kStraightTol = 1e-9;
constexpr double kLegTol = 1e-4;  // mm

bool intersect_lines(Point2 p, Point2 d, Point2 q, Point2 e, double& s, double& t) {
  const double den = cross(d, e);
  if (std::abs(den) < 1e-12) return false;
  const Point2 r = q - p;
  s = cross(r, e) / den;
  t = cross(r, d) / den;
  return true;
}

struct Requirement {
  double a_from = 0.0;
  double a_to = 0.0;
  double gamma = 1.0;
};

class Parameterizer {
 public:
  Parameterizer(JunctionGeometry& j, double r_min, double limit) : j_(j), r_(r_min), limit_(limit) {}

  bool fits(const Wedge& w, double v_from, double v_to) const {
    return min_radius(wedge_curve(j_, w, v_from, v_to)) >= r_ * (1.0 - 1e-9);
  }

  double symmetric_leg(const Wedge& w) const { return scale_isosceles_for_radius(w.turn_angle, r_, w.kind); }

  // Smallest free leg with the other leg held; nullopt if none below the limit.
  std::optional<double> free_leg(const Wedge& w, double held, bool held_is_from) const {
    auto pred = [&](double v) { return held_is_from ? fits(w, held, v) : fits(w, v, held); };
    double hi = std::max(symmetric_leg(w), kLegTol);
    while (!pred(hi)) {
      hi *= 2.0;
      if (hi > limit_) return std::nullopt;
    }
    return numerics::bisect_threshold(pred, 0.0, hi, kLegTol);
  }

  Requirement solve(const Wedge& w, std::optional<double> a_from, std::optional<double> a_to) const {
    const double v_sym = symmetric_leg(w);
    Requirement out;
    if (!a_from && !a_to) {
      out.a_from = w.u_from + v_sym;
      out.a_to = w.u_to + v_sym;
      return out;
    }
    // A leg that does not reach past the rim-line crossing imposes nothing;
    // scaling against it would blow the other leg up.
    if (a_from && *a_from - w.u_from < kLegTol) a_from.reset();
    if (a_to && *a_to - w.u_to < kLegTol) a_to.reset();
    if (!a_from && !a_to) return solve(w, std::nullopt, std::nullopt);
    if (a_from && a_to) {
      const double vf = std::max(*a_from - w.u_from, kLegTol);
      const double vt = std::max(*a_to - w.u_to, kLegTol);
      auto pred = [&](double g) { return fits(w, g * vf, g * vt); };
      double g = 1.0;
      if (!pred(1.0)) {
        double hi = 2.0;
        while (!pred(hi)) {
          hi *= 2.0;
          if (hi * std::min(vf, vt) > limit_) fail();
        }
        g = numerics::bisect_threshold(pred, 1.0, hi, 1e-7);
      }
      out.gamma = g;
      out.a_from = w.u_from + g * vf;
      out.a_to = w.u_to + g * vt;
      return out;
    }
    const bool held_is_from = a_from.has_value();
    const double held = std::max((held_is_from ? *a_from - w.u_from : *a_to - w.u_to), kLegTol);
    if (auto v = free_leg(w, held, held_is_from)) {
      out.a_from = held_is_from ? w.u_from + held : w.u_from + *v;
      out.a_to = held_is_from ? w.u_to + *v : w.u_to + held;
      return out;
    }
    // The held leg is too short for any partner: fall back to the symmetric legs
    // and let the side correction raise the held side.
    const double vh = std::max(held, v_sym);
    out.a_from = w.u_from + (held_is_from ? vh : v_sym);
    out.a_to = w.u_to + (held_is_from ? v_sym : vh);
    return out;
  }

  [[noreturn]] void fail() const {
    throw GeometryError("junction " + std::to_string(j_.vertex) + " cannot reach the minimum radius " +
                        std::to_string(r_) + " mm within the edge lengths");
  }

 private:
  JunctionGeometry& j_;
  double r_;
  double limit_;
};

}  // namespace

int JunctionGeometry::side_of_edge(int edge) const {
  for (std::size_t i = 0; i < sides.size(); ++i) {
    if (sides[i].edge == edge) return static_cast<int>(i);
  }
  return -1;
}

std::pair<Point2, Point2> JunctionGeometry::hull() const {
  const double inf = std::numeric_limits<double>::infinity();
  Point2 lo{inf, inf}, hi{-inf, -inf};
  for (const Side& s : sides) {
    for (int j : {0, s.n_bundles - 1}) {
      const Point2 r = s.rim(center, j);
      lo = {std::min(lo.x, r.x), std::min(lo.y, r.y)};
      hi = {std::max(hi.x, r.x), std::max(hi.y, r.y)};
    }
  }
  return {lo, hi};
}

Curve wedge_curve(const JunctionGeometry& j, const Wedge& wedge, double v_from, double v_to) {
  const Point2 dv = j.sides[wedge.from].dir;
  const Point2 dw = j.sides[wedge.to].dir;
  return make_bow_curve(wedge.U + dv * v_from, wedge.U, wedge.U + dw * v_to, wedge.kind);
}

JunctionGeometry parameterize_junction(const FiberGraph& g, int vertex, const PlanParams& params) {
  JunctionGeometry j;
  j.vertex = vertex;
  j.center = g.vertices()[vertex].pos;
  double longest = 0.0;
  for (const JunctionSide& js : g.junction_sides(vertex)) {
    const Edge& e = g.edges()[js.edge];
    Side s;
    s.edge = js.edge;
    s.far_vertex = js.far_vertex;
    s.n_bundles = e.target;
    s.spacing = e.width > 0.0 ? e.width : params.fiber_width;
    s.dir = js.dir;
    s.left = left_normal(js.dir);
    s.angle = js.angle;
    j.sides.push_back(s);
    longest = std::max(longest, distance(j.center, g.vertices()[js.far_vertex].pos));
  }
  const int deg = static_cast<int>(j.sides.size());
  if (deg <= 1) return j;

  for (int i = 0; i < deg; ++i) {
    Wedge w;
    w.from = i;
    w.to = (i + 1) % deg;
    double beta = std::fmod(j.sides[w.to].angle - j.sides[w.from].angle + 4.0 * M_PI, 2.0 * M_PI);
    if (beta <= 0.0) beta += 2.0 * M_PI;
    w.beta = beta;
    w.turn_angle = std::min(beta, 2.0 * M_PI - beta);
    const bool straight = std::abs(beta - M_PI) < kStraightTol;
    w.constrained = !straight && (deg != 2 || beta < M_PI);
    w.kind = select_kind(w.turn_angle);
    const Side& a = j.sides[w.from];
    const Side& b = j.sides[w.to];
    const Point2 pa = j.center + a.left * a.half_width();
    const Point2 pb = j.center - b.left * b.half_width();
    double s = 0.0, t = 0.0;
    if (intersect_lines(pa, a.dir, pb, b.dir, s, t)) {
      w.U = pa + a.dir * s;
      w.u_from = s;
      w.u_to = t;
    } else {
      w.constrained = false;
    }
    j.wedges.push_back(w);
  }
  j.straight = deg == 2 && !j.wedges[0].constrained && !j.wedges[1].constrained;

  const Parameterizer solver(j, params.min_radius, 100.0 * longest);
  std::vector<std::optional<Requirement>> req(deg);
  std::vector<double> sym_a(deg, -std::numeric_limits<double>::infinity());
  for (int i = 0; i < deg; ++i) {
    if (!j.wedges[i].constrained) continue;
    req[i] = solver.solve(j.wedges[i], std::nullopt, std::nullopt);
    sym_a[i] = std::max(req[i]->a_from, req[i]->a_to);
  }
  int fixed = -1;
  for (int i = 0; i < deg; ++i) {
    if (j.wedges[i].constrained && (fixed < 0 || sym_a[i] > sym_a[fixed])) fixed = i;
  }
  j.fixed_wedge = fixed;

  if (fixed >= 0 && deg >= 3) {
    const int next = (fixed + 1) % deg;
    const int prev = (fixed + deg - 1) % deg;
    const Requirement f = *req[fixed];
    std::optional<double> next_to, prev_from;
    if (j.wedges[next].constrained) {
      req[next] = solver.solve(j.wedges[next], f.a_to, std::nullopt);
      next_to = req[next]->a_to;
    }
    if (j.wedges[prev].constrained && prev != next) {
      req[prev] = solver.solve(j.wedges[prev], std::nullopt, f.a_from);
      prev_from = req[prev]->a_from;
    }
    if (deg == 4) {
      const int opp = (fixed + 2) % deg;
      if (j.wedges[opp].constrained) req[opp] = solver.solve(j.wedges[opp], next_to, prev_from);
    }
  }

  // Each side takes the larger requirement of its two wedges.
  for (int i = 0; i < deg; ++i) {
    Side& s = j.sides[i];
    const int left_wedge = i;                  // side is `from`
    const int right_wedge = (i + deg - 1) % deg;  // side is `to`
    s.a_left = req[left_wedge] ? req[left_wedge]->a_from : 0.0;
    s.a_right = req[right_wedge] ? req[right_wedge]->a_to : 0.0;
    if (deg == 2) {
      // Both wedges share the same two sides.
      s.a_left = std::max(req[0] ? (i == 0 ? req[0]->a_from : req[0]->a_to) : 0.0,
                          req[1] ? (i == 1 ? req[1]->a_from : req[1]->a_to) : 0.0);
      s.a_right = s.a_left;
    }
    s.a = std::max({0.0, s.a_left, s.a_right});
  }
  // The side maximum lengthens some legs after they were solved, which can
  // sharpen a wedge. Grow such wedges uniformly until every one fits again.
  for (int round = 0;; ++round) {
    bool changed = false;
    for (int i = 0; i < deg; ++i) {
      Wedge& w = j.wedges[i];
      if (!w.constrained) continue;
      Side& sf = j.sides[w.from];
      Side& st = j.sides[w.to];
      const double vf = sf.a - w.u_from, vt = st.a - w.u_to;
      if (vf > 0.0 && vt > 0.0 && solver.fits(w, vf, vt)) continue;
      changed = true;
      // Prefer lengthening only the shorter leg: scaling a lopsided wedge
      // would also push its long side, and with it the neighbour.
      const bool from_longer = vf >= vt;
      const double held = std::max(vf, vt);
      if (held >= solver.symmetric_leg(w)) {
        const auto v = solver.free_leg(w, held, from_longer);
        const double current = std::min(vf, vt);
        if (v && *v >= current) {
          if (from_longer) {
            st.a = w.u_to + *v;
          } else {
            sf.a = w.u_from + *v;
          }
          continue;
        }
      }
      const Requirement r = solver.solve(w, sf.a, st.a);
      if (req[i]) req[i]->gamma *= r.gamma;
      sf.a = std::max(sf.a, r.a_from);
      st.a = std::max(st.a, r.a_to);
    }
    if (!changed) break;
    if (round > 50) solver.fail();
  }
  for (int i = 0; i < deg; ++i) {
    Wedge& w = j.wedges[i];
    if (req[i]) w.gamma = req[i]->gamma;
    if (!w.constrained) continue;
    w.v_from = j.sides[w.from].a - w.u_from;
    w.v_to = j.sides[w.to].a - w.u_to;
    if (w.v_from <= 0.0 || w.v_to <= 0.0) solver.fail();
  }
  return j;
}

std::vector<JunctionGeometry> parameterize_all(const FiberGraph& g, const PlanParams& params) {
  if (!(params.fiber_width > 0.0) || !(params.min_radius > 0.0)) {
    throw InputError("fiber width and minimum radius must be positive");
  }
  std::vector<JunctionGeometry> out;
  out.reserve(g.num_vertices());
  for (int v = 0; v < g.num_vertices(); ++v) out.push_back(parameterize_junction(g, v, params));
  for (const Edge& e : g.edges()) {
    const double a1 = out[e.v1].sides[out[e.v1].side_of_edge(e.id)].a;
    const double a2 = out[e.v2].sides[out[e.v2].side_of_edge(e.id)].a;
    const double len = distance(g.vertices()[e.v1].pos, g.vertices()[e.v2].pos);
    if (a1 + a2 >= len) {
      throw GeometryError("edge " + std::to_string(e.id) + " is too short: rim distances " + std::to_string(a1) +
                          " + " + std::to_string(a2) + " mm exceed its length " + std::to_string(len) + " mm");
    }
  }
  return out;
}

}  // namespace fiberloom
