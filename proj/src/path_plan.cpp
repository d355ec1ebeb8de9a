#include "fiberloom/path_plan.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>

#include "fiberloom/errors.hpp"
#include "fiberloom/numerics.hpp"

namespace fiberloom {

const char* to_string(BowKind k) {
  switch (k) {
    case BowKind::edge: return "edge";
    case BowKind::solitary: return "solitary";
    case BowKind::s_shape: return "s";
    case BowKind::straight: return "straight";
  }
  return "?";
}

namespace {

constexpr double kGeomTol = 1e-9;

struct SlotOwner {
  enum Kind { free, bow, terminal } kind = free;
  int bow_id = -1;
};

// Bow families and terminals of one junction in one layer.
struct JunctionCounts {
  std::vector<int> family;       // per wedge
  std::vector<int> family_conn;  // per wedge
  int straight_conn = -1;        // degree 2 with collinear sides
  int straight_count = 0;
  int cross_conn = -1;
  int cross_count = 0;
  int cross_a = -1, cross_c = -1;
  std::vector<int> terminals;  // per side
};

bool intersect_lines(Point2 p, Point2 d, Point2 q, Point2 e, double& s, double& t) {
  const double den = cross(d, e);
  if (std::abs(den) < 1e-12) return false;
  const Point2 r = q - p;
  s = cross(r, e) / den;
  t = cross(r, d) / den;
  return true;
}

Curve straight_curve(Point2 a, Point2 b) { return QuadBezier{a, (a + b) * 0.5, b}; }

bool collinear_rims(Point2 r1, Point2 d1, Point2 r2, Point2 d2) {
  const double scale = std::max(1.0, distance(r1, r2));
  return std::abs(cross(d1, d2)) < kGeomTol && dot(d1, d2) < 0.0 && std::abs(cross(d1, r2 - r1)) < kGeomTol * scale;
}

bool inside_box(Point2 p, const std::pair<Point2, Point2>& box) {
  const double tol = 1e-9 * (1.0 + std::abs(box.second.x - box.first.x) + std::abs(box.second.y - box.first.y));
  return p.x >= box.first.x - tol && p.x <= box.second.x + tol && p.y >= box.first.y - tol &&
         p.y <= box.second.y + tol;
}

struct BuiltCurve {
  BowKind kind = BowKind::straight;
  Curve curve;
};

BuiltCurve solitary_bow(const JunctionGeometry& j, const Side& s1, Point2 r1, const Side& s2, Point2 r2,
                        const std::vector<Vertex>& vertices, double r_min) {
  const CubicBezier literal = build_solitary_bow(r1, vertices[s1.far_vertex].pos - j.center, r2,
                                                 vertices[s2.far_vertex].pos - j.center);
  if (min_radius(literal) >= r_min) return {BowKind::solitary, literal};
  // Too sharp: lengthen both handles along the sides toward P until the radius
  // holds. Take the first fitting length on a coarse scan, then refine.
  const auto with = [&](double h) { return CubicBezier{r1, r1 - s1.dir * h, r2 - s2.dir * h, r2}; };
  const auto fits = [&](double h) { return min_radius(with(h)) >= r_min; };
  const double h0 = distance(literal.p0, literal.p1);
  const double h_max = distance(r1, r2);
  constexpr int kSteps = 64;
  double prev = h0, best = h0, best_r = min_radius(literal);
  for (int i = 1; i <= kSteps; ++i) {
    const double h = h0 + (h_max - h0) * i / kSteps;
    if (fits(h)) return {BowKind::solitary, with(numerics::bisect_threshold(fits, prev, h, 1e-6))};
    const double r = min_radius(with(h));
    if (r > best_r) best = h, best_r = r;
    prev = h;
  }
  return {BowKind::solitary, with(best)};
}

std::optional<BuiltCurve> tangent_bow(const JunctionGeometry& j, Point2 r1, Point2 d1, Point2 r2, Point2 d2,
                                      bool check_hull) {
  const Box box = j.hull();
  if (auto c = build_edge_bow(r1, d1, r2, d2, check_hull ? &box : nullptr)) return BuiltCurve{BowKind::edge, *c};
  return std::nullopt;
}

BuiltCurve pair_bow(const JunctionGeometry& j, const Side& s1, Point2 r1, const Side& s2, Point2 r2,
                    const std::vector<Vertex>& vertices, double r_min) {
  if (collinear_rims(r1, s1.dir, r2, s2.dir)) return {BowKind::straight, straight_curve(r1, r2)};
  if (auto b = tangent_bow(j, r1, s1.dir, r2, s2.dir, true)) return *b;
  return solitary_bow(j, s1, r1, s2, r2, vertices, r_min);
}

std::vector<Point2> curve_points(const Curve& c, Point2 r1, Point2 r2) {
  if (distance(r1, r2) < kGeomTol) return {r1};
  std::vector<Point2> pts = sample_curve(c, kDefaultOffsetSamples);
  pts.front() = r1;
  pts.back() = r2;
  return pts;
}

class LayerBuilder {
 public:
  LayerBuilder(const FiberGraph& g, const LayerSolution& layer, const PlanParams& params,
               std::vector<JunctionGeometry> junctions)
      : g_(g), sheet_(g.sheets().at(layer.sheet)), params_(params) {
    plan_.layer = layer.layer;
    plan_.sheet = layer.sheet;
    plan_.junctions = std::move(junctions);
    x_ = layer.x;
    if (static_cast<int>(x_.size()) != static_cast<int>(sheet_.loops.size())) {
      throw InputError("layer " + std::to_string(layer.layer) + " has " + std::to_string(x_.size()) +
                       " loop counts but sheet " + std::to_string(layer.sheet) + " has " +
                       std::to_string(sheet_.loops.size()) + " loops");
    }
  }

  LayerPathPlan run() {
    count();
    search_layout();
    build_bows();
    build_segments();
    trace();
    if (params_.interlooping) {
      interloop();
    } else {
      for (Traced& t : traced_) plan_.paths.push_back(std::move(t.path));
    }
    build_fills();
    for (std::size_t i = 0; i < plan_.paths.size(); ++i) plan_.paths[i].instance = static_cast<int>(i);
    return std::move(plan_);
  }

 private:
  const JunctionGeometry& J(int v) const { return plan_.junctions[v]; }
  int n_of(int e) const { return g_.edges()[e].target; }

  // Slot index seen from vertex v, given the canonical index (seen from v1).
  int local_slot(int e, int canonical, int v) const {
    return v == g_.edges()[e].v1 ? canonical : n_of(e) - 1 - canonical;
  }

  void count() {
    const int nv = g_.num_vertices();
    conn_count_.assign(g_.num_connections(), 0);
    edge_used_.assign(g_.num_edges(), 0);
    counts_.resize(nv);
    for (int v = 0; v < nv; ++v) {
      const int deg = static_cast<int>(J(v).sides.size());
      if (deg >= 5) throw InputError("vertex " + std::to_string(v) + " has " + std::to_string(deg) + " edges");
      counts_[v].family.assign(deg, 0);
      counts_[v].family_conn.assign(deg, -1);
      counts_[v].terminals.assign(deg, 0);
    }
    for (std::size_t l = 0; l < sheet_.loops.size(); ++l) {
      const int k = x_[l];
      if (k < 0) throw InputError("negative loop count");
      if (k == 0) continue;
      const Loop& loop = sheet_.loops[l];
      for (int c : loop.connections) conn_count_[c] += k;
      for (int e : loop.edges) edge_used_[e] += k;
      if (!loop.closed && !loop.edges.empty()) {
        const Edge& first = g_.edges()[loop.edges.front()];
        const Edge& last = g_.edges()[loop.edges.back()];
        const int v_start = loop.connections.empty()
                                ? first.v1
                                : first.other(g_.connections()[loop.connections.front()].mid_vertex);
        const int v_end = loop.connections.empty()
                              ? last.v2
                              : last.other(g_.connections()[loop.connections.back()].mid_vertex);
        counts_[v_start].terminals[J(v_start).side_of_edge(first.id)] += k;
        counts_[v_end].terminals[J(v_end).side_of_edge(last.id)] += k;
      }
    }
    for (int e = 0; e < g_.num_edges(); ++e) {
      if (edge_used_[e] > n_of(e)) {
        throw InputError("layer uses edge " + std::to_string(e) + " " + std::to_string(edge_used_[e]) +
                         " times but its target is " + std::to_string(n_of(e)));
      }
    }
    for (const Connection& c : g_.connections()) {
      const int k = conn_count_[c.id];
      if (k == 0) continue;
      const int v = c.mid_vertex;
      const JunctionGeometry& j = J(v);
      JunctionCounts& jc = counts_[v];
      const int deg = static_cast<int>(j.sides.size());
      const int a = j.side_of_edge(c.edge1);
      const int b = j.side_of_edge(c.edge2);
      if (deg == 2) {
        if (j.straight) {
          jc.straight_conn = c.id;
          jc.straight_count = k;
        } else {
          const int w = j.wedges[0].constrained ? 0 : 1;
          jc.family[w] = k;
          jc.family_conn[w] = c.id;
        }
      } else if (b == (a + 1) % deg) {
        jc.family[a] = k;
        jc.family_conn[a] = c.id;
      } else if (a == (b + 1) % deg) {
        jc.family[b] = k;
        jc.family_conn[b] = c.id;
      } else {
        if (jc.cross_conn >= 0) {
          throw GeometryError("junction " + std::to_string(v) + " is crossed in both directions in layer " +
                              std::to_string(plan_.layer));
        }
        jc.cross_conn = c.id;
        jc.cross_count = k;
        jc.cross_a = std::min(a, b);
        jc.cross_c = std::max(a, b);
      }
    }
  }

  int family_count(int v, int w) const {
    const JunctionCounts& jc = counts_[v];
    int k = jc.family[w];
    if (jc.straight_conn >= 0 && orient_[v] == w) k += jc.straight_count;
    return k;
  }
  int k_left(int v, int side) const { return family_count(v, side); }
  int k_right(int v, int side) const {
    const int deg = static_cast<int>(J(v).sides.size());
    return family_count(v, (side + deg - 1) % deg);
  }
  int k_cross(int v, int side) const {
    const JunctionCounts& jc = counts_[v];
    return (side == jc.cross_a || side == jc.cross_c) ? jc.cross_count : 0;
  }

  // Slots (local) holding bows at side `side` of v.
  std::vector<char> bow_slots(int v, int side) const {
    const int n = J(v).sides[side].n_bundles;
    std::vector<char> b(n, 0);
    const int kl = k_left(v, side), kr = k_right(v, side), kx = k_cross(v, side);
    for (int i = 0; i < kl; ++i) b[i] = 1;
    for (int i = n - kr; i < n; ++i) b[i] = 1;
    if (kx > 0) {
      const int start = kl + offset_[v][side];
      for (int i = start; i < start + kx; ++i) b[i] = 1;
    }
    return b;
  }

  bool edge_ok(int e) const {
    const Edge& ed = g_.edges()[e];
    const int n = n_of(e);
    const auto b1 = bow_slots(ed.v1, J(ed.v1).side_of_edge(e));
    const auto b2 = bow_slots(ed.v2, J(ed.v2).side_of_edge(e));
    int uni = 0;
    for (int j = 0; j < n; ++j) uni += (b1[j] || b2[n - 1 - j]) ? 1 : 0;
    return uni == edge_used_[e];
  }

  struct Var {
    int vertex = 0;
    int side = -1;  // -1: orientation of a straight degree-2 junction
    std::vector<int> domain;
  };

  void search_layout() {
    const int nv = g_.num_vertices();
    orient_.assign(nv, -1);
    offset_.resize(nv);
    std::vector<Var> vars;
    for (int v = 0; v < nv; ++v) {
      const int deg = static_cast<int>(J(v).sides.size());
      offset_[v].assign(deg, 0);
      const JunctionCounts& jc = counts_[v];
      for (int s = 0; s < deg; ++s) {
        const int load = jc.family[s] + jc.family[(s + deg - 1) % deg] + jc.terminals[s] +
                         ((s == jc.cross_a || s == jc.cross_c) ? jc.cross_count : 0) +
                         (jc.straight_conn >= 0 ? jc.straight_count : 0);
        if (load != edge_used_[J(v).sides[s].edge]) {
          throw std::logic_error("slot count mismatch at vertex " + std::to_string(v));
        }
      }
      if (jc.straight_conn >= 0) vars.push_back({v, -1, {0, 1}});
    }
    // Offsets depend on the orientation, so they are generated lazily.
    for (int v = 0; v < nv; ++v) {
      const JunctionCounts& jc = counts_[v];
      if (jc.cross_conn < 0) continue;
      vars.push_back({v, jc.cross_a, {}});
      vars.push_back({v, jc.cross_c, {}});
    }
    std::vector<char> done(nv, 1);
    std::vector<int> remaining(nv, 0);
    for (const Var& var : vars) {
      done[var.vertex] = 0;
      ++remaining[var.vertex];
    }
    int bad_edge = -1;
    auto check_vertex = [&](int v) {
      for (int e : g_.incident_edges(v)) {
        const int o = g_.edges()[e].other(v);
        if (done[o] && !edge_ok(e)) {
          bad_edge = e;
          return false;
        }
      }
      return true;
    };
    for (const Edge& e : g_.edges()) {
      if (done[e.v1] && done[e.v2] && !edge_ok(e.id)) layout_error(e.id);
    }
    std::vector<std::size_t> order(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vars[a].vertex < vars[b].vertex; });

    std::function<bool(std::size_t)> rec = [&](std::size_t k) -> bool {
      if (k == order.size()) return true;
      Var& var = vars[order[k]];
      const int v = var.vertex;
      std::vector<int> domain = var.domain;
      if (var.side >= 0) {
        const int n = J(v).sides[var.side].n_bundles;
        const int room = n - k_left(v, var.side) - k_right(v, var.side) - counts_[v].cross_count;
        domain.clear();
        for (int o = 0; o <= room; ++o) domain.push_back(o);
        const double centre = room / 2.0;
        std::stable_sort(domain.begin(), domain.end(),
                         [&](int a, int b) { return std::abs(a - centre) < std::abs(b - centre); });
      }
      for (int value : domain) {
        if (var.side < 0) {
          orient_[v] = value;
        } else {
          offset_[v][var.side] = value;
        }
        if (--remaining[v] == 0) {
          done[v] = 1;
          if (check_vertex(v) && rec(k + 1)) return true;
          done[v] = 0;
        } else if (rec(k + 1)) {
          return true;
        }
        ++remaining[v];
      }
      return false;
    };
    if (!rec(0)) layout_error(bad_edge);
  }

  [[noreturn]] void layout_error(int e) const {
    if (e < 0) throw GeometryError("no consistent slot layout in layer " + std::to_string(plan_.layer));
    const Edge& ed = g_.edges()[e];
    throw GeometryError("no consistent slot layout in layer " + std::to_string(plan_.layer) + ": edge " +
                        std::to_string(e) + " between junctions " + std::to_string(ed.v1) + " and " +
                        std::to_string(ed.v2) + " cannot carry its bundles in matching slots");
  }

  Point2 rim(int v, int side, int slot) const { return J(v).sides[side].rim(J(v).center, slot); }

  void add_family(int v, int connection, std::vector<std::pair<int, int>> from, std::vector<std::pair<int, int>> to,
                  int ref, const std::optional<int>& wedge) {
    const JunctionGeometry& j = J(v);
    const int family = family_counter_++;
    const int k = static_cast<int>(from.size());
    auto build_single = [&](int m) -> BuiltCurve {
      const Side& s1 = j.sides[from[m].first];
      const Side& s2 = j.sides[to[m].first];
      const Point2 r1 = rim(v, from[m].first, from[m].second);
      const Point2 r2 = rim(v, to[m].first, to[m].second);
      if (!wedge) return crossing_bow(v, r1, r2);
      const Wedge& w = j.wedges[*wedge];
      if (collinear_rims(r1, s1.dir, r2, s2.dir)) return {BowKind::straight, straight_curve(r1, r2)};
      if (w.constrained) {
        if (auto b = tangent_bow(j, r1, s1.dir, r2, s2.dir, false)) return *b;
        return solitary_bow(j, s1, r1, s2, r2, g_.vertices(), params_.min_radius);
      }
      return pair_bow(j, s1, r1, s2, r2, g_.vertices(), params_.min_radius);
    };
    auto push = [&](int m, const BuiltCurve& bc, bool reference, double offset, std::vector<Point2> pts) {
      Bow b;
      b.kind = bc.kind;
      b.vertex = v;
      b.connection = connection;
      b.family = family;
      b.side_from = from[m].first;
      b.slot_from = from[m].second;
      b.side_to = to[m].first;
      b.slot_to = to[m].second;
      b.reference = reference;
      b.offset = offset;
      if (reference) b.curve = bc.curve;
      b.points = std::move(pts);
      owner_[v][b.side_from][b.slot_from] = {SlotOwner::bow, static_cast<int>(plan_.bows.size())};
      owner_[v][b.side_to][b.slot_to] = {SlotOwner::bow, static_cast<int>(plan_.bows.size())};
      plan_.bows.push_back(std::move(b));
    };

    const BuiltCurve refc = build_single(ref);
    const Point2 r1 = rim(v, from[ref].first, from[ref].second);
    const Point2 r2 = rim(v, to[ref].first, to[ref].second);
    push(ref, refc, true, 0.0, curve_points(refc.curve, r1, r2));
    const double sp1 = j.sides[from[ref].first].spacing;
    const double sp2 = j.sides[to[ref].first].spacing;
    const bool can_offset = refc.kind != BowKind::straight && std::abs(sp1 - sp2) < kGeomTol && k > 1;
    double sign = 1.0;
    if (can_offset) {
      const Point2 n0 = left_normal(normalized(deriv1(refc.curve, 0.0)));
      const int m2 = ref + 1 < k ? ref + 1 : ref - 1;
      const Point2 step = rim(v, from[m2].first, from[m2].second) - r1;
      sign = dot(step, n0) * (m2 - ref) > 0.0 ? 1.0 : -1.0;
    }
    for (int m = 0; m < k; ++m) {
      if (m == ref) continue;
      const Point2 a = rim(v, from[m].first, from[m].second);
      const Point2 b = rim(v, to[m].first, to[m].second);
      if (can_offset) {
        const double d = sign * (m - ref) * sp1;
        try {
          OffsetPolyline off = offset_curve(refc.curve, d, kDefaultOffsetSamples);
          if (distance(off.points.front(), a) < 1e-6 && distance(off.points.back(), b) < 1e-6) {
            off.points.front() = a;
            off.points.back() = b;
            push(m, BuiltCurve{refc.kind, refc.curve}, false, d, std::move(off.points));
            continue;
          }
        } catch (const GeometryError&) {
        }
      }
      const BuiltCurve own = build_single(m);
      push(m, own, true, 0.0, curve_points(own.curve, a, b));
    }
  }

  // Rims of the member of wedge family w nearest the junction centre.
  std::optional<Point2> family_mid(int v, int w) const {
    const int k = family_count(v, w);
    if (k == 0) return std::nullopt;
    const Wedge& wd = J(v).wedges[w];
    const int n_to = J(v).sides[wd.to].n_bundles;
    return (rim(v, wd.from, k - 1) + rim(v, wd.to, n_to - k)) * 0.5;
  }

  BuiltCurve crossing_bow(int v, Point2 ra, Point2 rc) const {
    const JunctionGeometry& j = J(v);
    const JunctionCounts& jc = counts_[v];
    const Side& A = j.sides[jc.cross_a];
    const Side& C = j.sides[jc.cross_c];
    if (collinear_rims(ra, A.dir, rc, C.dir)) return {BowKind::straight, straight_curve(ra, rc)};
    const int deg = static_cast<int>(j.sides.size());
    const std::pair<int, int> pairs[2] = {{jc.cross_a, jc.cross_c},
                                          {(jc.cross_a + deg - 1) % deg, (jc.cross_c + deg - 1) % deg}};
    const auto box = j.hull();
    for (const auto& [w1, w2] : pairs) {
      const auto h1 = family_mid(v, w1);
      const auto h2 = family_mid(v, w2);
      if (!h1 || !h2 || distance(*h1, *h2) < kGeomTol) continue;
      if (auto c = build_s_bow(ra, A.dir, rc, C.dir, *h1, *h2, &box)) return {BowKind::s_shape, *c};
    }
    if (auto b = tangent_bow(j, ra, A.dir, rc, C.dir, true)) return *b;
    return solitary_bow(j, A, ra, C, rc, g_.vertices(), params_.min_radius);
  }

  void build_bows() {
    const int nv = g_.num_vertices();
    owner_.resize(nv);
    for (int v = 0; v < nv; ++v) {
      const JunctionGeometry& j = J(v);
      const int deg = static_cast<int>(j.sides.size());
      owner_[v].resize(deg);
      for (int s = 0; s < deg; ++s) owner_[v][s].assign(j.sides[s].n_bundles, SlotOwner{});
    }
    for (int v = 0; v < nv; ++v) {
      const JunctionGeometry& j = J(v);
      const JunctionCounts& jc = counts_[v];
      const int deg = static_cast<int>(j.sides.size());
      for (int w = 0; w < deg && deg >= 2; ++w) {
        const int k = family_count(v, w);
        if (k == 0) continue;
        const Wedge& wd = j.wedges[w];
        const int conn = jc.family_conn[w] >= 0 ? jc.family_conn[w] : jc.straight_conn;
        std::vector<std::pair<int, int>> from, to;
        const int n_to = j.sides[wd.to].n_bundles;
        for (int i = 0; i < k; ++i) {
          from.push_back({wd.from, i});
          to.push_back({wd.to, n_to - 1 - i});
        }
        add_family(v, conn, from, to, 0, w);
      }
      if (jc.cross_conn >= 0) {
        const int k = jc.cross_count;
        const int sa = k_left(v, jc.cross_a) + offset_[v][jc.cross_a];
        const int sc = k_left(v, jc.cross_c) + offset_[v][jc.cross_c];
        std::vector<std::pair<int, int>> from, to;
        for (int m = 0; m < k; ++m) {
          from.push_back({jc.cross_a, sa + m});
          to.push_back({jc.cross_c, sc + k - 1 - m});
        }
        add_family(v, jc.cross_conn, from, to, (k - 1) / 2, std::nullopt);
      }
    }
    // Terminals: slots used by bows at the far end but not here.
    for (const Edge& e : g_.edges()) {
      const int n = e.target;
      for (int end = 0; end < 2; ++end) {
        const int v = end == 0 ? e.v1 : e.v2;
        const int o = e.other(v);
        const int sv = J(v).side_of_edge(e.id);
        const int so = J(o).side_of_edge(e.id);
        int placed = 0;
        for (int i = 0; i < n; ++i) {
          if (owner_[v][sv][i].kind == SlotOwner::free && owner_[o][so][n - 1 - i].kind == SlotOwner::bow) {
            owner_[v][sv][i].kind = SlotOwner::terminal;
            ++placed;
          }
        }
        if (placed != counts_[v].terminals[sv]) {
          throw std::logic_error("terminal count mismatch on edge " + std::to_string(e.id));
        }
      }
    }
  }

  void build_segments() {
    for (const Edge& e : g_.edges()) {
      const int s1 = J(e.v1).side_of_edge(e.id);
      const int s2 = J(e.v2).side_of_edge(e.id);
      for (int i = 0; i < e.target; ++i) {
        if (owner_[e.v1][s1][i].kind == SlotOwner::free) continue;
        plan_.segments.push_back({e.id, i, rim(e.v1, s1, i), rim(e.v2, s2, e.target - 1 - i)});
      }
    }
  }

  struct Traversal {
    int edge = 0;
    int slot = 0;  // canonical
    bool forward = true;
    std::size_t point = 0;  // index of the start rim in the path points
  };

  struct Traced {
    FiberPath path;
    std::vector<Traversal> trav;
  };

  static void append(std::vector<Point2>& pts, Point2 p) {
    if (pts.empty() || distance(pts.back(), p) > 1e-12) pts.push_back(p);
  }

  Traced trace_from(int e0, int j0, bool fwd0, bool from_terminal) {
    Traced out;
    auto& pts = out.path.points;
    int e = e0, j = j0;
    bool fwd = fwd0;
    for (int guard = 0;; ++guard) {
      if (guard > 1000000) throw std::logic_error("path trace does not terminate");
      if (visited_[e][j]) throw std::logic_error("slot visited twice while tracing");
      visited_[e][j] = 1;
      const Edge& ed = g_.edges()[e];
      const int va = fwd ? ed.v1 : ed.v2;
      const int vb = fwd ? ed.v2 : ed.v1;
      const int sa = J(va).side_of_edge(e);
      const int sb = J(vb).side_of_edge(e);
      const int la = local_slot(e, j, va);
      const int lb = local_slot(e, j, vb);
      const Point2 pa = rim(va, sa, la);
      append(pts, pa);
      out.trav.push_back({e, j, fwd, pts.size() - 1});
      append(pts, rim(vb, sb, lb));
      const SlotOwner& own = owner_[vb][sb][lb];
      if (own.kind != SlotOwner::bow) break;
      const Bow& b = plan_.bows[own.bow_id];
      const bool enter_from = b.side_from == sb && b.slot_from == lb;
      if (enter_from) {
        for (std::size_t i = 1; i < b.points.size(); ++i) append(pts, b.points[i]);
      } else {
        for (std::size_t i = b.points.size(); i-- > 1;) append(pts, b.points[i - 1]);
      }
      out.path.connections.push_back(b.connection);
      const int ns = enter_from ? b.side_to : b.side_from;
      const int nl = enter_from ? b.slot_to : b.slot_from;
      e = J(vb).sides[ns].edge;
      j = local_slot(e, nl, vb);
      fwd = vb == g_.edges()[e].v1;
      if (!from_terminal && e == e0 && j == j0 && fwd == fwd0) {
        out.path.closed = true;
        break;
      }
    }
    if (out.path.closed && pts.size() > 1 && distance(pts.front(), pts.back()) < 1e-9) pts.pop_back();
    return out;
  }

  int match_loop(const FiberPath& p) const {
    for (std::size_t l = 0; l < sheet_.loops.size(); ++l) {
      const Loop& loop = sheet_.loops[l];
      if (loop.closed != p.closed || loop.connections.size() != p.connections.size()) continue;
      const auto& a = p.connections;
      auto b = loop.connections;
      auto rb = b;
      std::reverse(rb.begin(), rb.end());
      if (!p.closed) {
        if (a == b || a == rb) return static_cast<int>(l);
        continue;
      }
      const std::size_t n = a.size();
      for (std::size_t r = 0; r < n; ++r) {
        bool f = true, g = true;
        for (std::size_t i = 0; i < n && (f || g); ++i) {
          f = f && a[(i + r) % n] == b[i];
          g = g && a[(i + r) % n] == rb[i];
        }
        if (f || g) return static_cast<int>(l);
      }
    }
    return -1;
  }

  void trace() {
    visited_.resize(g_.num_edges());
    for (const Edge& e : g_.edges()) visited_[e.id].assign(e.target, 0);
    auto used = [&](int e, int j) {
      const Edge& ed = g_.edges()[e];
      return owner_[ed.v1][J(ed.v1).side_of_edge(e)][j].kind != SlotOwner::free;
    };
    for (const Edge& e : g_.edges()) {
      for (int end = 0; end < 2; ++end) {
        const int v = end == 0 ? e.v1 : e.v2;
        const int sv = J(v).side_of_edge(e.id);
        for (int j = 0; j < e.target; ++j) {
          if (visited_[e.id][j]) continue;
          if (owner_[v][sv][local_slot(e.id, j, v)].kind != SlotOwner::terminal) continue;
          traced_.push_back(trace_from(e.id, j, end == 0, true));
        }
      }
    }
    for (const Edge& e : g_.edges()) {
      for (int j = 0; j < e.target; ++j) {
        if (visited_[e.id][j] || !used(e.id, j)) continue;
        traced_.push_back(trace_from(e.id, j, true, false));
      }
    }
    for (Traced& t : traced_) t.path.loop = match_loop(t.path);
  }

  // Open copy of a ring that leaves the window at `exit` and returns to `entry`.
  static std::vector<Point2> cut_ring(const std::vector<Point2>& ring, std::size_t s, Point2 entry, Point2 exit) {
    const std::size_t n = ring.size();
    std::vector<Point2> out{exit};
    for (std::size_t i = 1; i <= n; ++i) out.push_back(ring[(s + i) % n]);
    out.push_back(entry);
    return out;
  }

  void interloop() {
    std::map<int, std::vector<std::size_t>> rings;  // loop -> traced indices
    for (std::size_t i = 0; i < traced_.size(); ++i) {
      if (traced_[i].path.closed && traced_[i].path.loop >= 0) rings[traced_[i].path.loop].push_back(i);
    }
    std::set<std::size_t> consumed;
    std::map<std::size_t, FiberPath> merged;
    for (const auto& [loop, ids] : rings) {
      if (ids.size() < 2) continue;
      struct Choice {
        int edge = -1;
        std::vector<std::pair<int, std::size_t>> run;  // (slot, traced index)
        double length = 0.0;
      } best;
      std::set<int> edges(sheet_.loops[loop].edges.begin(), sheet_.loops[loop].edges.end());
      for (int e : edges) {
        std::vector<std::pair<int, std::size_t>> slots;
        bool once = true;
        for (std::size_t id : ids) {
          int hits = 0;
          for (const Traversal& t : traced_[id].trav) {
            if (t.edge == e) {
              ++hits;
              slots.push_back({t.slot, id});
            }
          }
          once = once && hits == 1;
        }
        if (!once) continue;
        std::sort(slots.begin(), slots.end());
        std::vector<std::pair<int, std::size_t>> run, cur;
        for (const auto& s : slots) {
          if (!cur.empty() && s.first != cur.back().first + 1) cur.clear();
          cur.push_back(s);
          if (cur.size() > run.size()) run = cur;
        }
        if (run.size() < 2) continue;
        const Edge& ed = g_.edges()[e];
        const double length = distance(rim(ed.v1, J(ed.v1).side_of_edge(e), 0),
                                       rim(ed.v2, J(ed.v2).side_of_edge(e), ed.target - 1));
        const double sp = J(ed.v1).sides[J(ed.v1).side_of_edge(e)].spacing;
        const double b = b_for(static_cast<int>(run.size()) - 2, sp);
        if (length < 2.0 * b + 2.0 * sp) continue;
        if (run.size() > best.run.size() || (run.size() == best.run.size() && length > best.length)) {
          best = {e, run, length};
        }
      }
      if (best.edge < 0) {
        plan_.warnings.push_back("layer " + std::to_string(plan_.layer) + ": loop " + std::to_string(loop) +
                                 " has " + std::to_string(ids.size()) +
                                 " rings but no edge has them in consecutive slots with straight length >= 2b + 2w");
        continue;
      }
      merged[best.run.front().second] = interloop_rings(loop, best.edge, best.run);
      for (const auto& r : best.run) consumed.insert(r.second);
    }
    for (std::size_t i = 0; i < traced_.size(); ++i) {
      if (auto it = merged.find(i); it != merged.end()) {
        plan_.paths.push_back(std::move(it->second));
      } else if (!consumed.count(i)) {
        plan_.paths.push_back(std::move(traced_[i].path));
      }
    }
  }

  double b_for(int offsets, double spacing) {
    const auto key = std::make_pair(offsets, spacing);
    auto it = b_cache_.find(key);
    if (it == b_cache_.end()) it = b_cache_.emplace(key, interloop_b(spacing, params_.min_radius, offsets)).first;
    return it->second;
  }

  FiberPath interloop_rings(int loop, int e, const std::vector<std::pair<int, std::size_t>>& run) {
    const Edge& ed = g_.edges()[e];
    const int s1 = J(ed.v1).side_of_edge(e);
    const double sp = J(ed.v1).sides[s1].spacing;
    const int k = static_cast<int>(run.size());
    const double b = b_for(k - 2, sp);
    const Point2 a0 = rim(ed.v1, s1, run[0].first);
    const Point2 b0 = rim(ed.v2, J(ed.v2).side_of_edge(e), ed.target - 1 - run[0].first);
    const Point2 dir = normalized(b0 - a0);
    const double t0 = (distance(a0, b0) - 2.0 * b) / 2.0;
    auto entry = [&](int slot) { return rim(ed.v1, s1, slot) + dir * t0; };
    auto exit = [&](int slot) { return rim(ed.v1, s1, slot) + dir * (t0 + 2.0 * b); };

    const Point2 e1 = entry(run[0].first);
    const Point2 e2 = exit(run[1].first);
    const CubicBezier ref{e1, e1 + dir * b, e2 - dir * b, e2};
    const Point2 n0 = left_normal(dir);
    const double sign = dot(rim(ed.v1, s1, run[1].first) - rim(ed.v1, s1, run[0].first), n0) > 0.0 ? 1.0 : -1.0;

    FiberPath out;
    out.loop = loop;
    out.closed = false;
    out.interlooped = true;
    for (int i = 0; i < k; ++i) {
      Traced& t = traced_[run[i].second];
      std::vector<Point2> ring = t.path.points;
      std::vector<int> conns = t.path.connections;
      std::size_t s = 0;
      bool forward = true;
      for (const Traversal& tr : t.trav) {
        if (tr.edge == e) {
          s = tr.point;
          forward = tr.forward;
        }
      }
      if (!forward) {
        std::reverse(ring.begin(), ring.end());
        std::reverse(conns.begin(), conns.end());
        const std::size_t n = ring.size();
        s = (2 * n - 2 - s) % n;
      }
      const auto open = cut_ring(ring, s, entry(run[i].first), exit(run[i].first));
      for (const Point2& p : open) append(out.points, p);
      out.connections.insert(out.connections.end(), conns.begin(), conns.end());
      if (i + 1 == k) break;
      InterloopConnector c;
      c.edge = e;
      c.index = i;
      c.b = b;
      if (i == 0) {
        c.curve = Curve{ref};
        c.points = sample_curve(ref, kDefaultOffsetSamples);
      } else {
        c.points = offset_curve(ref, sign * i * sp, kDefaultOffsetSamples).points;
      }
      c.points.front() = entry(run[i].first);
      c.points.back() = exit(run[i + 1].first);
      for (const Point2& p : c.points) append(out.points, p);
      plan_.connectors.push_back(std::move(c));
    }
    return out;
  }

  void build_fills() {
    for (const Edge& e : g_.edges()) {
      const int s1 = J(e.v1).side_of_edge(e.id);
      const int s2 = J(e.v2).side_of_edge(e.id);
      const Side& side = J(e.v1).sides[s1];
      const Point2 p1 = J(e.v1).center + side.dir * side.a;
      const Point2 p2 = J(e.v2).center + J(e.v2).sides[s2].dir * J(e.v2).sides[s2].a;
      int i = 0;
      while (i < e.target) {
        if (owner_[e.v1][s1][i].kind != SlotOwner::free) {
          ++i;
          continue;
        }
        int last = i;
        while (last + 1 < e.target && owner_[e.v1][s1][last + 1].kind == SlotOwner::free) ++last;
        const double top = side.lateral(i) + side.spacing / 2.0;
        const double bottom = side.lateral(last) - side.spacing / 2.0;
        FillPolygon f;
        f.edge = e.id;
        f.points = {p1 + side.left * bottom, p2 + side.left * bottom, p2 + side.left * top, p1 + side.left * top};
        plan_.fills.push_back(std::move(f));
        i = last + 1;
      }
    }
    for (const JunctionGeometry& j : plan_.junctions) {
      if (j.sides.size() < 3) continue;
      FillPolygon f;
      f.vertex = j.vertex;
      for (const Side& s : j.sides) {
        const double h = s.half_width() + s.spacing / 2.0;
        f.points.push_back(j.center + s.dir * s.a - s.left * h);
        f.points.push_back(j.center + s.dir * s.a + s.left * h);
      }
      plan_.fills.push_back(std::move(f));
    }
  }

  const FiberGraph& g_;
  const Sheet& sheet_;
  PlanParams params_;
  LayerPathPlan plan_;
  std::vector<int> x_;
  std::vector<int> conn_count_;
  std::vector<int> edge_used_;
  std::vector<JunctionCounts> counts_;
  std::vector<int> orient_;
  std::vector<std::vector<int>> offset_;
  std::vector<std::vector<std::vector<SlotOwner>>> owner_;
  std::vector<std::vector<char>> visited_;
  std::vector<Traced> traced_;
  std::map<std::pair<int, double>, double> b_cache_;
  int family_counter_ = 0;
};

double max_abs_polyline_curvature(const std::vector<Point2>& pts) {
  if (pts.size() < 3) return 0.0;
  double m = 0.0;
  for (double k : polyline_curvature(pts)) m = std::max(m, std::abs(k));
  return m;
}

// Smallest distance from the points of a to the segments of b, capped at `cap`.
double polyline_gap(const std::vector<Point2>& a, const std::vector<Point2>& b, double cap) {
  if (a.empty() || b.empty()) return cap;
  if (b.size() == 1) {
    double m = cap;
    for (const Point2& p : a) m = std::min(m, distance(p, b[0]));
    return m;
  }
  // Uniform grid over b's segments with cell size cap.
  std::map<std::pair<long, long>, std::vector<std::size_t>> grid;
  auto cell = [&](double v) { return static_cast<long>(std::floor(v / cap)); };
  for (std::size_t i = 0; i + 1 < b.size(); ++i) {
    const long x0 = cell(std::min(b[i].x, b[i + 1].x)), x1 = cell(std::max(b[i].x, b[i + 1].x));
    const long y0 = cell(std::min(b[i].y, b[i + 1].y)), y1 = cell(std::max(b[i].y, b[i + 1].y));
    for (long x = x0; x <= x1; ++x) {
      for (long y = y0; y <= y1; ++y) grid[{x, y}].push_back(i);
    }
  }
  double m = cap;
  for (const Point2& p : a) {
    const long cx = cell(p.x), cy = cell(p.y);
    for (long x = cx - 1; x <= cx + 1; ++x) {
      for (long y = cy - 1; y <= cy + 1; ++y) {
        auto it = grid.find({x, y});
        if (it == grid.end()) continue;
        for (std::size_t i : it->second) m = std::min(m, point_segment_distance(p, b[i], b[i + 1]));
      }
    }
  }
  return m;
}

}  // namespace

std::optional<Curve> build_edge_bow(Point2 r1, Point2 d1, Point2 r2, Point2 d2, const Box* hull) {
  double s = 0.0, t = 0.0;
  if (!intersect_lines(r1, d1, r2, d2, s, t)) return std::nullopt;
  if (s >= 0.0 || t >= 0.0) return std::nullopt;  // legs must point back toward P
  const Point2 u = r1 + d1 * s;
  if (hull && !inside_box(u, *hull)) return std::nullopt;
  return make_bow_curve(r1, u, r2, select_kind(angle_between(d1, d2)));
}

CubicBezier build_solitary_bow(Point2 r1, Point2 po1, Point2 r2, Point2 po2) {
  const double chord = distance(r1, r2);
  if (chord < kGeomTol) throw GeometryError("solitary bow with coincident rim points");
  const double k = (1.0 / 3.0) / chord;
  return CubicBezier{r1, r1 - po1 * k, r2 - po2 * k, r2};
}

std::optional<CubicBezier> build_s_bow(Point2 r1, Point2 d1, Point2 r2, Point2 d2, Point2 h1, Point2 h2,
                                       const Box* hull) {
  if (distance(h1, h2) < kGeomTol) return std::nullopt;
  const Point2 hd = normalized(h2 - h1);
  double s1 = 0, t1 = 0, s2 = 0, t2 = 0;
  if (!intersect_lines(r1, d1, h1, hd, s1, t1) || !intersect_lines(r2, d2, h1, hd, s2, t2)) return std::nullopt;
  const Point2 i1 = r1 + d1 * s1;
  const Point2 i2 = r2 + d2 * s2;
  if (s1 >= 0.0 || s2 >= 0.0 || distance(i1, i2) < 1e-6) return std::nullopt;
  if (hull && (!inside_box(i1, *hull) || !inside_box(i2, *hull))) return std::nullopt;
  return CubicBezier{r1, i1, i2, r2};
}

LayerPathPlan assemble_layer(const FiberGraph& g, const LayerSolution& layer, const PlanParams& params,
                             const std::vector<JunctionGeometry>* junctions) {
  std::vector<JunctionGeometry> j = junctions ? *junctions : parameterize_all(g, params);
  if (static_cast<int>(j.size()) != g.num_vertices()) throw InputError("junction geometry does not match the graph");
  return LayerBuilder(g, layer, params, std::move(j)).run();
}

CubicBezier interloop_reference(double b, double fiber_width) {
  return CubicBezier{{0.0, 0.0}, {b, 0.0}, {b, fiber_width}, {2.0 * b, fiber_width}};
}

double interloop_b(double fiber_width, double min_radius, int offsets) {
  if (!(fiber_width > 0.0) || !(min_radius > 0.0) || offsets < 0) {
    throw InputError("interlooping needs positive width and radius and a non-negative offset count");
  }
  const double limit = 1.0 / min_radius;
  auto ok = [&](double b) {
    const Curve ref = interloop_reference(b, fiber_width);
    if (max_abs_polyline_curvature(sample_curve(ref, kDefaultOffsetSamples)) > limit) return false;
    for (int k = 1; k <= offsets; ++k) {
      try {
        if (max_abs_polyline_curvature(offset_curve(ref, k * fiber_width, kDefaultOffsetSamples).points) > limit) {
          return false;
        }
      } catch (const GeometryError&) {
        return false;
      }
    }
    return true;
  };
  double hi = std::max(fiber_width, min_radius);
  while (!ok(hi)) {
    hi *= 2.0;
    if (hi > 1e6 * (fiber_width + min_radius)) throw GeometryError("interlooping parameter does not converge");
  }
  return numerics::bisect_threshold(ok, 0.0, hi, 1e-5);
}

PlanReport check_plan(const LayerPathPlan& plan, const PlanParams& params) {
  PlanReport report;
  const double limit = (1.0 / params.min_radius) * (1.0 + 1e-3);
  auto flag = [&](int vertex, double kappa, const std::string& what) {
    PlanViolation v;
    v.kind = PlanViolation::Kind::curvature;
    v.vertex = vertex;
    v.value = kappa;
    v.message = what + " has curvature " + std::to_string(kappa) + " above 1/" + std::to_string(params.min_radius);
    report.curvature.push_back(std::move(v));
  };
  for (std::size_t i = 0; i < plan.bows.size(); ++i) {
    const Bow& b = plan.bows[i];
    double kappa = 0.0;
    if (b.curve && b.points.size() > 1) {
      kappa = b.kind == BowKind::straight ? 0.0 : std::abs(max_curvature(*b.curve).kappa);
    } else {
      kappa = max_abs_polyline_curvature(b.points);
    }
    if (kappa > limit) {
      flag(b.vertex, kappa, std::string(to_string(b.kind)) + " bow " + std::to_string(i) + " at junction " +
                                std::to_string(b.vertex));
    }
  }
  for (const InterloopConnector& c : plan.connectors) {
    const double kappa = c.curve ? std::abs(max_curvature(*c.curve).kappa) : max_abs_polyline_curvature(c.points);
    if (kappa > limit) flag(-1, kappa, "interlooping connector " + std::to_string(c.index) + " on edge " + std::to_string(c.edge));
  }
  const double gap = 0.99 * params.fiber_width;
  std::map<int, std::vector<std::size_t>> by_vertex;
  for (std::size_t i = 0; i < plan.bows.size(); ++i) by_vertex[plan.bows[i].vertex].push_back(i);
  for (const auto& [v, ids] : by_vertex) {
    for (std::size_t x = 0; x < ids.size(); ++x) {
      for (std::size_t y = x + 1; y < ids.size(); ++y) {
        const Bow& a = plan.bows[ids[x]];
        const Bow& b = plan.bows[ids[y]];
        const double d = std::min(polyline_gap(a.points, b.points, gap), polyline_gap(b.points, a.points, gap));
        if (d < gap) {
          PlanViolation pv;
          pv.kind = PlanViolation::Kind::overlap;
          pv.vertex = v;
          pv.value = d;
          pv.message = "bows " + std::to_string(ids[x]) + " and " + std::to_string(ids[y]) + " at junction " +
                       std::to_string(v) + " are " + std::to_string(d) + " mm apart";
          report.overlap.push_back(std::move(pv));
        }
      }
    }
  }
  return report;
}

}  // namespace fiberloom
