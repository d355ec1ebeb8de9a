#include "fiberloom/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "fiberloom/errors.hpp"

namespace fiberloom {

std::vector<double> Matrix::row(int r) const {
  return {data.begin() + static_cast<std::ptrdiff_t>(r) * cols, data.begin() + static_cast<std::ptrdiff_t>(r + 1) * cols};
}

std::vector<double> Matrix::multiply(const std::vector<double>& x) const {
  std::vector<double> out(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out[r] += (*this)(r, c) * x[c];
  }
  return out;
}

std::vector<double> Matrix::multiply_transposed(const std::vector<double>& y) const {
  std::vector<double> out(cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out[c] += (*this)(r, c) * y[r];
  }
  return out;
}

namespace {

int shared_vertex(const Edge& a, const Edge& b) {
  if (a.v1 == b.v1 || a.v1 == b.v2) return a.v1;
  if (a.v2 == b.v1 || a.v2 == b.v2) return a.v2;
  return -1;
}

std::pair<int, int> ordered(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

}  // namespace

std::vector<Connection> derive_connections(const std::vector<Edge>& edges,
                                           const std::map<std::pair<int, int>, double>& overrides) {
  std::vector<Connection> out;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    for (std::size_t j = i + 1; j < edges.size(); ++j) {
      const int v = shared_vertex(edges[i], edges[j]);
      if (v < 0) continue;
      Connection c;
      c.edge1 = std::min(edges[i].id, edges[j].id);
      c.edge2 = std::max(edges[i].id, edges[j].id);
      c.mid_vertex = v;
      c.target = std::max(edges[i].target, edges[j].target);
      if (auto it = overrides.find({c.edge1, c.edge2}); it != overrides.end()) c.target = it->second;
      out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Connection& a, const Connection& b) { return std::pair{a.edge1, a.edge2} < std::pair{b.edge1, b.edge2}; });
  for (std::size_t k = 0; k < out.size(); ++k) out[k].id = static_cast<int>(k);
  return out;
}

FiberGraph::FiberGraph(std::vector<Vertex> vertices, std::vector<Edge> edges,
                       const std::map<std::pair<int, int>, double>& overrides)
    : vertices_(std::move(vertices)), edges_(std::move(edges)) {
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (vertices_[i].id != static_cast<int>(i)) {
      throw InputError("vertex ids must be contiguous from 0; found id " + std::to_string(vertices_[i].id) +
                       " at position " + std::to_string(i));
    }
    if (!is_finite(vertices_[i].pos)) throw InputError("vertex " + std::to_string(i) + " has a non-finite position");
  }
  incident_.assign(vertices_.size(), {});
  std::set<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    const std::string name = "edge " + std::to_string(e.id);
    if (e.id != static_cast<int>(i)) throw InputError("edge ids must be contiguous from 0; found id " + std::to_string(e.id));
    if (e.v1 < 0 || e.v1 >= num_vertices() || e.v2 < 0 || e.v2 >= num_vertices()) {
      throw InputError(name + " references an unknown vertex");
    }
    if (e.v1 == e.v2) throw InputError(name + " is a self loop");
    if (e.target < 1) throw InputError(name + " needs a target of at least 1");
    if (e.width < 0.0 || !std::isfinite(e.width)) throw InputError(name + " has an invalid width");
    if (distance(vertices_[e.v1].pos, vertices_[e.v2].pos) == 0.0) throw InputError(name + " has zero length");
    if (!pairs.insert(ordered(e.v1, e.v2)).second) throw InputError(name + " duplicates another edge's vertex pair");
    incident_[e.v1].push_back(e.id);
    incident_[e.v2].push_back(e.id);
  }
  for (const auto& [key, value] : overrides) {
    const auto [a, b] = key;
    if (a < 0 || b < 0 || a >= num_edges() || b >= num_edges() || a == b ||
        shared_vertex(edges_[a], edges_[b]) < 0) {
      throw InputError("connection target override for edges " + std::to_string(a) + ", " + std::to_string(b) +
                       " does not name a connection");
    }
    if (!(value > 0.0) || !std::isfinite(value)) throw InputError("connection target overrides must be positive");
    overrides_[ordered(a, b)] = value;
  }
  connections_ = derive_connections(edges_, overrides_);
  for (const Connection& c : connections_) by_pair_[{c.edge1, c.edge2}] = c.id;
}

std::vector<double> FiberGraph::edge_targets() const {
  std::vector<double> t;
  for (const Edge& e : edges_) t.push_back(e.target);
  return t;
}

std::vector<double> FiberGraph::connection_targets() const {
  std::vector<double> t;
  for (const Connection& c : connections_) t.push_back(c.target);
  return t;
}

std::optional<int> FiberGraph::connection_between(int e1, int e2) const {
  if (auto it = by_pair_.find(ordered(e1, e2)); it != by_pair_.end()) return it->second;
  return std::nullopt;
}

std::vector<JunctionSide> FiberGraph::junction_sides(int v) const {
  std::vector<JunctionSide> sides;
  const Point2 p = vertices_[v].pos;
  for (int e : incident_[v]) {
    JunctionSide s;
    s.edge = e;
    s.far_vertex = edges_[e].other(v);
    s.dir = normalized(vertices_[s.far_vertex].pos - p);
    s.angle = polar_angle(s.dir);
    sides.push_back(s);
  }
  std::sort(sides.begin(), sides.end(), [](const JunctionSide& a, const JunctionSide& b) {
    return a.angle != b.angle ? a.angle < b.angle : a.edge < b.edge;
  });
  return sides;
}

bool FiberGraph::is_adjacent(int connection) const {
  const Connection& c = connections_[connection];
  const auto sides = junction_sides(c.mid_vertex);
  const int n = static_cast<int>(sides.size());
  if (n <= 3) return true;
  for (int i = 0; i < n; ++i) {
    const int a = sides[i].edge;
    const int b = sides[(i + 1) % n].edge;
    if (ordered(a, b) == std::pair{c.edge1, c.edge2}) return true;
  }
  return false;
}

Loop FiberGraph::loop_from_edges(const std::vector<int>& edge_ids) const {
  if (edge_ids.empty()) throw InputError("loop has no edges");
  for (int e : edge_ids) {
    if (e < 0 || e >= num_edges()) throw InputError("loop references unknown edge " + std::to_string(e));
  }
  Loop loop;
  loop.spec = {true, edge_ids, false};
  std::vector<int> path = edge_ids;
  if (path.size() >= 3 && path.front() == path.back()) {
    loop.closed = true;
    path.pop_back();
  }
  if (path.size() < 2) throw InputError("loop needs at least two edges");
  const std::size_t n = path.size();
  const std::size_t links = loop.closed ? n : n - 1;
  for (std::size_t i = 0; i < links; ++i) {
    const int a = path[i];
    const int b = path[(i + 1) % n];
    auto c = connection_between(a, b);
    if (!c) {
      throw InputError("loop edges " + std::to_string(a) + " and " + std::to_string(b) + " do not share a vertex");
    }
    loop.connections.push_back(*c);
  }
  loop.edges = path;
  // A path entering an edge at one end must leave at the other.
  for (std::size_t i = 0; i + 1 < loop.connections.size() + (loop.closed ? 1 : 0); ++i) {
    const Connection& c1 = connections_[loop.connections[i]];
    const Connection& c2 = connections_[loop.connections[(i + 1) % loop.connections.size()]];
    if (c1.mid_vertex == c2.mid_vertex) {
      throw InputError("loop turns back on edge " + std::to_string(path[(i + 1) % n]) + " at vertex " +
                       std::to_string(c1.mid_vertex));
    }
  }
  return loop;
}

Loop FiberGraph::loop_from_connections(const std::vector<int>& ids, bool closed) const {
  if (ids.empty()) throw InputError("loop has no connections");
  for (int c : ids) {
    if (c < 0 || c >= num_connections()) throw InputError("loop references unknown connection " + std::to_string(c));
  }
  const std::size_t n = ids.size();
  if (closed && n < 2) throw InputError("closed loop needs at least two connections");
  auto shared_edge = [&](int ca, int cb) {
    const Connection& a = connections_[ca];
    const Connection& b = connections_[cb];
    if (ca == cb) return -1;
    if (a.edge1 == b.edge1 || a.edge1 == b.edge2) return a.edge1;
    if (a.edge2 == b.edge1 || a.edge2 == b.edge2) return a.edge2;
    return -1;
  };
  std::vector<int> shared;
  const std::size_t links = closed ? n : n - 1;
  for (std::size_t i = 0; i < links; ++i) {
    const int e = shared_edge(ids[i], ids[(i + 1) % n]);
    if (e < 0) {
      throw InputError("loop connections " + std::to_string(ids[i]) + " and " + std::to_string(ids[(i + 1) % n]) +
                       " do not chain");
    }
    shared.push_back(e);
  }
  std::vector<int> edges;
  if (closed) {
    // shared[i] joins connection i and i+1; the edge into connection 0 is the last link.
    edges.push_back(shared.back());
    for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back(shared[i]);
  } else {
    const Connection& first = connections_[ids.front()];
    edges.push_back(n == 1 ? first.edge1 : first.other_edge(shared.front()));
    for (int e : shared) edges.push_back(e);
    const Connection& last = connections_[ids.back()];
    edges.push_back(n == 1 ? first.edge2 : last.other_edge(shared.back()));
  }
  Loop loop;
  loop.spec = {false, ids, closed};
  loop.closed = closed;
  loop.connections = ids;
  loop.edges = edges;
  for (std::size_t i = 0; i + 1 < n + (closed ? 1 : 0); ++i) {
    if (connections_[ids[i]].mid_vertex == connections_[ids[(i + 1) % n]].mid_vertex) {
      throw InputError("loop turns back on edge " + std::to_string(shared[i]));
    }
  }
  return loop;
}

Loop FiberGraph::loop_from_spec(const LoopSpec& spec) const {
  Loop l = spec.by_edges ? loop_from_edges(spec.items) : loop_from_connections(spec.items, spec.closed);
  l.spec = spec;
  return l;
}

int FiberGraph::add_sheet(const std::vector<LoopSpec>& loops) {
  Sheet s;
  s.id = static_cast<int>(sheets_.size());
  for (const LoopSpec& spec : loops) {
    Loop l = loop_from_spec(spec);
    l.id = static_cast<int>(s.loops.size());
    s.loops.push_back(std::move(l));
  }
  build_sheet_matrices(*this, s);
  sheets_.push_back(std::move(s));
  return sheets_.back().id;
}

void build_sheet_matrices(const FiberGraph& g, Sheet& sheet) {
  const int nl = static_cast<int>(sheet.loops.size());
  sheet.C = Matrix(g.num_connections(), nl);
  sheet.E = Matrix(g.num_edges(), nl);
  sheet.V = Matrix(g.num_vertices(), nl);
  for (int l = 0; l < nl; ++l) {
    const Loop& loop = sheet.loops[l];
    for (int c : loop.connections) {
      sheet.C(c, l) += 1.0;
      sheet.V(g.connections()[c].mid_vertex, l) += 1.0;
    }
    for (int e : loop.edges) sheet.E(e, l) += 1.0;
  }
}

std::vector<CompatibilityViolation> validate_sheet_compatibility(const FiberGraph& g, const Sheet& sheet) {
  std::vector<CompatibilityViolation> out;
  std::vector<bool> used(g.num_connections(), false);
  for (const Loop& l : sheet.loops) {
    for (int c : l.connections) used[c] = true;
  }
  for (int v = 0; v < g.num_vertices(); ++v) {
    const int deg = g.degree(v);
    if (deg >= 5) {
      throw InputError("vertex " + std::to_string(v) + " has " + std::to_string(deg) +
                       " edges; junctions of more than four edges are not supported");
    }
    if (deg != 4) continue;
    const auto sides = g.junction_sides(v);
    const int ca = *g.connection_between(sides[0].edge, sides[2].edge);
    const int cb = *g.connection_between(sides[1].edge, sides[3].edge);
    if (used[ca] && used[cb]) {
      std::ostringstream msg;
      msg << "sheet " << sheet.id << " crosses both ways at vertex " << v << " (connections " << ca << " and " << cb
          << ")";
      out.push_back({v, ca, cb, msg.str()});
    }
  }
  return out;
}

}  // namespace fiberloom
