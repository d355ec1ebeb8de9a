#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fiberloom/point.hpp"

namespace fiberloom {

struct Vertex {
  int id = 0;
  Point2 pos;
};

struct Edge {
  int id = 0;
  int v1 = 0;
  int v2 = 0;
  int target = 1;      ///< bundle count
  double width = 0.0;  ///< printed width of one bundle in mm; 0 means the project fiber width

  int other(int v) const { return v == v1 ? v2 : v1; }
  bool touches(int v) const { return v == v1 || v == v2; }
};

/// Uninterrupted fiber bond between two edges through their shared vertex.
struct Connection {
  int id = 0;
  int edge1 = 0;  ///< edge1 < edge2
  int edge2 = 0;
  int mid_vertex = 0;
  double target = 0.0;

  int other_edge(int e) const { return e == edge1 ? edge2 : edge1; }
};

/// Dense row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  bool operator==(const Matrix&) const = default;

  std::vector<double> row(int r) const;
  std::vector<double> multiply(const std::vector<double>& x) const;             ///< M x
  std::vector<double> multiply_transposed(const std::vector<double>& y) const;  ///< M^T y
};

/// How a loop was written in the project file; kept for round-tripping.
struct LoopSpec {
  bool by_edges = true;
  std::vector<int> items;  ///< edge ids (closed loops repeat the first) or connection ids
  bool closed = false;     ///< only read for connection lists
  bool operator==(const LoopSpec&) const = default;
};

struct Loop {
  int id = 0;
  std::vector<int> connections;
  /// Traversed edges in order. Closed loops list each traversal once, starting
  /// with the edge that leads into the first connection.
  std::vector<int> edges;
  bool closed = false;
  LoopSpec spec;
};

struct Sheet {
  int id = 0;
  std::vector<Loop> loops;
  Matrix C;  ///< N_c x N_l, connection usage
  Matrix E;  ///< N_e x N_l, edge traversals
  Matrix V;  ///< N_v x N_l, connections with that mid vertex
};

/// Edge leaving a junction, seen from the junction.
struct JunctionSide {
  int edge = 0;
  int far_vertex = 0;
  Point2 dir;          ///< unit vector from the junction toward far_vertex
  double angle = 0.0;  ///< polar angle of dir
};

class FiberGraph {
 public:
  /// Validates vertices and edges and derives connections. `overrides` replaces
  /// the default target of the connection between the given edge pair.
  FiberGraph(std::vector<Vertex> vertices, std::vector<Edge> edges,
             const std::map<std::pair<int, int>, double>& overrides = {});

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Connection>& connections() const { return connections_; }
  const std::vector<Sheet>& sheets() const { return sheets_; }
  const std::map<std::pair<int, int>, double>& overrides() const { return overrides_; }

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_connections() const { return static_cast<int>(connections_.size()); }

  std::vector<double> edge_targets() const;
  std::vector<double> connection_targets() const;

  /// Connection id for an edge pair in either order, or nullopt.
  std::optional<int> connection_between(int e1, int e2) const;

  std::vector<int> incident_edges(int v) const { return incident_[v]; }
  int degree(int v) const { return static_cast<int>(incident_[v].size()); }

  /// Sides sorted counter-clockwise by polar angle, ties by edge id.
  std::vector<JunctionSide> junction_sides(int v) const;

  /// True if the two edges of the connection are angular neighbours at its
  /// junction (an edge bow); false for the crossing pairs of a 4-edge junction.
  bool is_adjacent(int connection) const;

  Loop loop_from_spec(const LoopSpec& spec) const;
  Loop loop_from_edges(const std::vector<int>& edge_ids) const;
  Loop loop_from_connections(const std::vector<int>& connection_ids, bool closed) const;

  /// Adds a sheet built from loop specs; returns its index.
  int add_sheet(const std::vector<LoopSpec>& loops);

 private:
  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::vector<Connection> connections_;
  std::vector<Sheet> sheets_;
  std::vector<std::vector<int>> incident_;
  std::map<std::pair<int, int>, int> by_pair_;
  std::map<std::pair<int, int>, double> overrides_;
};

/// One connection per unordered pair of edges sharing a vertex, sorted by
/// (edge1, edge2), target max(target1, target2) unless overridden.
std::vector<Connection> derive_connections(const std::vector<Edge>& edges,
                                           const std::map<std::pair<int, int>, double>& overrides = {});

void build_sheet_matrices(const FiberGraph& g, Sheet& sheet);

struct CompatibilityViolation {
  int vertex = 0;
  int connection_a = 0;  ///< one crossing direction
  int connection_b = 0;  ///< the other
  std::string message;
};

/// Crossing conflicts at 4-edge junctions: a sheet may use at most one of the
/// two opposite-side pairs. Throws InputError if any junction has five or more edges.
std::vector<CompatibilityViolation> validate_sheet_compatibility(const FiberGraph& g, const Sheet& sheet);

}  // namespace fiberloom
