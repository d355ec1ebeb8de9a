#include "fiberloom/pattern.hpp"

#include <cmath>
#include <sstream>

#include "fiberloom/errors.hpp"

namespace fiberloom {

void validate_params(const FiberGraph& g, const OptimizationParams& params) {
  if (params.n_layers < 0) throw InputError("n_layers must be non-negative");
  if (!(params.p > 0.0) || !std::isfinite(params.p)) throw InputError("p must be positive");
  auto check = [](const std::optional<std::vector<double>>& v, int n, const char* name) {
    if (!v) return;
    if (static_cast<int>(v->size()) != n) {
      throw InputError(std::string(name) + " needs " + std::to_string(n) + " entries, got " + std::to_string(v->size()));
    }
    for (double x : *v) {
      if (!std::isfinite(x) || x < 0.0) throw InputError(std::string(name) + " entries must be non-negative");
    }
  };
  check(params.min_connections, g.num_connections(), "min_connections");
  check(params.vertex_upper, g.num_vertices(), "vertex_upper");
  check(params.vertex_lower, g.num_vertices(), "vertex_lower");
}

PatternHistory empty_history(const FiberGraph& g) {
  PatternHistory h;
  h.cumulative.assign(g.num_connections(), 0.0);
  return h;
}

void push_layer(const FiberGraph& g, PatternHistory& history, LayerSolution layer) {
  std::vector<double> x(layer.x.begin(), layer.x.end());
  const auto used = g.sheets()[layer.sheet].C.multiply(x);
  for (std::size_t c = 0; c < used.size(); ++c) history.cumulative[c] += used[c];
  history.layers.push_back(std::move(layer));
}

std::vector<double> residual(const FiberGraph& g, int n, const PatternHistory& history, bool clamp) {
  std::vector<double> r = g.connection_targets();
  for (std::size_t c = 0; c < r.size(); ++c) {
    r[c] = n * r[c] - history.cumulative[c];
    if (clamp && r[c] < 0.0) r[c] = 0.0;
  }
  return r;
}

std::vector<double> objective_vector(const FiberGraph& g, int sheet, int n, const PatternHistory& history,
                                     const OptimizationParams& params) {
  std::vector<double> r = residual(g, n, history, params.clamp_residuals);
  const bool integer_p = params.p == std::floor(params.p);
  for (std::size_t c = 0; c < r.size(); ++c) {
    if (r[c] < 0.0 && !integer_p) {
      throw InputError("residual of connection " + std::to_string(c) + " is negative and p = " +
                       std::to_string(params.p) + " is not an integer");
    }
    r[c] = std::pow(r[c], params.p);
  }
  return g.sheets()[sheet].C.multiply_transposed(r);
}

std::optional<std::vector<double>> effective_min_connections(const FiberGraph& g, const OptimizationParams& params) {
  if (!params.require_edge_bows) return params.min_connections;
  std::vector<double> lo = params.min_connections.value_or(std::vector<double>(g.num_connections(), 0.0));
  for (const Connection& c : g.connections()) {
    if (g.is_adjacent(c.id)) lo[c.id] = std::max(lo[c.id], 1.0);
  }
  return lo;
}

IntegerProgram build_program(const FiberGraph& g, int sheet, const std::vector<double>& c,
                             const OptimizationParams& params) {
  const Sheet& s = g.sheets()[sheet];
  IntegerProgram p;
  p.objective = c;
  const auto et = g.edge_targets();
  for (int e = 0; e < g.num_edges(); ++e) p.leq.push_back({s.E.row(e), et[e], "edge " + std::to_string(e) + " target"});
  if (auto lo = effective_min_connections(g, params)) {
    for (int k = 0; k < g.num_connections(); ++k) {
      if ((*lo)[k] > 0.0) p.geq.push_back({s.C.row(k), (*lo)[k], "connection " + std::to_string(k) + " minimum"});
    }
  }
  if (params.vertex_upper) {
    for (int v = 0; v < g.num_vertices(); ++v) {
      p.leq.push_back({s.V.row(v), (*params.vertex_upper)[v], "vertex " + std::to_string(v) + " maximum"});
    }
  }
  if (params.vertex_lower) {
    for (int v = 0; v < g.num_vertices(); ++v) {
      if ((*params.vertex_lower)[v] > 0.0) {
        p.geq.push_back({s.V.row(v), (*params.vertex_lower)[v], "vertex " + std::to_string(v) + " minimum"});
      }
    }
  }
  return p;
}

LayerSolution solve_layer(const FiberGraph& g, const OptimizationParams& params, const PatternHistory& history,
                          int n) {
  if (g.sheets().empty()) throw InputError("the project defines no sheets");
  std::optional<LayerSolution> best;
  double best_eps = 0.0;
  std::ostringstream why;
  for (int s = 0; s < static_cast<int>(g.sheets().size()); ++s) {
    const std::vector<double> c = objective_vector(g, s, n, history, params);
    const IntegerProgram prog = build_program(g, s, c, params);
    const IlpSolution sol = solve(prog);
    if (sol.status != IlpStatus::optimal) {
      why << " sheet " << s << ":";
      for (const auto& d : sol.diagnostics) why << " " << d << ";";
      continue;
    }
    const double eps = std::max(best_eps, program_tolerance(prog));
    if (!best || sol.objective_value > best->objective + eps) {
      best = LayerSolution{n, s, sol.x, c, sol.objective_value};
      best_eps = program_tolerance(prog);
    }
  }
  if (!best) throw InfeasibleError("layer " + std::to_string(n) + " is infeasible in every sheet:" + why.str());
  return *best;
}

PatternHistory solve_all_layers(const FiberGraph& g, const OptimizationParams& params) {
  validate_params(g, params);
  PatternHistory h = empty_history(g);
  for (int n = 1; n <= params.n_layers; ++n) push_layer(g, h, solve_layer(g, params, h, n));
  return h;
}

std::vector<ConnectionReportRow> connection_report(const PatternHistory& history, const FiberGraph& g) {
  std::vector<ConnectionReportRow> rows;
  const int n = static_cast<int>(history.layers.size());
  const bool one_sheet = g.sheets().size() == 1;
  for (const Connection& c : g.connections()) {
    ConnectionReportRow row;
    row.connection = c.id;
    for (const Sheet& s : g.sheets()) {
      for (int l = 0; l < s.C.cols; ++l) {
        if (s.C(c.id, l) == 0.0) continue;
        row.loop_labels.push_back(one_sheet ? std::to_string(l) : std::to_string(s.id) + ":" + std::to_string(l));
      }
    }
    row.target_total = n * c.target;
    for (const LayerSolution& layer : history.layers) {
      const Matrix& C = g.sheets()[layer.sheet].C;
      double used = 0.0;
      for (int l = 0; l < C.cols; ++l) used += C(c.id, l) * layer.x[l];
      row.usage.push_back(used);
    }
    row.sum = history.cumulative.empty() ? 0.0 : history.cumulative[c.id];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fiberloom
