#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fiberloom/graph.hpp"
#include "fiberloom/ilp.hpp"

namespace fiberloom {

struct OptimizationParams {
  int n_layers = 1;
  double p = 2.0;  ///< residual exponent
  std::optional<std::vector<double>> min_connections;  ///< C x >= this, per connection
  std::optional<std::vector<double>> vertex_upper;     ///< V x <= this, per vertex
  std::optional<std::vector<double>> vertex_lower;     ///< V x >= this, per vertex
  bool clamp_residuals = true;
  /// Adds C x >= 1 for every adjacent (edge bow) connection.
  bool require_edge_bows = false;
};

/// Throws InputError if the parameters do not fit the graph.
void validate_params(const FiberGraph& g, const OptimizationParams& params);

struct LayerSolution {
  int layer = 0;  ///< 1-based
  int sheet = 0;
  std::vector<int> x;
  std::vector<double> c;  ///< objective vector of the chosen sheet
  double objective = 0.0;
};

struct PatternHistory {
  std::vector<LayerSolution> layers;
  std::vector<double> cumulative;  ///< sum over layers of C^{s[h]} x[h], per connection
};

PatternHistory empty_history(const FiberGraph& g);

/// Appends a layer and updates the cumulative sums.
void push_layer(const FiberGraph& g, PatternHistory& history, LayerSolution layer);

/// n c~ - cumulative, clamped at zero when params.clamp_residuals.
std::vector<double> residual(const FiberGraph& g, int n, const PatternHistory& history, bool clamp);

/// c(s, n) = C_s^T r^p with r the residual for layer n.
std::vector<double> objective_vector(const FiberGraph& g, int sheet, int n, const PatternHistory& history,
                                     const OptimizationParams& params);

/// Lower bounds on connection usage after applying require_edge_bows.
std::optional<std::vector<double>> effective_min_connections(const FiberGraph& g, const OptimizationParams& params);

/// The integer program for one sheet and objective vector.
IntegerProgram build_program(const FiberGraph& g, int sheet, const std::vector<double>& c,
                             const OptimizationParams& params);

/// Best sheet and loop counts for layer n (1-based). Sheet ties go to the
/// lowest index. Throws InfeasibleError when no sheet is feasible.
LayerSolution solve_layer(const FiberGraph& g, const OptimizationParams& params, const PatternHistory& history,
                          int n);

PatternHistory solve_all_layers(const FiberGraph& g, const OptimizationParams& params);

struct ConnectionReportRow {
  int connection = 0;
  /// Loops using it: plain loop ids for one sheet, "sheet:loop" otherwise.
  std::vector<std::string> loop_labels;
  double sum = 0.0;
  double target_total = 0.0;  ///< n c~
  std::vector<double> usage;  ///< per layer
};

std::vector<ConnectionReportRow> connection_report(const PatternHistory& history, const FiberGraph& g);

}  // namespace fiberloom
