#pragma once

#include <string>

#include "fiberloom/graph.hpp"
#include "fiberloom/path_plan.hpp"
#include "fiberloom/pattern.hpp"

namespace fiberloom {

inline constexpr int kProjectSchema = 1;
inline constexpr int kPatternSchema = 1;

/// Everything a project file describes.
struct Project {
  FiberGraph graph;
  OptimizationParams optimization;
  PlanParams plan;
};

/// Parses project JSON. Errors are InputError naming `source` and either the
/// line and column (syntax) or the offending field path such as edges[2].target.
Project parse_project(const std::string& text, const std::string& source = "<input>");
Project load_project(const std::string& path);

/// Canonical JSON text; parse_project(serialize_project(p)) rebuilds the same graph.
std::string serialize_project(const Project& project);

/// Machine-readable optimization result: per-layer solutions plus the
/// connection report.
std::string serialize_pattern(const FiberGraph& g, const OptimizationParams& params, const PatternHistory& history);

/// Rebuilds the history from serialize_pattern output, checking it against `g`.
PatternHistory parse_pattern(const FiberGraph& g, const std::string& text, const std::string& source = "<pattern>");

}  // namespace fiberloom
