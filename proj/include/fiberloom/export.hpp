#pragma once

#include <string>

#include "fiberloom/graph.hpp"
#include "fiberloom/path_plan.hpp"

namespace fiberloom {

/// Fixed 6-decimal millimetre text, without "-0.000000".
std::string format_mm(double v);

/// Line records `layer loop_instance closed x1 y1 x2 y2 ...`, one per fiber
/// path, after a `#` header line. Open paths start and end at their end points.
std::string path_export(const LayerPathPlan& plan);

struct SvgOptions {
  bool rim_points = false;
  double margin = 10.0;  ///< mm around the graph bounds
};

/// SVG 1.1, 1 user unit = 1 mm, y up. Each fiber path is one element with
/// class="fiber" (polygon when closed) stroked at the fiber width. Fills are gray.
std::string render_svg(const LayerPathPlan& plan, const FiberGraph& g, const PlanParams& params,
                       const SvgOptions& options = {});

/// Writes through a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace fiberloom
