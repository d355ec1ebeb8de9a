#include "fiberloom/export.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "fiberloom/errors.hpp"

namespace fiberloom {

namespace {

std::string points_attr(const std::vector<Point2>& pts) {
  std::string s;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) s += ' ';
    s += format_mm(pts[i].x) + "," + format_mm(pts[i].y);
  }
  return s;
}

}  // namespace

std::string format_mm(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string path_export(const LayerPathPlan& plan) {
  std::string out = "# fiberloom paths v1: layer loop_instance closed x1 y1 x2 y2 ...\n";
  for (const FiberPath& p : plan.paths) {
    out += std::to_string(plan.layer) + " " + std::to_string(p.instance) + " " + (p.closed ? "1" : "0");
    for (const Point2& q : p.points) out += " " + format_mm(q.x) + " " + format_mm(q.y);
    out += "\n";
  }
  return out;
}

std::string render_svg(const LayerPathPlan& plan, const FiberGraph& g, const PlanParams& params,
                       const SvgOptions& options) {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  for (const Vertex& v : g.vertices()) {
    x0 = std::min(x0, v.pos.x);
    y0 = std::min(y0, v.pos.y);
    x1 = std::max(x1, v.pos.x);
    y1 = std::max(y1, v.pos.y);
  }
  if (g.vertices().empty()) x0 = y0 = x1 = y1 = 0.0;
  x0 -= options.margin;
  y0 -= options.margin;
  x1 += options.margin;
  y1 += options.margin;
  const std::string w = format_mm(x1 - x0), h = format_mm(y1 - y0);

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + w + "mm\" height=\"" + h +
       "mm\" viewBox=\"0 0 " + w + " " + h + "\">\n";
  s += "<title>layer " + std::to_string(plan.layer) + ", sheet " + std::to_string(plan.sheet) + "</title>\n";
  // Flip to y-up about the bounding box.
  s += "<g transform=\"matrix(1 0 0 -1 " + format_mm(-x0) + " " + format_mm(y1) + ")\">\n";

  s += "<g id=\"fills\" fill=\"#c8c8c8\" stroke=\"none\">\n";
  for (const FillPolygon& f : plan.fills) s += "<polygon points=\"" + points_attr(f.points) + "\"/>\n";
  s += "</g>\n";

  s += "<g id=\"edges\" stroke=\"#e0e0e0\" stroke-width=\"0.3\" fill=\"none\">\n";
  for (const Edge& e : g.edges()) {
    const Point2 a = g.vertices()[e.v1].pos, b = g.vertices()[e.v2].pos;
    s += "<line x1=\"" + format_mm(a.x) + "\" y1=\"" + format_mm(a.y) + "\" x2=\"" + format_mm(b.x) + "\" y2=\"" +
         format_mm(b.y) + "\"/>\n";
  }
  s += "</g>\n";

  s += "<g id=\"fibers\" fill=\"none\" stroke=\"#1f4e79\" stroke-opacity=\"0.85\" stroke-width=\"" +
       format_mm(params.fiber_width) + "\" stroke-linejoin=\"round\" stroke-linecap=\"butt\">\n";
  for (const FiberPath& p : plan.paths) {
    const char* tag = p.closed ? "polygon" : "polyline";
    s += std::string("<") + tag + " class=\"fiber\" data-instance=\"" + std::to_string(p.instance) +
         "\" data-loop=\"" + std::to_string(p.loop) + "\" points=\"" + points_attr(p.points) + "\"/>\n";
  }
  s += "</g>\n";

  s += "<g id=\"vertices\" fill=\"#b00000\">\n";
  for (const Vertex& v : g.vertices()) {
    s += "<circle cx=\"" + format_mm(v.pos.x) + "\" cy=\"" + format_mm(v.pos.y) + "\" r=\"1.000000\"/>\n";
  }
  s += "</g>\n";

  if (options.rim_points) {
    s += "<g id=\"rims\" fill=\"#008000\">\n";
    for (const JunctionGeometry& j : plan.junctions) {
      for (const Side& side : j.sides) {
        for (int k = 0; k < side.n_bundles; ++k) {
          const Point2 r = side.rim(j.center, k);
          s += "<circle cx=\"" + format_mm(r.x) + "\" cy=\"" + format_mm(r.y) + "\" r=\"0.400000\"/>\n";
        }
      }
    }
    s += "</g>\n";
  }
  s += "</g>\n</svg>\n";
  return s;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw InputError("cannot move '" + tmp.string() + "' into place");
  }
}

}  // namespace fiberloom
