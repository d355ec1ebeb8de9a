#include "fiberloom/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "fiberloom/errors.hpp"
#include "fiberloom/export.hpp"
#include "fiberloom/ilp.hpp"
#include "fiberloom/path_plan.hpp"
#include "fiberloom/pattern.hpp"
#include "fiberloom/project_io.hpp"

namespace fiberloom::cli {

namespace {

using json = nlohmann::json;

std::string num(double v) {
  char buf[64];
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.6g", v);
  }
  std::string s(buf);
  return s == "-0" ? "0" : s;
}

template <typename T>
std::string tuple(const std::vector<T>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(static_cast<double>(v[i]));
  return s + ")";
}

std::string joined(const std::vector<std::string>& v, const char* sep = ", ") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string rpad(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

std::string coord(Point2 p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "(%4s,%4s)", num(p.x).c_str(), num(p.y).c_str());
  return buf;
}

std::vector<std::vector<std::string>> loops_per_edge(const FiberGraph& g) {
  std::vector<std::vector<std::string>> out(g.num_edges());
  const bool one = g.sheets().size() == 1;
  for (const Sheet& s : g.sheets()) {
    for (int l = 0; l < s.E.cols; ++l) {
      for (int e = 0; e < g.num_edges(); ++e) {
        if (s.E(e, l) != 0.0) out[e].push_back(one ? std::to_string(l) : std::to_string(s.id) + ":" + std::to_string(l));
      }
    }
  }
  return out;
}

std::vector<std::vector<std::string>> loops_per_connection(const FiberGraph& g) {
  std::vector<std::vector<std::string>> out(g.num_connections());
  const bool one = g.sheets().size() == 1;
  for (const Sheet& s : g.sheets()) {
    for (int l = 0; l < s.C.cols; ++l) {
      for (int c = 0; c < g.num_connections(); ++c) {
        if (s.C(c, l) != 0.0) out[c].push_back(one ? std::to_string(l) : std::to_string(s.id) + ":" + std::to_string(l));
      }
    }
  }
  return out;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(static_cast<long long>(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

void print_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  out << name << " (" << m.rows << " x " << m.cols << ")\n";
  for (int r = 0; r < m.rows; ++r) {
    out << rpad(std::to_string(r), 4) << " |";
    for (int c = 0; c < m.cols; ++c) out << ' ' << rpad(num(m(r, c)), 2);
    out << "\n";
  }
}

// A-C-B vertices of a connection: far end of edge 1, middle, far end of edge 2.
std::array<Point2, 3> connection_points(const FiberGraph& g, const Connection& c) {
  const auto& v = g.vertices();
  const Edge& e1 = g.edges()[c.edge1];
  const Edge& e2 = g.edges()[c.edge2];
  return {v[e1.other(c.mid_vertex)].pos, v[c.mid_vertex].pos, v[e2.other(c.mid_vertex)].pos};
}

// ---- derive ----

void derive_table(std::ostream& out, const FiberGraph& g) {
  const auto edge_loops = loops_per_edge(g);
  std::vector<std::vector<std::string>> edge_conns(g.num_edges());
  for (const Connection& c : g.connections()) {
    edge_conns[c.edge1].push_back(std::to_string(c.id));
    edge_conns[c.edge2].push_back(std::to_string(c.id));
  }
  out << "Edges\n";
  out << "id  P   Q   target  part of connections  part of loops\n";
  for (const Edge& e : g.edges()) {
    out << pad(std::to_string(e.id), 4) << pad(std::to_string(e.v1), 4) << pad(std::to_string(e.v2), 4)
        << pad(std::to_string(e.target), 8) << pad(joined(edge_conns[e.id]), 21) << joined(edge_loops[e.id]) << "\n";
  }
  const auto conn_loops = loops_per_connection(g);
  out << "\nConnections\n";
  out << "id  edge 1  edge 2  vertex  target  part of loops\n";
  for (const Connection& c : g.connections()) {
    out << pad(std::to_string(c.id), 4) << pad(std::to_string(c.edge1), 8) << pad(std::to_string(c.edge2), 8)
        << pad(std::to_string(c.mid_vertex), 8) << pad(num(c.target), 8) << joined(conn_loops[c.id]) << "\n";
  }
  for (const Sheet& s : g.sheets()) {
    out << "\nSheet " << s.id << " loops\n";
    out << "id  closed  connections          edges\n";
    for (std::size_t l = 0; l < s.loops.size(); ++l) {
      const Loop& loop = s.loops[l];
      std::vector<std::string> cs, es;
      for (int c : loop.connections) cs.push_back(std::to_string(c));
      for (int e : loop.edges) es.push_back(std::to_string(e));
      std::string edges = joined(es);
      if (loop.closed && !loop.edges.empty()) edges += " (," + std::to_string(loop.edges.front()) + ")";
      out << pad(std::to_string(l), 4) << pad(loop.closed ? "yes" : "no", 8) << pad(joined(cs), 21) << edges << "\n";
    }
    out << "\n";
    print_matrix(out, "C" + std::to_string(s.id), s.C);
    out << "\n";
    print_matrix(out, "E" + std::to_string(s.id), s.E);
  }
}

void derive_records(std::ostream& out, const FiberGraph& g) {
  json doc = {{"schema", kPatternSchema}, {"kind", "derive"}};
  const auto edge_loops = loops_per_edge(g);
  json edges = json::array();
  for (const Edge& e : g.edges()) {
    edges.push_back({{"id", e.id}, {"P", e.v1}, {"Q", e.v2}, {"target", e.target}, {"loops", edge_loops[e.id]}});
  }
  doc["edges"] = edges;
  const auto conn_loops = loops_per_connection(g);
  json conns = json::array();
  for (const Connection& c : g.connections()) {
    conns.push_back({{"id", c.id},
                     {"edges", {c.edge1, c.edge2}},
                     {"vertex", c.mid_vertex},
                     {"target", c.target},
                     {"loops", conn_loops[c.id]}});
  }
  doc["connections"] = conns;
  json sheets = json::array();
  for (const Sheet& s : g.sheets()) {
    json loops = json::array();
    for (const Loop& l : s.loops) {
      loops.push_back({{"closed", l.closed}, {"connections", l.connections}, {"edges", l.edges}});
    }
    sheets.push_back({{"id", s.id}, {"loops", loops}, {"C", matrix_json(s.C)}, {"E", matrix_json(s.E)}});
  }
  doc["sheets"] = sheets;
  out << doc.dump(2) << "\n";
}

// ---- optimize ----

void optimize_table(std::ostream& out, const FiberGraph& g, const PatternHistory& h) {
  out << "n   sheet  x*          c                    objective\n";
  for (const LayerSolution& l : h.layers) {
    out << pad(std::to_string(l.layer), 4) << pad(std::to_string(l.sheet), 7) << pad(tuple(l.x), 12)
        << pad(tuple(l.c), 21) << num(l.objective) << "\n";
  }
  out << "\ncid  A           C           B           loops    sum vs. n*target  usage in layers\n";
  for (const ConnectionReportRow& r : connection_report(h, g)) {
    const auto p = connection_points(g, g.connections()[r.connection]);
    std::vector<std::string> usage;
    for (double u : r.usage) usage.push_back(num(u));
    out << pad(std::to_string(r.connection), 5) << pad(coord(p[0]), 12) << pad(coord(p[1]), 12)
        << pad(coord(p[2]), 12) << pad(joined(r.loop_labels), 9)
        << pad(rpad(num(r.sum), 3) + " vs. " + rpad(num(r.target_total), 4), 18) << joined(usage, " ") << "\n";
  }
}

// ---- enumerate ----

struct EnumRow {
  int sheet = 0;
  std::vector<int> x;
  double objective = 0.0;
  bool dominated = false;
};

std::vector<EnumRow> enumerate_rows(const FiberGraph& g, const OptimizationParams& opt, const PatternHistory& h,
                                    int n) {
  std::vector<EnumRow> rows;
  for (int s = 0; s < static_cast<int>(g.sheets().size()); ++s) {
    if (g.sheets()[s].loops.empty()) continue;
    const auto c = objective_vector(g, s, n, h, opt);
    std::vector<FeasiblePoint> pts;
    try {
      pts = enumerate_feasible(build_program(g, s, c, opt));
    } catch (const IntractableError& e) {
      throw IntractableError(std::string(e.what()) + "; use 'fiberloom optimize' instead");
    }
    std::reverse(pts.begin(), pts.end());
    for (const FeasiblePoint& p : pts) {
      EnumRow r{s, p.x, p.objective, false};
      for (const FeasiblePoint& q : pts) {
        if (q.x == p.x) continue;
        bool ge = true;
        for (std::size_t i = 0; i < p.x.size() && ge; ++i) ge = q.x[i] >= p.x[i];
        if (ge) {
          r.dominated = true;
          break;
        }
      }
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

// ---- plan ----

struct LayerResult {
  LayerPathPlan plan;
  PlanReport report;
};

std::string layer_name(int layer, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "layer_%03d%s", layer, ext);
  return buf;
}

std::vector<LayerResult> plan_layers(const Project& p, const PatternHistory& h, const std::vector<int>& layers) {
  const auto junctions = parameterize_all(p.graph, p.plan);
  std::vector<LayerResult> results(layers.size());
  std::vector<std::exception_ptr> errors(layers.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < layers.size(); i = next++) {
      try {
        results[i].plan = assemble_layer(p.graph, h.layers[layers[i] - 1], p.plan, &junctions);
        results[i].report = check_plan(results[i].plan, p.plan);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::min<int>(thread_cap(), static_cast<int>(layers.size()));
  if (n <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  // Report the first failing layer, independent of scheduling.
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

PatternHistory history_for(const Project& p, const OptimizationParams& opt, const std::string& pattern_file,
                           int layers_needed) {
  if (!pattern_file.empty()) {
    std::ifstream in(pattern_file, std::ios::binary);
    if (!in) throw InputError("cannot read pattern report '" + pattern_file + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_pattern(p.graph, ss.str(), pattern_file);
  }
  OptimizationParams o = opt;
  o.n_layers = layers_needed;
  return solve_all_layers(p.graph, o);
}

struct Options {
  std::string project;
  std::string format = "table";
  std::string out_dir;
  std::string pattern;
  int layers = -1;
  double p = 0.0;
  bool p_set = false;
  bool require_edge_bows = false;
  int layer = 0;
  bool all = false;
  bool rims = false;
};

OptimizationParams effective_opt(const Project& proj, const Options& o) {
  OptimizationParams opt = proj.optimization;
  if (o.layers >= 0) opt.n_layers = o.layers;
  if (o.p_set) opt.p = o.p;
  if (o.require_edge_bows) opt.require_edge_bows = true;
  validate_params(proj.graph, opt);
  return opt;
}

int cmd_derive(const Options& o, std::ostream& out) {
  const Project proj = load_project(o.project);
  if (o.format == "records") {
    derive_records(out, proj.graph);
  } else {
    derive_table(out, proj.graph);
  }
  return 0;
}

int cmd_optimize(const Options& o, std::ostream& out) {
  const Project proj = load_project(o.project);
  const OptimizationParams opt = effective_opt(proj, o);
  const PatternHistory h = solve_all_layers(proj.graph, opt);
  const std::string records = serialize_pattern(proj.graph, opt, h);
  if (!o.out_dir.empty()) {
    std::filesystem::create_directories(o.out_dir);
    write_file_atomic((std::filesystem::path(o.out_dir) / "pattern.json").string(), records);
  }
  if (o.format == "records") {
    out << records;
  } else {
    optimize_table(out, proj.graph, h);
  }
  return 0;
}

int cmd_enumerate(const Options& o, std::ostream& out) {
  const Project proj = load_project(o.project);
  const OptimizationParams opt = effective_opt(proj, o);
  const int n = o.layer > 0 ? o.layer : 1;
  PatternHistory h = history_for(proj, opt, o.pattern, n - 1);
  if (static_cast<int>(h.layers.size()) < n - 1) {
    throw InputError("layer " + std::to_string(n) + " needs " + std::to_string(n - 1) +
                     " previous layers but the pattern report has " + std::to_string(h.layers.size()));
  }
  // Only the layers before n shape the residual.
  PatternHistory prefix = empty_history(proj.graph);
  for (int i = 0; i < n - 1; ++i) push_layer(proj.graph, prefix, h.layers[i]);
  const auto rows = enumerate_rows(proj.graph, opt, prefix, n);
  if (o.format == "records") {
    json doc = {{"schema", kPatternSchema}, {"kind", "enumerate"}, {"layer", n}};
    json rs = json::array();
    for (const EnumRow& r : rows) {
      rs.push_back({{"sheet", r.sheet}, {"x", r.x}, {"objective", r.objective}, {"dominated", r.dominated}});
    }
    doc["rows"] = rs;
    out << doc.dump(2) << "\n";
    return 0;
  }
  out << "layer " << n << "\n";
  out << "sheet  x           objective  note\n";
  for (const EnumRow& r : rows) {
    out << pad(std::to_string(r.sheet), 7) << pad(tuple(r.x), 12) << pad(num(r.objective), 11)
        << (r.dominated ? "dominated" : "") << "\n";
  }
  return 0;
}

int cmd_plan(const Options& o, std::ostream& out) {
  const Project proj = load_project(o.project);
  const OptimizationParams opt = effective_opt(proj, o);
  const PatternHistory h = history_for(proj, opt, o.pattern, opt.n_layers);
  const int total = static_cast<int>(h.layers.size());
  std::vector<int> layers;
  if (o.layer > 0) {
    if (o.layer > total) {
      throw InputError("layer " + std::to_string(o.layer) + " is out of range: the pattern has " +
                       std::to_string(total) + " layers");
    }
    layers.push_back(o.layer);
  } else {
    for (int n = 1; n <= total; ++n) layers.push_back(n);
  }
  const auto results = plan_layers(proj, h, layers);

  const std::string dir = o.out_dir.empty() ? "." : o.out_dir;
  std::filesystem::create_directories(dir);
  SvgOptions svg;
  svg.rim_points = o.rims;
  for (const LayerResult& r : results) {
    const std::filesystem::path base(dir);
    write_file_atomic((base / layer_name(r.plan.layer, ".svg")).string(),
                      render_svg(r.plan, proj.graph, proj.plan, svg));
    write_file_atomic((base / layer_name(r.plan.layer, ".paths")).string(), path_export(r.plan));
  }

  std::size_t curvature = 0, overlap = 0;
  for (const LayerResult& r : results) {
    curvature += r.report.curvature.size();
    overlap += r.report.overlap.size();
  }
  if (o.format == "records") {
    json doc = {{"schema", kPatternSchema}, {"kind", "plan_check"}};
    json ls = json::array();
    for (const LayerResult& r : results) {
      json cv = json::array(), ov = json::array();
      for (const auto& v : r.report.curvature) cv.push_back(v.message);
      for (const auto& v : r.report.overlap) ov.push_back(v.message);
      ls.push_back({{"layer", r.plan.layer},
                    {"sheet", r.plan.sheet},
                    {"paths", r.plan.paths.size()},
                    {"bows", r.plan.bows.size()},
                    {"connectors", r.plan.connectors.size()},
                    {"curvature", cv},
                    {"overlap", ov},
                    {"warnings", r.plan.warnings}});
    }
    doc["layers"] = ls;
    doc["clean"] = curvature == 0 && overlap == 0;
    out << doc.dump(2) << "\n";
    return 0;
  }
  out << "layer  sheet  paths  bows  connectors  curvature  overlap\n";
  for (const LayerResult& r : results) {
    out << pad(std::to_string(r.plan.layer), 7) << pad(std::to_string(r.plan.sheet), 7)
        << pad(std::to_string(r.plan.paths.size()), 7) << pad(std::to_string(r.plan.bows.size()), 6)
        << pad(std::to_string(r.plan.connectors.size()), 12) << pad(std::to_string(r.report.curvature.size()), 11)
        << r.report.overlap.size() << "\n";
    for (const auto& v : r.report.curvature) out << "  curvature: " << v.message << "\n";
    for (const auto& v : r.report.overlap) out << "  overlap: " << v.message << "\n";
    for (const auto& w : r.plan.warnings) out << "  warning: " << w << "\n";
  }
  if (curvature == 0 && overlap == 0) {
    out << "check: clean\n";
  } else {
    out << "check: " << curvature << " curvature and " << overlap << " overlap violations\n";
  }
  return 0;
}

}  // namespace

int thread_cap() {
  if (const char* env = std::getenv("FIBERLOOM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw InputError("FIBERLOOM_THREADS must be a positive integer");
    return static_cast<int>(std::min<long>(v, 1024));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous fiber path planning: loop patterns per layer and minimum-radius fiber paths."};
  app.name("fiberloom");
  app.require_subcommand(1);
  Options o;
  const std::vector<std::string> formats{"table", "records"};

  auto* derive = app.add_subcommand("derive", "Connections, loops and matrices of a project");
  auto* optimize = app.add_subcommand("optimize", "Loop counts for every layer");
  auto* plan = app.add_subcommand("plan", "Fiber paths, SVG and path exports per layer");
  auto* enumerate = app.add_subcommand("enumerate", "Every feasible loop vector of one layer");
  for (auto* sub : {derive, optimize, plan, enumerate}) {
    sub->add_option("project", o.project, "Project file (JSON)")->required();
    sub->add_option("--format", o.format, "table or records")->check(CLI::IsMember(formats));
  }
  for (auto* sub : {optimize, plan, enumerate}) {
    sub->add_option("--layers", o.layers, "Number of layers (default: project n_layers)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--p", o.p, "Residual exponent");
    sub->add_flag("--require-edge-bows", o.require_edge_bows, "Use every adjacent connection at least once");
  }
  optimize->add_option("--out", o.out_dir, "Also write DIR/pattern.json");
  for (auto* sub : {plan, enumerate}) {
    sub->add_option("--pattern", o.pattern, "Pattern report from 'optimize --out' (default: optimize now)");
  }
  auto* layer_opt = plan->add_option("--layer", o.layer, "Plan one layer (1-based)")->check(CLI::PositiveNumber);
  plan->add_flag("--all", o.all, "Plan every layer (default)")->excludes(layer_opt);
  plan->add_option("--out", o.out_dir, "Output directory (default: current)");
  plan->add_flag("--rims", o.rims, "Mark rim points in the SVG");
  enumerate->add_option("--layer", o.layer, "Layer whose residual is used (default 1)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  o.p_set = optimize->count("--p") + plan->count("--p") + enumerate->count("--p") > 0;

  try {
    if (derive->parsed()) return cmd_derive(o, out);
    if (optimize->parsed()) return cmd_optimize(o, out);
    if (plan->parsed()) return cmd_plan(o, out);
    return cmd_enumerate(o, out);
  } catch (const Error& e) {
    err << "fiberloom: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    err << "fiberloom: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "fiberloom: internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fiberloom::cli
