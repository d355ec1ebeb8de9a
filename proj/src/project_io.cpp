#include "fiberloom/project_io.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fiberloom/errors.hpp"

namespace fiberloom {

namespace {

using json = nlohmann::json;

// A JSON value plus its path, for diagnostics like "edges[2].target".
class Node {
 public:
  Node(const json& j, std::string path, const std::string& source) : j_(j), path_(std::move(path)), source_(source) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw InputError(source_ + ": field '" + path_ + "' " + what);
  }

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  void expect_object(std::initializer_list<const char*> allowed) const {
    if (!j_.is_object()) fail("must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!ok.count(it.key())) {
        throw InputError(source_ + ": unknown field '" + child_path(it.key()) + "'");
      }
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Node at(const char* key) const {
    if (!j_.contains(key)) throw InputError(source_ + ": missing field '" + child_path(key) + "'");
    return Node(j_.at(key), child_path(key), source_);
  }

  std::vector<Node> items() const {
    if (!j_.is_array()) fail("must be an array");
    std::vector<Node> out;
    for (std::size_t i = 0; i < j_.size(); ++i) out.emplace_back(j_[i], path_ + "[" + std::to_string(i) + "]", source_);
    return out;
  }

  double number() const {
    if (!j_.is_number()) fail("must be a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("must be finite");
    return v;
  }

  int integer() const {
    if (j_.is_number_integer()) return j_.get<int>();
    if (j_.is_number_float()) {
      const double v = j_.get<double>();
      if (v == std::floor(v) && std::abs(v) < 1e9) return static_cast<int>(v);
    }
    fail("must be an integer");
  }

  bool boolean() const {
    if (!j_.is_boolean()) fail("must be true or false");
    return j_.get<bool>();
  }

  std::vector<int> integers() const {
    std::vector<int> out;
    for (const Node& n : items()) out.push_back(n.integer());
    return out;
  }

  std::vector<double> numbers() const {
    std::vector<double> out;
    for (const Node& n : items()) out.push_back(n.number());
    return out;
  }

 private:
  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  const std::string& source_;
};

json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset to line and column.
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InputError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON");
  }
}

// Runs a graph-level validation and names the field it belongs to.
template <typename F>
auto within(const Node& n, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InputError& e) {
    n.fail(std::string("is invalid: ") + e.what());
  }
}

LoopSpec read_loop(const Node& n) {
  n.expect_object({"edges", "connections", "closed"});
  LoopSpec spec;
  if (n.has("edges") == n.has("connections")) n.fail("needs exactly one of 'edges' or 'connections'");
  if (n.has("edges")) {
    if (n.has("closed")) n.fail("takes 'closed' only with 'connections'; edge lists are closed by repeating the first edge");
    spec.by_edges = true;
    spec.items = n.at("edges").integers();
  } else {
    spec.by_edges = false;
    spec.items = n.at("connections").integers();
    spec.closed = n.has("closed") && n.at("closed").boolean();
  }
  return spec;
}

void read_params(const Node& n, OptimizationParams& opt, PlanParams& plan) {
  n.expect_object({"fiber_width", "min_radius", "n_layers", "p", "require_edge_bows", "clamp_residuals",
                   "interlooping", "min_connections", "vertex_upper", "vertex_lower"});
  if (n.has("fiber_width")) plan.fiber_width = n.at("fiber_width").number();
  if (n.has("min_radius")) plan.min_radius = n.at("min_radius").number();
  if (n.has("n_layers")) opt.n_layers = n.at("n_layers").integer();
  if (n.has("p")) opt.p = n.at("p").number();
  if (n.has("require_edge_bows")) opt.require_edge_bows = n.at("require_edge_bows").boolean();
  if (n.has("clamp_residuals")) opt.clamp_residuals = n.at("clamp_residuals").boolean();
  if (n.has("interlooping")) plan.interlooping = n.at("interlooping").boolean();
  if (n.has("min_connections")) opt.min_connections = n.at("min_connections").numbers();
  if (n.has("vertex_upper")) opt.vertex_upper = n.at("vertex_upper").numbers();
  if (n.has("vertex_lower")) opt.vertex_lower = n.at("vertex_lower").numbers();
  if (!(plan.fiber_width > 0.0)) n.at("fiber_width").fail("must be positive");
  if (!(plan.min_radius > 0.0)) n.at("min_radius").fail("must be positive");
}

json number_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) {
    if (x == std::floor(x) && std::abs(x) < 1e15) {
      a.push_back(static_cast<long long>(x));
    } else {
      a.push_back(x);
    }
  }
  return a;
}

json number(double x) {
  if (x == std::floor(x) && std::abs(x) < 1e15) return static_cast<long long>(x);
  return x;
}

}  // namespace

Project parse_project(const std::string& text, const std::string& source) {
  const json doc = parse_text(text, source);
  const Node root(doc, "", source);
  if (!doc.is_object()) throw InputError(source + ": top level must be an object");
  root.expect_object({"schema", "vertices", "edges", "sheets", "connection_targets", "params"});
  const int schema = root.at("schema").integer();
  if (schema != kProjectSchema) root.at("schema").fail("is " + std::to_string(schema) + ", expected " +
                                                       std::to_string(kProjectSchema));

  std::vector<Vertex> vertices;
  for (const Node& n : root.at("vertices").items()) {
    n.expect_object({"id", "x", "y"});
    vertices.push_back({n.at("id").integer(), {n.at("x").number(), n.at("y").number()}});
  }
  std::vector<Edge> edges;
  for (const Node& n : root.at("edges").items()) {
    n.expect_object({"id", "v1", "v2", "target", "width"});
    Edge e;
    e.id = n.at("id").integer();
    e.v1 = n.at("v1").integer();
    e.v2 = n.at("v2").integer();
    e.target = n.at("target").integer();
    if (n.has("width")) e.width = n.at("width").number();
    edges.push_back(e);
  }
  std::map<std::pair<int, int>, double> overrides;
  if (root.has("connection_targets")) {
    for (const Node& n : root.at("connection_targets").items()) {
      n.expect_object({"edges", "target"});
      const std::vector<int> pair = n.at("edges").integers();
      if (pair.size() != 2) n.at("edges").fail("must list exactly two edge ids");
      const auto key = std::minmax(pair[0], pair[1]);
      if (!overrides.emplace(key, n.at("target").number()).second) n.fail("repeats an edge pair");
    }
  }
  Project project{within(root, [&] { return FiberGraph(vertices, edges, overrides); }), {}, {}};

  for (const Node& s : root.at("sheets").items()) {
    s.expect_object({"loops"});
    std::vector<LoopSpec> loops;
    for (const Node& l : s.at("loops").items()) {
      LoopSpec spec = read_loop(l);
      within(l, [&] { return project.graph.loop_from_spec(spec); });
      loops.push_back(std::move(spec));
    }
    within(s, [&] { return project.graph.add_sheet(loops); });
  }
  if (root.has("params")) read_params(root.at("params"), project.optimization, project.plan);
  within(root, [&] {
    validate_params(project.graph, project.optimization);
    return 0;
  });
  return project;
}

Project load_project(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read project file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_project(ss.str(), path);
}

std::string serialize_project(const Project& project) {
  const FiberGraph& g = project.graph;
  json doc = json::object();
  doc["schema"] = kProjectSchema;
  json vs = json::array();
  for (const Vertex& v : g.vertices()) vs.push_back({{"id", v.id}, {"x", number(v.pos.x)}, {"y", number(v.pos.y)}});
  doc["vertices"] = vs;
  json es = json::array();
  for (const Edge& e : g.edges()) {
    json je = {{"id", e.id}, {"v1", e.v1}, {"v2", e.v2}, {"target", e.target}};
    if (e.width > 0.0) je["width"] = number(e.width);
    es.push_back(je);
  }
  doc["edges"] = es;
  if (!g.overrides().empty()) {
    json os = json::array();
    for (const auto& [pair, t] : g.overrides()) os.push_back({{"edges", {pair.first, pair.second}}, {"target", number(t)}});
    doc["connection_targets"] = os;
  }
  json ss = json::array();
  for (const Sheet& s : g.sheets()) {
    json ls = json::array();
    for (const Loop& l : s.loops) {
      if (l.spec.by_edges) {
        ls.push_back({{"edges", l.spec.items}});
      } else {
        ls.push_back({{"connections", l.spec.items}, {"closed", l.spec.closed}});
      }
    }
    ss.push_back({{"loops", ls}});
  }
  doc["sheets"] = ss;
  const OptimizationParams& o = project.optimization;
  json p = {{"fiber_width", number(project.plan.fiber_width)},
            {"min_radius", number(project.plan.min_radius)},
            {"n_layers", o.n_layers},
            {"p", number(o.p)},
            {"require_edge_bows", o.require_edge_bows},
            {"clamp_residuals", o.clamp_residuals},
            {"interlooping", project.plan.interlooping}};
  if (o.min_connections) p["min_connections"] = number_array(*o.min_connections);
  if (o.vertex_upper) p["vertex_upper"] = number_array(*o.vertex_upper);
  if (o.vertex_lower) p["vertex_lower"] = number_array(*o.vertex_lower);
  doc["params"] = p;
  return doc.dump(2) + "\n";
}

std::string serialize_pattern(const FiberGraph& g, const OptimizationParams& params, const PatternHistory& history) {
  json doc = json::object();
  doc["schema"] = kPatternSchema;
  doc["kind"] = "pattern";
  doc["p"] = number(params.p);
  doc["require_edge_bows"] = params.require_edge_bows;
  json layers = json::array();
  for (const LayerSolution& l : history.layers) {
    layers.push_back({{"layer", l.layer},
                      {"sheet", l.sheet},
                      {"x", l.x},
                      {"c", number_array(l.c)},
                      {"objective", number(l.objective)}});
  }
  doc["layers"] = layers;
  json rows = json::array();
  for (const ConnectionReportRow& r : connection_report(history, g)) {
    rows.push_back({{"connection", r.connection},
                    {"loops", r.loop_labels},
                    {"sum", number(r.sum)},
                    {"target_total", number(r.target_total)},
                    {"usage", number_array(r.usage)}});
  }
  doc["connections"] = rows;
  return doc.dump(2) + "\n";
}

PatternHistory parse_pattern(const FiberGraph& g, const std::string& text, const std::string& source) {
  const json doc = parse_text(text, source);
  const Node root(doc, "", source);
  root.expect_object({"schema", "kind", "p", "require_edge_bows", "layers", "connections"});
  if (root.at("schema").integer() != kPatternSchema) root.at("schema").fail("is not a supported version");
  if (!root.at("kind").raw().is_string() || root.at("kind").raw().get<std::string>() != "pattern") {
    root.at("kind").fail("must be \"pattern\"");
  }
  PatternHistory h = empty_history(g);
  for (const Node& n : root.at("layers").items()) {
    n.expect_object({"layer", "sheet", "x", "c", "objective"});
    LayerSolution l;
    l.layer = n.at("layer").integer();
    l.sheet = n.at("sheet").integer();
    l.x = n.at("x").integers();
    l.c = n.at("c").numbers();
    l.objective = n.at("objective").number();
    if (l.layer != static_cast<int>(h.layers.size()) + 1) n.at("layer").fail("is out of sequence");
    if (l.sheet < 0 || l.sheet >= static_cast<int>(g.sheets().size())) n.at("sheet").fail("is not a sheet of the project");
    const int nl = static_cast<int>(g.sheets()[l.sheet].loops.size());
    if (static_cast<int>(l.x.size()) != nl) n.at("x").fail("needs " + std::to_string(nl) + " entries");
    for (int v : l.x) {
      if (v < 0) n.at("x").fail("must be non-negative");
    }
    push_layer(g, h, std::move(l));
  }
  return h;
}

}  // namespace fiberloom
