#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fiberloom/cli.hpp"
#include "fiberloom/errors.hpp"
#include "fiberloom/export.hpp"
#include "fiberloom/ilp.hpp"
#include "fiberloom/project_io.hpp"

using namespace fiberloom;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = FIBERLOOM_FIXTURES;
const std::string kGolden = FIBERLOOM_GOLDEN;

struct CmdResult {
  int code = 0;
  std::string out;
  std::string err;
};

CmdResult fiberloom_cmd(std::vector<std::string> args) {
  args.insert(args.begin(), "fiberloom");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CmdResult r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fixture(const char* name) { return kFixtures + "/" + name; }

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("fiberloom_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string write_temp(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("fiberloom_test_" + name);
  std::ofstream(p, std::ios::binary) << text;
  return p.string();
}

std::string with_replaced(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  if (pos != std::string::npos) text.replace(pos, from.size(), to);
  return text;
}

int count_of(const std::string& hay, const std::string& needle) {
  int n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* v) { setenv("FIBERLOOM_THREADS", v, 1); }
  ~ThreadsEnv() { unsetenv("FIBERLOOM_THREADS"); }
};

}  // namespace

TEST(ProjectIo, RoundTripKeepsGraph) {
  for (const char* name : {"minimal.json", "two_sheets.json", "cantilever.json"}) {
    const Project a = load_project(fixture(name));
    const std::string text = serialize_project(a);
    const Project b = parse_project(text);
    ASSERT_EQ(a.graph.num_vertices(), b.graph.num_vertices());
    for (int v = 0; v < a.graph.num_vertices(); ++v) {
      EXPECT_EQ(a.graph.vertices()[v].pos, b.graph.vertices()[v].pos);
    }
    ASSERT_EQ(a.graph.num_edges(), b.graph.num_edges());
    for (int e = 0; e < a.graph.num_edges(); ++e) {
      const Edge &x = a.graph.edges()[e], &y = b.graph.edges()[e];
      EXPECT_EQ(std::tie(x.v1, x.v2, x.target, x.width), std::tie(y.v1, y.v2, y.target, y.width));
    }
    EXPECT_EQ(a.graph.connection_targets(), b.graph.connection_targets());
    ASSERT_EQ(a.graph.sheets().size(), b.graph.sheets().size());
    for (std::size_t s = 0; s < a.graph.sheets().size(); ++s) {
      EXPECT_EQ(a.graph.sheets()[s].C, b.graph.sheets()[s].C);
      EXPECT_EQ(a.graph.sheets()[s].E, b.graph.sheets()[s].E);
      for (std::size_t l = 0; l < a.graph.sheets()[s].loops.size(); ++l) {
        EXPECT_EQ(a.graph.sheets()[s].loops[l].spec, b.graph.sheets()[s].loops[l].spec);
      }
    }
    EXPECT_EQ(a.optimization.n_layers, b.optimization.n_layers);
    EXPECT_EQ(a.plan.fiber_width, b.plan.fiber_width);
    EXPECT_EQ(serialize_project(b), text);
  }
}

TEST(ProjectIo, ConnectionFormLoopsAndOverrides) {
  std::string text = slurp(fixture("minimal.json"));
  text = with_replaced(text, R"({"edges": [0, 4, 5, 6, 0]})", R"({"connections": [1, 8, 9, 2], "closed": true})");
  text = with_replaced(text, R"("sheets")", R"("connection_targets": [{"edges": [1, 0], "target": 5}],
  "sheets")");
  const Project p = parse_project(text);
  EXPECT_EQ(p.graph.sheets()[0].loops[0].connections, (std::vector<int>{1, 8, 9, 2}));
  EXPECT_EQ(p.graph.connections()[0].target, 5.0);
  const Project q = parse_project(serialize_project(p));
  EXPECT_EQ(q.graph.sheets()[0].loops[0].spec, p.graph.sheets()[0].loops[0].spec);
  EXPECT_EQ(q.graph.connections()[0].target, 5.0);
}

TEST(ProjectIo, UnknownFieldIsNamed) {
  const std::string text =
      with_replaced(slurp(fixture("minimal.json")), R"({"id": 2, "v1": 2)", R"({"id": 2, "colour": 1, "v1": 2)");
  try {
    parse_project(text, "m.json");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown field 'edges[2].colour'"), std::string::npos) << e.what();
  }
  const CmdResult r = fiberloom_cmd({"derive", write_temp("unknown.json", text)});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("edges[2].colour"), std::string::npos);
}

TEST(ProjectIo, DiagnosticsAddressFieldOrLine) {
  const std::string base = slurp(fixture("minimal.json"));
  auto message = [](const std::string& text) {
    try {
      parse_project(text, "m.json");
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(with_replaced(base, R"("target": 3)", R"("target": "three")")).find("edges[4].target"),
            std::string::npos);
  EXPECT_NE(message(with_replaced(base, R"({"id": 5, "x": 100, "y": 0})", R"({"id": 5, "x": 100})"))
                .find("missing field 'vertices[5].y'"),
            std::string::npos);
  // Syntax errors report line and column.
  EXPECT_NE(message(with_replaced(base, R"("schema": 1,)", R"("schema": 1,,)")).find("m.json:2:"), std::string::npos);
  // Graph validation names the list it came from.
  const std::string bad_loop = message(with_replaced(base, "[0, 4, 5, 6, 0]", "[0, 2, 0]"));
  EXPECT_NE(bad_loop.find("sheets[0].loops[0]"), std::string::npos) << bad_loop;
  EXPECT_NE(message(with_replaced(base, R"("schema": 1)", R"("schema": 7)")).find("schema"), std::string::npos);
  EXPECT_NE(message(with_replaced(base, R"("p": 2)", R"("p": -1)")).find("p must be positive"), std::string::npos);
}

TEST(Derive, MatchesGoldenReport) {
  const CmdResult r = fiberloom_cmd({"derive", fixture("minimal.json")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, slurp(kGolden + "/minimal_derive.txt"));
  EXPECT_NE(r.out.find("0   0   1   2       0, 1, 2              0, 2"), std::string::npos);
}

TEST(Derive, RecordsMatrixEqualsSheetMatrix) {
  const CmdResult r = fiberloom_cmd({"derive", fixture("two_sheets.json"), "--format", "records"});
  ASSERT_EQ(r.code, 0);
  const auto doc = nlohmann::json::parse(r.out);
  const Project p = load_project(fixture("two_sheets.json"));
  for (std::size_t s = 0; s < p.graph.sheets().size(); ++s) {
    const Matrix& C = p.graph.sheets()[s].C;
    const auto& rows = doc["sheets"][s]["C"];
    ASSERT_EQ(static_cast<int>(rows.size()), C.rows);
    for (int i = 0; i < C.rows; ++i) {
      for (int j = 0; j < C.cols; ++j) EXPECT_EQ(rows[i][j].get<double>(), C(i, j));
    }
  }
  EXPECT_EQ(doc["connections"].size(), p.graph.connections().size());
}

TEST(Optimize, SixLayerTable) {
  const CmdResult r = fiberloom_cmd({"optimize", fixture("minimal.json"), "--layers", "6", "--p", "2"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, slurp(kGolden + "/minimal_optimize.txt"));
  for (const char* row : {"1   0      (2,1,0)", "2   0      (1,2,0)", "3   0      (1,1,1)", "4   0      (2,1,0)",
                          "5   0      (1,2,0)", "6   0      (1,1,1)"}) {
    EXPECT_NE(r.out.find(row), std::string::npos) << row;
  }
  EXPECT_NE(r.out.find("2 vs.   12      0 0 1 0 0 1"), std::string::npos);
}

TEST(Optimize, RecordsRoundTripThroughPatternFile) {
  const fs::path dir = scratch_dir("optimize");
  const CmdResult r = fiberloom_cmd({"optimize", fixture("minimal.json"), "--format", "records", "--out", dir.string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, slurp(dir / "pattern.json"));
  const Project p = load_project(fixture("minimal.json"));
  const PatternHistory h = parse_pattern(p.graph, r.out);
  const PatternHistory direct = solve_all_layers(p.graph, p.optimization);
  ASSERT_EQ(h.layers.size(), direct.layers.size());
  for (std::size_t i = 0; i < h.layers.size(); ++i) EXPECT_EQ(h.layers[i].x, direct.layers[i].x);
  EXPECT_EQ(h.cumulative, direct.cumulative);
}

TEST(Optimize, ZeroLayersIsEmpty) {
  const CmdResult r = fiberloom_cmd({"optimize", fixture("minimal.json"), "--layers", "0", "--format", "records"});
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(nlohmann::json::parse(r.out)["layers"].empty());
}

TEST(Optimize, InfeasibleExitsThree) {
  const std::string text = with_replaced(slurp(fixture("minimal.json")), R"("p": 2})",
                                         R"("p": 2, "min_connections": [9, 9, 9, 9, 9, 9, 9, 9, 9, 9]})");
  const CmdResult r = fiberloom_cmd({"optimize", write_temp("infeasible.json", text)});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("infeasible"), std::string::npos);
}

TEST(Enumerate, FirstLayerRowsForBothPowers) {
  const CmdResult p1 = fiberloom_cmd({"enumerate", fixture("minimal.json"), "--p", "1", "--format", "records"});
  const CmdResult p2 = fiberloom_cmd({"enumerate", fixture("minimal.json"), "--format", "records"});
  ASSERT_EQ(p1.code, 0);
  ASSERT_EQ(p2.code, 0);
  auto meaningful = [](const std::string& out) {
    std::vector<std::pair<std::vector<int>, double>> rows;
    const auto doc = nlohmann::json::parse(out);
    for (const auto& r : doc["rows"]) {
      if (!r["dominated"].get<bool>()) rows.emplace_back(r["x"].get<std::vector<int>>(), r["objective"].get<double>());
    }
    return rows;
  };
  using Rows = std::vector<std::pair<std::vector<int>, double>>;
  EXPECT_EQ(meaningful(p1.out), (Rows{{{2, 1, 0}, 30}, {{1, 2, 0}, 30}, {{1, 1, 1}, 32}, {{0, 0, 2}, 24}}));
  EXPECT_EQ(meaningful(p2.out), (Rows{{{2, 1, 0}, 78}, {{1, 2, 0}, 78}, {{1, 1, 1}, 76}, {{0, 0, 2}, 48}}));

  // Row count against the solver library's enumeration.
  const Project proj = load_project(fixture("minimal.json"));
  const auto c = objective_vector(proj.graph, 0, 1, empty_history(proj.graph), proj.optimization);
  const auto pts = enumerate_feasible(build_program(proj.graph, 0, c, proj.optimization));
  EXPECT_EQ(nlohmann::json::parse(p2.out)["rows"].size(), pts.size());
  EXPECT_EQ(fiberloom_cmd({"enumerate", fixture("minimal.json")}).out, slurp(kGolden + "/minimal_enumerate.txt"));
}

TEST(Enumerate, LaterLayerUsesHistory) {
  const CmdResult r = fiberloom_cmd({"enumerate", fixture("minimal.json"), "--layer", "2", "--format", "records"});
  ASSERT_EQ(r.code, 0);
  const auto doc = nlohmann::json::parse(r.out);
  int seen = 0;
  for (const auto& row : doc["rows"]) {
    if (row["x"].get<std::vector<int>>() != std::vector<int>{1, 2, 0}) continue;
    EXPECT_EQ(row["objective"].get<double>(), 176);
    ++seen;
  }
  EXPECT_EQ(seen, 1);
}

TEST(Enumerate, IntractableExitsFive) {
  // Ten independent V-shaped loops with nine bundles each: 10^10 points.
  std::string v, e, loops;
  for (int i = 0; i < 10; ++i) {
    const int b = 3 * i;
    for (int k = 0; k < 3; ++k) {
      v += (v.empty() ? "" : ", ") + std::string("{\"id\": ") + std::to_string(b + k) + ", \"x\": " +
           std::to_string(100 * i + 50 * k) + ", \"y\": " + std::to_string(k == 1 ? 50 : 0) + "}";
    }
    for (int k = 0; k < 2; ++k) {
      e += (e.empty() ? "" : ", ") + std::string("{\"id\": ") + std::to_string(2 * i + k) + ", \"v1\": " +
           std::to_string(b + k) + ", \"v2\": " + std::to_string(b + k + 1) + ", \"target\": 9}";
    }
    loops += (loops.empty() ? "" : ", ") + std::string("{\"edges\": [") + std::to_string(2 * i) + ", " +
             std::to_string(2 * i + 1) + "]}";
  }
  const std::string text = "{\"schema\": 1, \"vertices\": [" + v + "], \"edges\": [" + e +
                           "], \"sheets\": [{\"loops\": [" + loops + "]}]}";
  const CmdResult r = fiberloom_cmd({"enumerate", write_temp("huge.json", text)});
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.err.find("optimize"), std::string::npos);
}

TEST(Enumerate, EmptySheetGivesEmptyTable) {
  const std::string text =
      R"({"schema": 1, "vertices": [{"id": 0, "x": 0, "y": 0}, {"id": 1, "x": 10, "y": 0}],
          "edges": [{"id": 0, "v1": 0, "v2": 1, "target": 1}], "sheets": [{"loops": []}]})";
  const CmdResult r = fiberloom_cmd({"enumerate", write_temp("empty.json", text), "--format", "records"});
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(nlohmann::json::parse(r.out)["rows"].empty());
}

TEST(Plan, SingleLayerFiles) {
  const fs::path dir = scratch_dir("plan_one");
  const CmdResult r = fiberloom_cmd({"plan", fixture("minimal.json"), "--layer", "3", "--out", dir.string(), "--rims"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("check: clean"), std::string::npos);
  const std::string svg = slurp(dir / "layer_003.svg");
  const std::string paths = slurp(dir / "layer_003.paths");
  EXPECT_EQ(count_of(svg, "class=\"fiber\""), 3);
  EXPECT_EQ(count_of(paths, "\n") - 1, 3);
  EXPECT_NE(svg.find("matrix(1 0 0 -1"), std::string::npos);
  EXPECT_NE(svg.find("id=\"rims\""), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "layer_001.svg"));
  for (const auto& f : fs::directory_iterator(dir)) EXPECT_NE(f.path().extension(), ".tmp");
}

TEST(Plan, ExportMatchesPlanGeometry) {
  const Project p = load_project(fixture("minimal.json"));
  const PatternHistory h = solve_all_layers(p.graph, p.optimization);
  const LayerPathPlan plan = assemble_layer(p.graph, h.layers[0], p.plan);
  std::istringstream in(path_export(plan));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line[0], '#');
  for (const FiberPath& fp : plan.paths) {
    ASSERT_TRUE(std::getline(in, line));
    std::istringstream rec(line);
    int layer = 0, inst = 0, closed = 0;
    rec >> layer >> inst >> closed;
    EXPECT_EQ(layer, 1);
    EXPECT_EQ(inst, fp.instance);
    EXPECT_EQ(closed, fp.closed ? 1 : 0);
    for (const Point2& q : fp.points) {
      double x = 0, y = 0;
      rec >> x >> y;
      EXPECT_NEAR(x, q.x, 5e-7);
      EXPECT_NEAR(y, q.y, 5e-7);
    }
    double extra = 0;
    EXPECT_FALSE(rec >> extra);
  }
  EXPECT_FALSE(std::getline(in, line));
}

TEST(Plan, LayerOutOfRange) {
  const fs::path dir = scratch_dir("plan_range");
  const CmdResult r = fiberloom_cmd({"plan", fixture("minimal.json"), "--layer", "7", "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("out of range"), std::string::npos);
}

TEST(Plan, TightJunctionExitsFour) {
  std::string text = slurp(fixture("minimal.json"));
  for (const char* from : {R"("y": 100})", R"("y": 100})", R"("y": 200})", R"("y": 200})"}) {
    text = with_replaced(text, from, std::string(from) == R"("y": 100})" ? R"("y": 20})" : R"("y": 40})");
  }
  for (int i = 0; i < 3; ++i) text = with_replaced(text, R"("x": 100)", R"("x": 20)");
  const fs::path dir = scratch_dir("plan_tight");
  const CmdResult r = fiberloom_cmd({"plan", write_temp("tight.json", text), "--out", dir.string()});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("too short"), std::string::npos) << r.err;
}

TEST(Plan, PatternFileGivesSameOutput) {
  const fs::path a = scratch_dir("plan_a"), b = scratch_dir("plan_b"), pat = scratch_dir("plan_pat");
  ASSERT_EQ(fiberloom_cmd({"optimize", fixture("two_sheets.json"), "--out", pat.string()}).code, 0);
  const CmdResult ra = fiberloom_cmd({"plan", fixture("two_sheets.json"), "--all", "--out", a.string()});
  const CmdResult rb = fiberloom_cmd(
      {"plan", fixture("two_sheets.json"), "--pattern", (pat / "pattern.json").string(), "--out", b.string()});
  ASSERT_EQ(ra.code, 0);
  ASSERT_EQ(rb.code, 0);
  EXPECT_EQ(ra.out, rb.out);
  for (int n = 1; n <= 6; ++n) {
    char name[32];
    std::snprintf(name, sizeof name, "layer_%03d.paths", n);
    EXPECT_EQ(slurp(a / name), slurp(b / name));
  }
}

TEST(Plan, ThreadCountDoesNotChangeOutput) {
  const fs::path one = scratch_dir("threads_1"), four = scratch_dir("threads_4");
  CmdResult r1, r4;
  {
    ThreadsEnv env("1");
    EXPECT_EQ(cli::thread_cap(), 1);
    r1 = fiberloom_cmd({"plan", fixture("minimal.json"), "--out", one.string()});
  }
  {
    ThreadsEnv env("4");
    r4 = fiberloom_cmd({"plan", fixture("minimal.json"), "--out", four.string()});
  }
  ASSERT_EQ(r1.code, 0);
  EXPECT_EQ(r1.out, r4.out);
  int files = 0;
  for (const auto& f : fs::directory_iterator(one)) {
    EXPECT_EQ(slurp(f.path()), slurp(four / f.path().filename()));
    ++files;
  }
  EXPECT_EQ(files, 12);
  {
    ThreadsEnv env("zero");
    EXPECT_EQ(fiberloom_cmd({"plan", fixture("minimal.json"), "--out", one.string()}).code, 2);
  }
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(fiberloom_cmd({}).code, 2);
  EXPECT_EQ(fiberloom_cmd({"derive"}).code, 2);
  EXPECT_EQ(fiberloom_cmd({"derive", fixture("minimal.json"), "--format", "xml"}).code, 2);
  EXPECT_EQ(fiberloom_cmd({"plan", fixture("minimal.json"), "--layer", "1", "--all"}).code, 2);
  EXPECT_EQ(fiberloom_cmd({"derive", "/nonexistent/project.json"}).code, 2);
  EXPECT_EQ(fiberloom_cmd({"--help"}).code, 0);
}

TEST(Export, NumberFormat) {
  EXPECT_EQ(format_mm(-1e-9), "0.000000");
  EXPECT_EQ(format_mm(1.2345675), "1.234568");
  EXPECT_EQ(format_mm(-3.5), "-3.500000");
}
