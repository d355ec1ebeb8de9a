#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "fiberloom/errors.hpp"
#include "fiberloom/pattern.hpp"
#include "test_support.hpp"

using namespace fiberloom;
using fiberloom::testing::minimal_graph;
using fiberloom::testing::two_sheet_graph;

namespace {

using Vec = std::vector<double>;

OptimizationParams with_p(double p, int layers) {
  OptimizationParams o;
  o.p = p;
  o.n_layers = layers;
  return o;
}

PatternHistory history_of(const FiberGraph& g, const std::vector<std::vector<int>>& xs) {
  PatternHistory h = empty_history(g);
  int n = 1;
  for (const auto& x : xs) push_layer(g, h, LayerSolution{n++, 0, x, {}, 0.0});
  return h;
}

// Objective vector computed straight from the loop connection lists.
Vec oracle_objective(const FiberGraph& g, int sheet, int n, const std::vector<std::pair<int, std::vector<int>>>& hist,
                     double p) {
  Vec used(g.num_connections(), 0.0);
  for (const auto& [s, x] : hist) {
    for (std::size_t l = 0; l < x.size(); ++l) {
      for (int c : g.sheets()[s].loops[l].connections) used[c] += x[l];
    }
  }
  Vec out;
  for (const Loop& loop : g.sheets()[sheet].loops) {
    double v = 0;
    for (int c : loop.connections) v += std::pow(std::max(0.0, n * g.connections()[c].target - used[c]), p);
    out.push_back(v);
  }
  return out;
}

}  // namespace

TEST(Objective, FirstLayerWeights) {
  const FiberGraph g = minimal_graph();
  const PatternHistory h = empty_history(g);
  EXPECT_EQ(objective_vector(g, 0, 1, h, with_p(1, 1)), (Vec{10, 10, 12}));
  EXPECT_EQ(objective_vector(g, 0, 1, h, with_p(2, 1)), (Vec{26, 26, 24}));
}

TEST(Objective, ThirdLayer) {
  const FiberGraph g = minimal_graph();
  EXPECT_EQ(objective_vector(g, 0, 3, history_of(g, {{2, 1, 0}, {1, 2, 0}}), with_p(2, 3)), (Vec{90, 90, 108}));
}

TEST(Objective, SecondLayerFollowsFormula) {
  // The printed second-layer vector (40,48,58) is a typo: loop 1 collects
  // (6-1)^2 + (6-1)^2 from connections 4 and 6 plus 3 + 3 from 3 and 5, i.e. 68.
  // With 48 the optimum would be (1,1,1), contradicting the reported (1,2,0).
  const FiberGraph g = minimal_graph();
  const Vec c = objective_vector(g, 0, 2, history_of(g, {{2, 1, 0}}), with_p(2, 2));
  EXPECT_EQ(c, (Vec{40, 68, 58}));
  EXPECT_EQ(c, oracle_objective(g, 0, 2, {{0, {2, 1, 0}}}, 2));
}

TEST(Objective, NegativeResidualNeedsIntegerPowerUnclamped) {
  const FiberGraph g = minimal_graph();
  const PatternHistory h = history_of(g, {{2, 1, 0}, {2, 1, 0}, {2, 1, 0}});
  OptimizationParams o = with_p(1.5, 2);
  o.clamp_residuals = false;
  EXPECT_THROW(objective_vector(g, 0, 1, h, o), InputError);
  o.p = 2;
  EXPECT_NO_THROW(objective_vector(g, 0, 1, h, o));
  o.clamp_residuals = true;
  o.p = 1.5;
  EXPECT_NO_THROW(objective_vector(g, 0, 1, h, o));
}

TEST(Layers, SixLayerSequence) {
  const FiberGraph g = minimal_graph();
  const PatternHistory h = solve_all_layers(g, with_p(2, 6));
  const std::vector<std::vector<int>> xs{{2, 1, 0}, {1, 2, 0}, {1, 1, 1}, {2, 1, 0}, {1, 2, 0}, {1, 1, 1}};
  const std::vector<Vec> cs{{26, 26, 24}, {40, 68, 58}, {90, 90, 108}, {146, 146, 134}, {180, 232, 212}, {274, 274, 306}};
  ASSERT_EQ(h.layers.size(), 6u);
  for (int n = 0; n < 6; ++n) {
    EXPECT_EQ(h.layers[n].x, xs[n]) << n + 1;
    EXPECT_EQ(h.layers[n].c, cs[n]) << n + 1;
    EXPECT_EQ(h.layers[n].sheet, 0);
  }
}

TEST(Layers, SingleLoopFillsEdgeTarget) {
  std::vector<Vertex> v{{0, {0, 0}}, {1, {100, 0}}, {2, {100, 100}}};
  std::vector<Edge> e{{0, 0, 1, 4}, {1, 1, 2, 4}, {2, 2, 0, 4}};
  FiberGraph g(v, e);
  g.add_sheet({{true, {0, 1, 2, 0}}});
  for (double p : {0.5, 1.0, 2.0, 3.0}) {
    const PatternHistory h = solve_all_layers(g, with_p(p, 3));
    for (const auto& l : h.layers) EXPECT_EQ(l.x, (std::vector<int>{4}));
  }
}

TEST(Layers, ZeroLayers) {
  const FiberGraph g = minimal_graph();
  const PatternHistory h = solve_all_layers(g, with_p(2, 0));
  EXPECT_TRUE(h.layers.empty());
  for (const auto& row : connection_report(h, g)) EXPECT_EQ(row.sum, 0.0);
}

TEST(Layers, LinearCaseIsPermutationOfThreeConfigurations) {
  const FiberGraph g = minimal_graph();
  const PatternHistory h = solve_all_layers(g, with_p(1, 6));
  std::map<std::vector<int>, int> counts;
  for (const auto& l : h.layers) ++counts[l.x];
  // Only the three configurations occur, in a different order than for p = 2:
  // (1,1,1) first, then (2,1,0), (1,2,0) and (1,1,1) twice.
  EXPECT_EQ(counts.size(), 3u);
  EXPECT_GE(counts[(std::vector<int>{2, 1, 0})], 1);
  EXPECT_GE(counts[(std::vector<int>{1, 2, 0})], 1);
  EXPECT_GE(counts[(std::vector<int>{1, 1, 1})], 1);
  EXPECT_EQ(h.layers[0].x, (std::vector<int>{1, 1, 1}));
  // Exact order: at each layer the chosen x maximizes the recomputed objective,
  // with the lexicographically greatest point among ties.
  std::vector<std::pair<int, std::vector<int>>> hist;
  for (int n = 1; n <= 6; ++n) {
    const Vec c = oracle_objective(g, 0, n, hist, 1);
    const IntegerProgram prog = build_program(g, 0, c, with_p(1, 6));
    std::vector<int> arg;
    double best = -1;
    for (const auto& pt : enumerate_feasible(prog)) {
      if (pt.objective >= best) {
        best = pt.objective;
        arg = pt.x;
      }
    }
    EXPECT_EQ(h.layers[n - 1].x, arg) << n;
    hist.push_back({0, arg});
  }
}

TEST(Layers, TwoSheetsMatchPerSheetEnumeration) {
  const FiberGraph g = two_sheet_graph();
  const OptimizationParams params = with_p(2, 8);
  const PatternHistory h = solve_all_layers(g, params);
  std::vector<std::pair<int, std::vector<int>>> hist;
  std::set<int> sheets_used;
  for (int n = 1; n <= 8; ++n) {
    double best = -1;
    int best_sheet = -1;
    std::vector<int> arg;
    for (int s = 0; s < 2; ++s) {
      const Vec c = oracle_objective(g, s, n, hist, 2);
      for (const auto& pt : enumerate_feasible(build_program(g, s, c, params))) {
        // Strictly better across sheets, lexicographically greatest within one.
        if (pt.objective > best || (s == best_sheet && pt.objective == best)) {
          best = pt.objective;
          best_sheet = s;
          arg = pt.x;
        }
      }
    }
    EXPECT_EQ(h.layers[n - 1].sheet, best_sheet) << n;
    EXPECT_EQ(h.layers[n - 1].x, arg) << n;
    EXPECT_EQ(h.layers[n - 1].objective, best) << n;
    sheets_used.insert(best_sheet);
    hist.push_back({best_sheet, arg});
  }
  EXPECT_EQ(sheets_used.size(), 2u);
}

TEST(Layers, EveryFeasiblePointIsNoBetter) {
  const FiberGraph g = two_sheet_graph();
  const OptimizationParams params = with_p(2, 5);
  const PatternHistory h = solve_all_layers(g, params);
  PatternHistory partial = empty_history(g);
  for (const auto& layer : h.layers) {
    for (int s = 0; s < 2; ++s) {
      const Vec c = objective_vector(g, s, layer.layer, partial, params);
      for (const auto& pt : enumerate_feasible(build_program(g, s, c, params))) EXPECT_LE(pt.objective, layer.objective);
    }
    push_layer(g, partial, layer);
  }
}

TEST(Layers, MinimumConnectionsAndVertexLimits) {
  const FiberGraph g = minimal_graph();
  OptimizationParams o = with_p(2, 1);
  o.min_connections = Vec(10, 0.0);
  (*o.min_connections)[0] = 1;  // only the outer loop uses connection 0
  const PatternHistory h = solve_all_layers(g, o);
  EXPECT_GE(h.layers[0].x[2], 1);

  OptimizationParams too_much = with_p(2, 1);
  too_much.min_connections = Vec(10, 0.0);
  (*too_much.min_connections)[0] = 3;  // edge 0 carries only 2 bundles
  try {
    solve_all_layers(g, too_much);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("connection 0 minimum"), std::string::npos);
  }

  OptimizationParams vlim = with_p(2, 1);
  vlim.vertex_upper = Vec(6, 1.0);
  const PatternHistory hv = solve_all_layers(g, vlim);
  const Vec used = g.sheets()[0].V.multiply({Vec(hv.layers[0].x.begin(), hv.layers[0].x.end())});
  for (double u : used) EXPECT_LE(u, 1.0);

  OptimizationParams bad = with_p(2, 1);
  bad.vertex_lower = Vec(3, 0.0);
  EXPECT_THROW(solve_all_layers(g, bad), InputError);
}

TEST(Layers, RequireEdgeBowsSkipsCrossings) {
  const FiberGraph g = two_sheet_graph();
  OptimizationParams o = with_p(2, 1);
  o.require_edge_bows = true;
  const auto lo = effective_min_connections(g, o);
  ASSERT_TRUE(lo.has_value());
  for (const Connection& c : g.connections()) EXPECT_EQ((*lo)[c.id], g.is_adjacent(c.id) ? 1.0 : 0.0) << c.id;
  // Stub-to-vertical bows are never used by any loop, so the requirement is infeasible here.
  EXPECT_THROW(solve_all_layers(g, o), InfeasibleError);
}

TEST(Report, SixLayerSums) {
  const FiberGraph g = minimal_graph();
  const auto rows = connection_report(solve_all_layers(g, with_p(2, 6)), g);
  ASSERT_EQ(rows.size(), 10u);
  const Vec sums{2, 8, 10, 10, 8, 10, 8, 2, 8, 10};
  const Vec totals{12, 18, 12, 12, 18, 12, 18, 12, 18, 12};
  const std::vector<Vec> usage{{0, 0, 1, 0, 0, 1}, {2, 1, 1, 2, 1, 1}, {2, 1, 2, 2, 1, 2}, {1, 2, 2, 1, 2, 2},
                               {1, 2, 1, 1, 2, 1}, {1, 2, 2, 1, 2, 2}, {1, 2, 1, 1, 2, 1}, {0, 0, 1, 0, 0, 1},
                               {2, 1, 1, 2, 1, 1}, {2, 1, 2, 2, 1, 2}};
  const std::vector<std::vector<std::string>> loops{{"2"}, {"0"}, {"0", "2"}, {"1", "2"}, {"1"},
                                                    {"1", "2"}, {"1"}, {"2"}, {"0"}, {"0", "2"}};
  for (int c = 0; c < 10; ++c) {
    EXPECT_EQ(rows[c].sum, sums[c]) << c;
    EXPECT_EQ(rows[c].target_total, totals[c]) << c;
    EXPECT_EQ(rows[c].usage, usage[c]) << c;
    EXPECT_EQ(rows[c].loop_labels, loops[c]) << c;
  }
}

TEST(Report, SumsMatchRecomputation) {
  const FiberGraph g = two_sheet_graph();
  const PatternHistory h = solve_all_layers(g, with_p(2, 10));
  for (const auto& row : connection_report(h, g)) {
    double s = 0;
    for (double u : row.usage) s += u;
    EXPECT_EQ(s, row.sum);
  }
}
