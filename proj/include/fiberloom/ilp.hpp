#pragma once

#include <string>
#include <vector>

namespace fiberloom {

/// a . x <= b (or >= b in IntegerProgram::geq).
struct LinearRow {
  std::vector<double> a;
  double b = 0.0;
  std::string label;  ///< used in infeasibility diagnostics
};

/// maximize c . x over integer x >= 0 subject to the rows and x <= upper bounds.
struct IntegerProgram {
  std::vector<double> objective;
  std::vector<LinearRow> leq;
  std::vector<LinearRow> geq;
  /// Optional explicit bounds. Bounds implied by all-non-negative leq rows are
  /// always applied; a variable with neither is rejected.
  std::vector<int> upper_bounds;

  int num_vars() const { return static_cast<int>(objective.size()); }
};

enum class IlpStatus { optimal, infeasible };

struct IlpSolution {
  IlpStatus status = IlpStatus::infeasible;
  std::vector<int> x;
  double objective_value = 0.0;
  std::vector<std::string> diagnostics;  ///< set when infeasible
};

struct FeasiblePoint {
  std::vector<int> x;
  double objective = 0.0;
};

inline constexpr long long kEnumerationLimit = 10'000'000;

/// Effective per-variable upper bounds: min over the explicit bound and
/// floor(b / a_i) of every leq row whose coefficients are all non-negative.
/// Throws InputError for malformed programs or unbounded variables.
std::vector<int> effective_upper_bounds(const IntegerProgram& p);

/// Global optimum by depth-first branch-and-bound. Values are tried from high
/// to low and an incumbent is only replaced by a strictly better point, so the
/// lexicographically greatest optimum wins ties.
IlpSolution solve(const IntegerProgram& p);

/// Every feasible point in lexicographic order. Throws IntractableError when the
/// box has more than `limit` points.
std::vector<FeasiblePoint> enumerate_feasible(const IntegerProgram& p, long long limit = kEnumerationLimit);

/// Size of the search box, saturating at limit + 1.
long long box_size(const std::vector<int>& upper_bounds, long long limit = kEnumerationLimit);

/// Comparison tolerance: 0 for all-integer data, otherwise 1e-9.
double program_tolerance(const IntegerProgram& p);

}  // namespace fiberloom
