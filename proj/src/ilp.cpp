#include "fiberloom/ilp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fiberloom/errors.hpp"

namespace fiberloom {

namespace {

bool integral(double v) { return std::isfinite(v) && v == std::floor(v); }

void check_shape(const IntegerProgram& p) {
  const std::size_t n = p.objective.size();
  for (double c : p.objective) {
    if (!std::isfinite(c)) throw InputError("objective coefficient is not finite");
  }
  auto check_rows = [&](const std::vector<LinearRow>& rows) {
    for (const LinearRow& r : rows) {
      if (r.a.size() != n) throw InputError("constraint row '" + r.label + "' has the wrong length");
      if (!std::isfinite(r.b)) throw InputError("constraint row '" + r.label + "' has a non-finite bound");
      for (double v : r.a) {
        if (!std::isfinite(v)) throw InputError("constraint row '" + r.label + "' has a non-finite coefficient");
      }
    }
  };
  check_rows(p.leq);
  check_rows(p.geq);
  if (!p.upper_bounds.empty() && p.upper_bounds.size() != n) throw InputError("upper bound vector has the wrong length");
}

double dot(const std::vector<double>& a, const std::vector<int>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * x[i];
  return s;
}

bool feasible(const IntegerProgram& p, const std::vector<int>& x, double eps) {
  for (const LinearRow& r : p.leq) {
    if (dot(r.a, x) > r.b + eps) return false;
  }
  for (const LinearRow& r : p.geq) {
    if (dot(r.a, x) < r.b - eps) return false;
  }
  return true;
}

// Rows that fail even when every other variable takes its most helpful value.
std::vector<std::string> diagnose(const IntegerProgram& p, const std::vector<int>& ub, double eps) {
  std::vector<std::string> out;
  auto describe = [](const LinearRow& r, std::size_t idx, const char* kind) {
    std::ostringstream s;
    s << kind << " row " << idx;
    if (!r.label.empty()) s << " (" << r.label << ")";
    return s.str();
  };
  for (std::size_t k = 0; k < p.leq.size(); ++k) {
    double lo = 0.0;
    for (std::size_t i = 0; i < ub.size(); ++i) lo += std::min(0.0, p.leq[k].a[i] * ub[i]);
    if (lo > p.leq[k].b + eps) out.push_back(describe(p.leq[k], k, "upper-limit") + " cannot be met");
  }
  for (std::size_t k = 0; k < p.geq.size(); ++k) {
    double hi = 0.0;
    for (std::size_t i = 0; i < ub.size(); ++i) hi += std::max(0.0, p.geq[k].a[i] * ub[i]);
    if (hi < p.geq[k].b - eps) out.push_back(describe(p.geq[k], k, "lower-limit") + " cannot be met");
  }
  if (out.empty()) out.push_back("no single row is unsatisfiable; the rows conflict jointly");
  return out;
}

class BranchAndBound {
 public:
  BranchAndBound(const IntegerProgram& p, std::vector<int> ub, double eps)
      : p_(p), ub_(std::move(ub)), eps_(eps), n_(p.num_vars()) {
    // Suffix sums of the best/worst contribution of variables i..n-1.
    obj_suffix_.assign(n_ + 1, 0.0);
    for (int i = n_ - 1; i >= 0; --i) obj_suffix_[i] = obj_suffix_[i + 1] + std::max(0.0, p_.objective[i] * ub_[i]);
    auto suffixes = [&](const std::vector<LinearRow>& rows, bool minimum) {
      std::vector<std::vector<double>> s(rows.size(), std::vector<double>(n_ + 1, 0.0));
      for (std::size_t k = 0; k < rows.size(); ++k) {
        for (int i = n_ - 1; i >= 0; --i) {
          const double v = rows[k].a[i] * ub_[i];
          s[k][i] = s[k][i + 1] + (minimum ? std::min(0.0, v) : std::max(0.0, v));
        }
      }
      return s;
    };
    leq_min_ = suffixes(p_.leq, true);
    geq_max_ = suffixes(p_.geq, false);
    leq_act_.assign(p_.leq.size(), 0.0);
    geq_act_.assign(p_.geq.size(), 0.0);
    x_.assign(n_, 0);
  }

  bool run() {
    dfs(0, 0.0);
    return found_;
  }
  const std::vector<int>& best_x() const { return best_x_; }
  double best_value() const { return best_; }

 private:
  bool prune(int i, double value) const {
    if (found_ && value + obj_suffix_[i] <= best_ + eps_) return true;
    for (std::size_t k = 0; k < p_.leq.size(); ++k) {
      if (leq_act_[k] + leq_min_[k][i] > p_.leq[k].b + eps_) return true;
    }
    for (std::size_t k = 0; k < p_.geq.size(); ++k) {
      if (geq_act_[k] + geq_max_[k][i] < p_.geq[k].b - eps_) return true;
    }
    return false;
  }

  void dfs(int i, double value) {
    if (prune(i, value)) return;
    if (i == n_) {
      // Reaching here means every row holds and the value beats the incumbent.
      best_ = value;
      best_x_ = x_;
      found_ = true;
      return;
    }
    for (int v = ub_[i]; v >= 0; --v) {
      x_[i] = v;
      for (std::size_t k = 0; k < p_.leq.size(); ++k) leq_act_[k] += p_.leq[k].a[i] * v;
      for (std::size_t k = 0; k < p_.geq.size(); ++k) geq_act_[k] += p_.geq[k].a[i] * v;
      dfs(i + 1, value + p_.objective[i] * v);
      for (std::size_t k = 0; k < p_.leq.size(); ++k) leq_act_[k] -= p_.leq[k].a[i] * v;
      for (std::size_t k = 0; k < p_.geq.size(); ++k) geq_act_[k] -= p_.geq[k].a[i] * v;
    }
    x_[i] = 0;
  }

  const IntegerProgram& p_;
  std::vector<int> ub_;
  double eps_;
  int n_;
  std::vector<double> obj_suffix_;
  std::vector<std::vector<double>> leq_min_, geq_max_;
  std::vector<double> leq_act_, geq_act_;
  std::vector<int> x_;
  std::vector<int> best_x_;
  double best_ = -std::numeric_limits<double>::infinity();
  bool found_ = false;
};

}  // namespace

double program_tolerance(const IntegerProgram& p) {
  bool all_int = std::all_of(p.objective.begin(), p.objective.end(), integral);
  for (const auto* rows : {&p.leq, &p.geq}) {
    for (const LinearRow& r : *rows) {
      all_int = all_int && integral(r.b) && std::all_of(r.a.begin(), r.a.end(), integral);
    }
  }
  return all_int ? 0.0 : 1e-9;
}

std::vector<int> effective_upper_bounds(const IntegerProgram& p) {
  check_shape(p);
  const int n = p.num_vars();
  constexpr double kNone = std::numeric_limits<double>::infinity();
  std::vector<double> ub(n, kNone);
  for (int i = 0; i < n && !p.upper_bounds.empty(); ++i) {
    if (p.upper_bounds[i] < 0) throw InputError("negative upper bound for variable " + std::to_string(i));
    ub[i] = p.upper_bounds[i];
  }
  const double eps = program_tolerance(p);
  for (const LinearRow& r : p.leq) {
    if (std::any_of(r.a.begin(), r.a.end(), [](double v) { return v < 0.0; })) continue;
    for (int i = 0; i < n; ++i) {
      if (r.a[i] > 0.0) ub[i] = std::min(ub[i], std::floor((r.b + eps) / r.a[i]));
    }
  }
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) {
    if (ub[i] == kNone) throw InputError("variable " + std::to_string(i) + " has no upper bound");
    out[i] = ub[i] < 0.0 ? -1 : static_cast<int>(std::min(ub[i], 1e9));
  }
  return out;
}

long long box_size(const std::vector<int>& ub, long long limit) {
  long long total = 1;
  for (int u : ub) {
    if (u < 0) return 0;
    if (total > (limit + 1) / (u + 1LL)) return limit + 1;
    total *= u + 1LL;
  }
  return std::min(total, limit + 1);
}

IlpSolution solve(const IntegerProgram& p) {
  const std::vector<int> ub = effective_upper_bounds(p);
  const double eps = program_tolerance(p);
  IlpSolution sol;
  if (std::any_of(ub.begin(), ub.end(), [](int u) { return u < 0; })) {
    sol.diagnostics = {"a non-negative row bound is negative, so x >= 0 cannot hold"};
    return sol;
  }
  BranchAndBound bb(p, ub, eps);
  if (!bb.run()) {
    sol.diagnostics = diagnose(p, ub, eps);
    return sol;
  }
  sol.status = IlpStatus::optimal;
  sol.x = bb.best_x();
  sol.objective_value = bb.best_value();
  return sol;
}

std::vector<FeasiblePoint> enumerate_feasible(const IntegerProgram& p, long long limit) {
  const std::vector<int> ub = effective_upper_bounds(p);
  const long long size = box_size(ub, limit);
  if (size > limit) {
    throw IntractableError("enumeration box exceeds " + std::to_string(limit) + " points; use the solver instead");
  }
  std::vector<FeasiblePoint> out;
  if (size == 0) return out;
  const double eps = program_tolerance(p);
  const int n = p.num_vars();
  std::vector<int> x(n, 0);
  while (true) {
    if (feasible(p, x, eps)) out.push_back({x, dot(p.objective, x)});
    int i = n - 1;
    while (i >= 0 && x[i] == ub[i]) x[i--] = 0;
    if (i < 0) break;
    ++x[i];
  }
  return out;
}

}  // namespace fiberloom
