#pragma once

#include <ostream>

namespace fiberloom::cli {

/// Exit statuses: 0 ok, 2 input, 3 infeasible, 4 geometry, 5 intractable.
/// Anything else unexpected maps to 1.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Worker count for per-layer planning: FIBERLOOM_THREADS if set, otherwise
/// the hardware concurrency, never less than 1.
int thread_cap();

}  // namespace fiberloom::cli
