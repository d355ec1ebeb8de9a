#pragma once

#include <stdexcept>
#include <string>

namespace fiberloom {

/// Base of all domain errors. `exit_code` is the CLI status the error maps to.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, int exit_code) : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

/// Malformed project input or a graph/loop that fails validation.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(what, 2) {}
};

/// No sheet admits a feasible loop vector for some layer.
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what) : Error(what, 3) {}
};

/// Path construction failed (junction too tight, offset self-intersection, layout conflict).
class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& what) : Error(what, 4) {}
};

/// Exhaustive enumeration refused because the search space is too large.
class IntractableError : public Error {
 public:
  explicit IntractableError(const std::string& what) : Error(what, 5) {}
};

}  // namespace fiberloom
