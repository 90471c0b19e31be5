#pragma once

#include <stdexcept>
#include <string>

namespace lwrnet {

// Error taxonomy, mirrored 1:1 by the CLI exit codes:
//   ValidationError -> 2   malformed input, inconsistent config, bad preconditions
//   RegimeError     -> 3   data leave the regime the model supports
//                          (congested branch, infeasible junction demand, ...)
//   InternalError   -> 4   a solver invariant broke; always a bug, never user error

class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

class RegimeError : public std::runtime_error {
public:
  explicit RegimeError(const std::string& what) : std::runtime_error(what) {}
};

class InternalError : public std::logic_error {
public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace lwrnet
