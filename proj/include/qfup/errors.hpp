#pragma once

#include <stdexcept>
#include <string>

namespace qfup {

// Base for all library errors. Messages name the violated precondition or
// the input that failed; callers catch this to map onto CLI exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Configuration-text errors carry a 1-based line and column.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line, int column)
      : Error(msg + " (line " + std::to_string(line) + ", column " +
              std::to_string(column) + ")"),
        line(line),
        column(column) {}
  int line;
  int column;
};

// Raised when an iterative scheme fails its tolerance; carries the last
// two successive values so callers can report how far off it ended.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, double previous, double last)
      : Error(msg + " (last refinement " + std::to_string(previous) + " -> " +
              std::to_string(last) + ")"),
        previous(previous),
        last(last) {}
  double previous;
  double last;
};

}  // namespace qfup
