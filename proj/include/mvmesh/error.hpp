#pragma once

#include <stdexcept>
#include <string>

namespace mvmesh {

/// Bad user input: malformed files, invalid configuration, violated
/// preconditions on external data. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parse failure anchored at a file position.
class FormatError : public ValidationError {
 public:
  FormatError(const std::string& file, long line, const std::string& what)
      : ValidationError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace mvmesh
