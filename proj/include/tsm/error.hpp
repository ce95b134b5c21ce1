#pragma once

#include <stdexcept>
#include <string>

namespace tsm {

enum class ErrorKind {
  Argument,   // bad caller-supplied value
  Dimension,  // shape disagreement
  Format,     // malformed file payload
  Index,      // out-of-range index
  State,      // operation not valid in the current state
  Numeric,    // NaN/Inf or divergence
  Io,         // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace tsm
