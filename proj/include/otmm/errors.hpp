#pragma once

#include <stdexcept>
#include <string>

namespace otmm {

// Tensor/graph shape violations. The message names the offending node.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Bad user-supplied configuration (widths, tolerances, file contents).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or diverging iterations. `diagnostics` carries whatever
// state the thrower could recover (e.g. a serialized last-good checkpoint).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, std::string diagnostics = {})
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}

  const std::string& diagnostics() const { return diagnostics_; }

 private:
  std::string diagnostics_;
};

}  // namespace otmm
