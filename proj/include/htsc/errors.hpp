#pragma once

#include <stdexcept>
#include <string>

namespace htsc {

/// Malformed input, schema violation, or broken data invariant.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative numerical routine failed to converge or hit a degenerate state.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}

  /// Last residual (e.g. marginal violation) observed before giving up.
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace htsc
