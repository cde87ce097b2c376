#pragma once

#include <string>
#include <vector>

namespace htsc {

/// A univariate series on integer time steps. Values must be finite and the
/// series non-empty; validate_series reports the first violation.
struct TimeSeries {
  std::string id;
  std::vector<double> values;

  std::size_t length() const { return values.size(); }
};

struct ValidationReport {
  bool ok = true;
  std::string violation;

  explicit operator bool() const { return ok; }

  static ValidationReport good() { return {}; }
  static ValidationReport bad(std::string what) { return {false, std::move(what)}; }
};

ValidationReport validate_series(const TimeSeries& ts);

}  // namespace htsc
