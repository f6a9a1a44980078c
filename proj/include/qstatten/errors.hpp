#pragma once

#include <stdexcept>
#include <string>

namespace qstatten {

// Invalid arguments are reported as std::invalid_argument throughout; the
// types below cover the remaining failure kinds.

/// Matrix expected to be positive semidefinite has an eigenvalue below -1e-8.
class NotPsdError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Cholesky parameters whose T^dagger T has (numerically) zero trace.
class DegenerateParametersError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A metric evaluated outside its tolerance band.
class MetricRangeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or inconsistent scenario configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qstatten
