#pragma once

#include <stdexcept>
#include <string>

namespace rctsyn {

inline constexpr const char *kVersion = "0.1.0";
inline constexpr const char *kMechanism = "perturbed-histogram-synthesis";

/// Raised for problems a user can fix: malformed schema or data files,
/// inconsistent configuration, unsupported option combinations.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for failures discovered while computing: rank-deficient design
/// matrices, non-finite intermediate values, overflow.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rctsyn
