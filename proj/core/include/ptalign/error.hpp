#pragma once

#include <stdexcept>
#include <string>

namespace ptalign {

/// Raised for malformed inputs and violated preconditions. The CLI maps
/// it to exit status 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ptalign
