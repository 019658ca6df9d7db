#pragma once

#include <stdexcept>
#include <string>

namespace hrc {

/// Raised for every contract violation and estimation failure in the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hrc
