#ifndef HERD_ERRORS_HPP
#define HERD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace herd {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid model/scenario input (bad schema, violated invariant).
struct ConfigError : Error {
  using Error::Error;
};

// A numerical routine failed to converge or hit a degenerate case.
struct SolverError : Error {
  using Error::Error;
};

// Filesystem trouble while reading inputs or writing artifacts.
struct IoError : Error {
  using Error::Error;
};

}  // namespace herd

#endif
