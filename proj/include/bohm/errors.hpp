#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bohm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (bad shape, bad parameter).
struct PreconditionError : Error {
  using Error::Error;
};

struct OutOfBounds : Error {
  using Error::Error;
};

// Guidance evaluated where |psi|^2 is below the node threshold under NodePolicy::Halt.
struct HitNode : Error {
  using Error::Error;
};

struct ZeroSlice : Error {
  using Error::Error;
};

struct IncompatibleMethod : Error {
  using Error::Error;
};

struct SolveToleranceError : Error {
  using Error::Error;
};

struct NotProjectionValued : Error {
  using Error::Error;
};

struct ConfigError : Error {
  ConfigError(const std::string& what, std::size_t line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line(line) {}
  std::size_t line;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw PreconditionError(what);
}

}  // namespace bohm
