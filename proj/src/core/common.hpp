#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsen {

// Thrown when a caller passes values outside an operation's contract.
struct ArgumentError : std::runtime_error {
  explicit ArgumentError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when tensor shapes are incompatible with an operation.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on malformed files (datasets, checkpoints, configs).
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a numerical invariant breaks at runtime (non-finite values).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

namespace detail {
template <typename Err>
[[noreturn]] inline void fail(const std::string& msg) {
  throw Err(msg);
}
}  // namespace detail

#define LSEN_CHECK_ARG(cond, msg)                                        \
  do {                                                                   \
    if (!(cond)) ::lsen::detail::fail<::lsen::ArgumentError>((msg));     \
  } while (0)

#define LSEN_CHECK_DIM(cond, msg)                                        \
  do {                                                                   \
    if (!(cond)) ::lsen::detail::fail<::lsen::DimensionError>((msg));    \
  } while (0)

}  // namespace lsen
