#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlpd {

// Error categories map 1:1 onto C API status codes and CLI exit codes.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad caller input: dimensions, ranges, malformed strings, unknown keys.
struct invalid_argument : error {
  using error::error;
};

// Filesystem and file-format failures.
struct io_error : error {
  using error::error;
};

// Numerical breakdown: non-finite values, no convergence.
struct numeric_error : error {
  using error::error;
};

// Text parse failure; offset is the byte position of the problem.
struct parse_error : invalid_argument {
  parse_error(const std::string& what, std::size_t offset)
      : invalid_argument(what + " (at offset " + std::to_string(offset) + ")"),
        offset(offset) {}
  std::size_t offset;
};

}  // namespace mlpd
