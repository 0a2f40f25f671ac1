// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hit {

/// Extents of two operands do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent external data: files, archives, configs.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user-supplied option or argument.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A tracker failed on a specific frame. Frame indices are zero-based.
class TrackingError : public std::runtime_error {
 public:
  TrackingError(std::size_t frame, const std::string& what)
      : std::runtime_error("frame " + std::to_string(frame) + ": " + what),
        frame_(frame) {}

  std::size_t frame() const noexcept { return frame_; }

 private:
  std::size_t frame_;
};

}  // namespace hit
