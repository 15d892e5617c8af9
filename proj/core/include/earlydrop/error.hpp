// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace earlydrop {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or arguments, detected before any compute.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Incompatible tensor shapes; the message names the layer.
class ShapeError : public Error {
public:
  ShapeError(std::string layer, const std::string &what)
      : Error(layer + ": " + what), layer_(std::move(layer)) {}
  const std::string &layer() const noexcept { return layer_; }

private:
  std::string layer_;
};

/// A loss or gradient stopped being finite. `iteration` is -1 when unknown.
class NonFiniteError : public Error {
public:
  NonFiniteError(const std::string &what, std::int64_t iteration)
      : Error(iteration >= 0 ? what + " at iteration " + std::to_string(iteration)
                             : what),
        iteration_(iteration) {}
  std::int64_t iteration() const noexcept { return iteration_; }

private:
  std::int64_t iteration_;
};

/// Malformed binary or text input.
class ParseError : public Error {
public:
  ParseError(const std::string &what, std::uint64_t offset)
      : Error(what + " (offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

private:
  std::uint64_t offset_;
};

} // namespace earlydrop
