#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace memsa {

/// Violated precondition: bad shape, out-of-range argument, empty input.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced or met a non-finite value.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(index ? what + " (at flat index " + std::to_string(*index) + ")" : what),
        index_(index) {}

  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  std::optional<std::size_t> index_;
};

/// Malformed or inconsistent on-disk data (CSV, checkpoints, manifests).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation requested for a model variant that does not support it.
class UnsupportedVariant : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace memsa
