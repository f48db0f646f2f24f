#ifndef BNN_ERRORS_HPP
#define BNN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bnn {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shape/dimension violations; carries the offending layer when known.
class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, int layer = -1)
      : Error(layer >= 0 ? what + " (layer " + std::to_string(layer) + ")" : what),
        layer_(layer) {}
  int layer() const { return layer_; }

 private:
  int layer_;
};

// Non-finite values where finite ones are required; carries the first bad index.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, long index = -1)
      : Error(index >= 0 ? what + " (index " + std::to_string(index) + ")" : what),
        index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

// Bad user-facing configuration (spec files, CLI arguments, CSV schemas).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace bnn

#endif  // BNN_ERRORS_HPP
