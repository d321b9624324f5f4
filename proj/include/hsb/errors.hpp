#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsb {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numeric argument lies outside its admissible domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Vector lengths or dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid structure, learner or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// select/update called out of order.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Corrupt or truncated serialized state.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Enumeration would exceed its configured size cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input row; row numbers are 1-based and count the header.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

}  // namespace hsb
