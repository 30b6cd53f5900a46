#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flab {

// Bad configuration values or malformed/unknown config file contents.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data; carries the 1-based line number where parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Optimization blew up (non-finite loss); carries the epoch where it happened.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& msg, int epoch)
      : std::runtime_error("epoch " + std::to_string(epoch) + ": " + msg), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace flab
