#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nounprobe {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or input files. Maps to exit status 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Transport failures, malformed replies, unsupported ops. Exit status 3.
class BackendError : public Error {
 public:
  using Error::Error;
};

// Statistical preconditions not met (too few rows, zero variance). Exit status 4.
class AnalysisError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, std::size_t position)
      : ConfigError(what + " (at column " + std::to_string(position + 1) + ")"),
        position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class LexiconError : public ConfigError {
 public:
  LexiconError(const std::string& what, std::vector<std::size_t> rows)
      : ConfigError(what), rows_(std::move(rows)) {}

  const std::vector<std::size_t>& rows() const { return rows_; }

 private:
  std::vector<std::size_t> rows_;
};

}  // namespace nounprobe
