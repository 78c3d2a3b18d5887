#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dpmn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two operands disagree on the model dimension d.
class DimensionError : public Error {
 public:
  DimensionError(std::size_t expected, std::size_t actual)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A loss or objective evaluated to NaN/Inf.
class NumericError : public Error {
 public:
  NumericError(std::int64_t device, const std::string& what)
      : Error("non-finite value on device " + std::to_string(device) + ": " + what),
        device_(device) {}

  std::int64_t device() const noexcept { return device_; }

 private:
  std::int64_t device_;
};

// Training blew up mid-run; names the offending device and round.
class DivergenceError : public Error {
 public:
  DivergenceError(std::int64_t device, std::int64_t round, const std::string& what)
      : Error("divergence on device " + std::to_string(device) + " at round " +
              std::to_string(round) + ": " + what),
        device_(device),
        round_(round) {}

  std::int64_t device() const noexcept { return device_; }
  std::int64_t round() const noexcept { return round_; }

 private:
  std::int64_t device_;
  std::int64_t round_;
};

// Malformed wire payload. Sender/round are -1 when the header itself is unreadable.
class DecodeError : public Error {
 public:
  DecodeError(std::int64_t sender, std::int64_t round, const std::string& what)
      : Error("payload decode error (sender " + std::to_string(sender) + ", round " +
              std::to_string(round) + "): " + what),
        sender_(sender),
        round_(round) {}

  std::int64_t sender() const noexcept { return sender_; }
  std::int64_t round() const noexcept { return round_; }

 private:
  std::int64_t sender_;
  std::int64_t round_;
};

// Bad IDX file: wrong magic, short read. Carries the byte offset of the failure.
class FormatError : public Error {
 public:
  FormatError(std::string path, std::size_t offset, const std::string& what)
      : Error(path + ": " + what + " (at byte offset " + std::to_string(offset) + ")"),
        path_(std::move(path)),
        offset_(offset) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string path_;
  std::size_t offset_;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

// Trace files that cannot be compared.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Config validation collects every problem before throwing.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "invalid config:";
    for (const auto& issue : issues) {
      out += "\n  - ";
      out += issue;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

}  // namespace dpmn
