// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rsaprobe {

/// Process exit codes used by the CLI.
enum class ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kDegenerate = 3 };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kData; }
};

/// Input violates a domain invariant (empty set, duplicate ids, NaN, bad metadata).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed file. Carries the byte offset at which decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Two inputs cannot be put over a common condition set.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Constant vectors, too few conditions and similar data pathologies.
class DegenerateError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kDegenerate; }
};

class UsageError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

}  // namespace rsaprobe
