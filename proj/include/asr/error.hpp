#pragma once

#include <stdexcept>
#include <string>

namespace asr {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { Usage = 1, Data = 2, Numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

// Raised for failed integrity or numerical verification (checksums, gradient checks).
class VerificationError : public Error {
 public:
  explicit VerificationError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

}  // namespace asr
