#pragma once

#include <stdexcept>
#include <string>

namespace mfsr {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class UnknownKernelError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class SizeCapError : public Error { using Error::Error; };
class DegenerateSignalError : public Error { using Error::Error; };
class NumericalError : public Error { using Error::Error; };
class UnsupportedVariantError : public Error { using Error::Error; };
class EmptyObservationError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

class ConfigSyntaxError : public Error {
 public:
  ConfigSyntaxError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ConfigValueError : public Error {
 public:
  ConfigValueError(std::string key, const std::string& what)
      : Error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace mfsr
