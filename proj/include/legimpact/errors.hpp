#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace legimpact {

// Base for every failure raised by the harness. Each subclass names one
// contract violation so callers can route invalid tests separately from
// hard failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteState : public Error { public: using Error::Error; };
class PressureOutOfRange : public Error { public: using Error::Error; };
class DegenerateSamples : public Error { public: using Error::Error; };
class CalibrationRejected : public Error { public: using Error::Error; };
class NoContact : public Error { public: using Error::Error; };
class WindowTooShort : public Error { public: using Error::Error; };
class OffsetOutOfRange : public Error { public: using Error::Error; };
class MissingPolicyTable : public Error { public: using Error::Error; };
class EmptyInput : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

// Malformed persisted data. Carries the offending field and 1-based line.
class SchemaMismatch : public Error {
 public:
  SchemaMismatch(std::string field, std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": field '" + field + "': " + what),
        field_(std::move(field)),
        line_(line) {}

  const std::string& field() const noexcept { return field_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string field_;
  std::size_t line_;
};

}  // namespace legimpact
