#pragma once

#include <stdexcept>
#include <string>

namespace sla {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A value violates a domain rule (unknown label, off-grid score, bad dims).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

/// A file does not conform to its on-disk format.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

/// A metric is mathematically undefined on the given data (e.g. zero variance).
class UndefinedMetricError : public DomainError {
 public:
  explicit UndefinedMetricError(const std::string& msg) : DomainError(msg) {}
};

}  // namespace sla
