#ifndef TRANSSENT_ERRORS_HPP
#define TRANSSENT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace transsent {

// Bad invocation: unknown flags, illegal marker names, missing arguments.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad inputs: unreadable files, malformed records, incompatible checkpoints.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf surfaced during training; carries the offending loss component.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& component, const std::string& msg)
      : std::runtime_error(msg), component_(component) {}
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

}  // namespace transsent

#endif  // TRANSSENT_ERRORS_HPP
