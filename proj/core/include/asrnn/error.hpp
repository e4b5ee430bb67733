#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace asrnn {

/// Caller broke a documented precondition (shape mismatch, out-of-range index, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf appeared during a forward or backward pass.
class NumericFault : public std::runtime_error {
 public:
  NumericFault(const std::string& what, std::size_t timestep)
      : std::runtime_error(what + " (timestep " + std::to_string(timestep) + ")"),
        timestep_(timestep) {}
  std::size_t timestep() const noexcept { return timestep_; }

 private:
  std::size_t timestep_;
};

/// The saturation matrix W_f = U_f D_f is singular (some d_f,i == 0).
class SingularSaturation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed binary or text input; carries the byte offset where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte offset " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Config file or command-line override could not be interpreted.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line, std::string field)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ", field '" + field + "': " + what
                                    : "field '" + field + "': " + what),
        line_(line),
        field_(std::move(field)) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

}  // namespace asrnn
