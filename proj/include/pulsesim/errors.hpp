#pragma once

#include <stdexcept>
#include <string>

namespace pulsesim {

/// Scenario or parameter rejected at validation. `field` holds the
/// dotted path of the offending key (e.g. "distribution.u_values").
class ValidationError : public std::runtime_error {
public:
  ValidationError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Precondition violated by a caller (e.g. unnormalized input where the
/// contract requires a normalized distribution).
class ContractError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// A drift step would drive a squared weight negative.
class CflError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A random stream ran out of counter space. Never reseed silently.
class ReproducibilityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace pulsesim
