#ifndef EAPO_ERRORS_HPP_
#define EAPO_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace eapo {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidStateError : public Error {
 public:
  using Error::Error;
};

class InvalidActionError : public Error {
 public:
  using Error::Error;
};

class SimulationDivergedError : public Error {
 public:
  using Error::Error;
};

// Shape or size mismatch between tensors that must agree.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Bad or unknown configuration key. key() names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : "config key '" + key + "': " + what),
        key_(std::move(key)),
        detail_(what) {}
  const std::string& key() const { return key_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string key_;
  std::string detail_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Training could not recover from non-finite losses.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace eapo

#endif  // EAPO_ERRORS_HPP_
