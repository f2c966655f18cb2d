#pragma once

#include <stdexcept>
#include <string>

namespace poseloop {

// Exit-code categories used by the CLI: 2 config, 3 data, 4 training divergence.
enum class ErrorKind { config = 2, data = 3, divergence = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::string message)
      : Error(ErrorKind::config, std::move(message)) {}
};

class DataError : public Error {
 public:
  explicit DataError(std::string message)
      : Error(ErrorKind::data, std::move(message)) {}
};

class TrainError : public Error {
 public:
  explicit TrainError(std::string message)
      : Error(ErrorKind::divergence, std::move(message)) {}
};

// Simulation produced non-finite state; carries diagnostics in the message.
class SimBlowupError : public Error {
 public:
  explicit SimBlowupError(std::string message)
      : Error(ErrorKind::divergence, std::move(message)) {}
};

}  // namespace poseloop
