#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace drivesim {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, std::string field, const std::string& what)
      : Error(file + ":" + std::to_string(line) + (field.empty() ? "" : " [" + field + "]") + ": " + what),
        file_(std::move(file)), line_(line), field_(std::move(field)) {}
  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::string file_;
  std::size_t line_;
  std::string field_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class MissingAsset : public Error {
 public:
  explicit MissingAsset(std::string path) : Error("missing asset: " + path), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// registration
class EmptyResult : public Error {
 public:
  using Error::Error;
};
class EmptyCloud : public Error {
 public:
  using Error::Error;
};
class RegistrationError : public Error {
 public:
  RegistrationError(std::size_t frame, const std::string& what)
      : Error("frame " + std::to_string(frame) + ": " + what), frame_(frame) {}
  std::size_t frame() const { return frame_; }

 private:
  std::size_t frame_;
};

// scene
class EmptyTrajectory : public Error {
 public:
  using Error::Error;
};
class MissingAgentState : public Error {
 public:
  using Error::Error;
};
class UnknownBehavior : public Error {
 public:
  using Error::Error;
};

// sensors / relight
class InvalidRig : public Error {
 public:
  using Error::Error;
};
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

// control
class RiccatiDivergence : public Error {
 public:
  using Error::Error;
};
class EmptyPlan : public Error {
 public:
  using Error::Error;
};

// agents / simloop
class ProtocolError : public Error {
 public:
  using Error::Error;
};
class VersionMismatch : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};
class DuplicateAgentId : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};
class AgentTimeout : public Error {
 public:
  AgentTimeout(std::string agent_id, int step)
      : Error("agent '" + agent_id + "' timed out at step " + std::to_string(step)),
        agent_id_(std::move(agent_id)), step_(step) {}
  const std::string& agent_id() const { return agent_id_; }
  int step() const { return step_; }

 private:
  std::string agent_id_;
  int step_;
};
class AgentDisconnected : public Error {
 public:
  using Error::Error;
};

// score
class NonPositiveInput : public Error {
 public:
  using Error::Error;
};
class LogFormatError : public Error {
 public:
  LogFormatError(std::size_t record, const std::string& what)
      : Error("log record " + std::to_string(record) + ": " + what), record_(record) {}
  std::size_t record() const { return record_; }

 private:
  std::size_t record_;
};

}  // namespace drivesim
