#pragma once

#include <stdexcept>
#include <string>

namespace ctxlora {

// Base for every error raised by the library. Callers that only need a
// message can catch this; the subclasses exist so tests and the CLI can tell
// failure classes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CycleError : public Error {
 public:
  using Error::Error;
};

class UnknownTaskError : public Error {
 public:
  using Error::Error;
};

class DuplicateEdgeError : public Error {
 public:
  using Error::Error;
};

// Empty or repeated task names.
class InvalidGraphError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class UnknownLinkError : public Error {
 public:
  using Error::Error;
};

class UnknownLayerError : public Error {
 public:
  using Error::Error;
};

class UnknownDeviceError : public Error {
 public:
  using Error::Error;
};

class InvalidGroupingError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A required hop or event has infinite cost, so the schedule never finishes.
class UnboundedScheduleError : public Error {
 public:
  using Error::Error;
};

// Malformed configuration or input document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctxlora
