#pragma once

#include <stdexcept>
#include <string>

namespace kdisc {

/// Base of every error raised by the library. Messages are meant for the
/// command line, so they name the offending item.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class LabelError : public DataError {
 public:
  using DataError::DataError;
};

class SplitError : public DataError {
 public:
  using DataError::DataError;
};

class ScalingError : public DataError {
 public:
  using DataError::DataError;
};

class ClassificationError : public DataError {
 public:
  using DataError::DataError;
};

class PlanError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class FitError : public Error {
 public:
  using Error::Error;
};

/// Raised by a stage whose upstream artifacts are absent.
class StageOrderError : public Error {
 public:
  using Error::Error;
};

}  // namespace kdisc
