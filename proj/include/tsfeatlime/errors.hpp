#pragma once

#include <stdexcept>
#include <string>

namespace tsfl {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller-side mistakes: bad flags, bad specs, impossible configurations.
// The CLI maps these to exit code 1.
class ConfigError : public Error { using Error::Error; };
class SpecError : public ConfigError { using ConfigError::ConfigError; };
class ValidationError : public ConfigError { using ConfigError::ConfigError; };

// Data and runtime failures. The CLI maps these to exit code 2.
class IngestionError : public Error { using Error::Error; };
class GapError : public Error { using Error::Error; };
class DegenerateRangeError : public Error { using Error::Error; };
class InsufficientHistoryError : public Error { using Error::Error; };
class DimensionError : public Error { using Error::Error; };
class SingularSystemError : public Error { using Error::Error; };
class FitError : public Error { using Error::Error; };
class MetricError : public Error { using Error::Error; };
class AdapterError : public Error { using Error::Error; };
class AdapterTimeout : public AdapterError { using AdapterError::AdapterError; };
class ConflictError : public Error { using Error::Error; };
class NotFoundError : public Error { using Error::Error; };
class StorageError : public Error { using Error::Error; };

}  // namespace tsfl
