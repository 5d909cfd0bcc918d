#pragma once

#include <stdexcept>
#include <string>

namespace ecodrive {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration, bad input files, missing paths. CLI maps these to exit 2.
struct ConfigError : Error {
  using Error::Error;
};

// Domain errors raised while processing otherwise valid configuration. Exit 1.
struct DataError : Error {
  using Error::Error;
};

struct InsufficientData : DataError { using DataError::DataError; };
struct InvalidK : DataError { using DataError::DataError; };
struct SingleClassData : DataError { using DataError::DataError; };
struct UnlabeledData : DataError { using DataError::DataError; };
struct SchemaMismatch : DataError { using DataError::DataError; };
struct TooFewSamples : DataError { using DataError::DataError; };
struct EmptyInput : DataError { using DataError::DataError; };
struct VersionMismatch : DataError { using DataError::DataError; };
struct CorruptModel : DataError { using DataError::DataError; };
struct LengthMismatch : DataError { using DataError::DataError; };
struct ZeroArea : DataError { using DataError::DataError; };
struct InvalidProfile : ConfigError { using ConfigError::ConfigError; };

}  // namespace ecodrive
