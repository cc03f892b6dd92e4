#pragma once

#include <stdexcept>
#include <string>

namespace mfconvtr {

// Error taxonomy shared by the library and the CLI exit codes:
// ConfigError -> 2, DataError -> 3, NumericError -> 4, UsageError -> 5.

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint loading failures, distinguishable by type.
struct CheckpointVersionError : DataError {
    using DataError::DataError;
};

struct CheckpointShapeError : DataError {
    using DataError::DataError;
};

struct CheckpointTruncatedError : DataError {
    using DataError::DataError;
};

}  // namespace mfconvtr
