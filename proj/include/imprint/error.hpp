#pragma once

#include <stdexcept>
#include <string>

namespace imprint {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit the operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A class or insertion index outside its valid range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// An API precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// The data cannot support the requested operation (missing class,
/// too few examples, empty pool).
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    using DataError::DataError;
};

class StratificationError : public DataError {
public:
    using DataError::DataError;
};

/// The averaged novel-class embedding is too short to normalize.
class DegenerateImprintError : public Error {
public:
    using Error::Error;
};

/// Configuration document failed validation.
class ConfigError : public Error {
public:
    using Error::Error;
};

class TrainingDiverged : public Error {
public:
    TrainingDiverged(int epoch, double lr)
        : Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                " (lr " + std::to_string(lr) + ")"),
          epoch_(epoch), lr_(lr) {}

    int epoch() const noexcept { return epoch_; }
    double lr() const noexcept { return lr_; }

private:
    int epoch_;
    double lr_;
};

}  // namespace imprint
