#pragma once

#include <stdexcept>
#include <string>

namespace attrib {

/// Base class for all library errors. Argument-contract violations use
/// std::invalid_argument instead.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input file is missing a required column or is structurally unusable.
struct SchemaError : Error {
    using Error::Error;
};

/// A cell could not be parsed; message carries the file line number.
struct ParseError : Error {
    using Error::Error;
};

/// Data is present but unusable (e.g. a feature that is all sentinels).
struct DataError : Error {
    using Error::Error;
};

/// An optimizer hit its iteration cap before reaching tolerance.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& msg, double grad_norm)
        : Error(msg), gradient_norm(grad_norm) {}
    double gradient_norm;
};

/// Training produced a non-finite loss or otherwise failed.
struct TrainingError : Error {
    using Error::Error;
};

/// A rejection sampler or pool ran out before satisfying its quota.
struct ExhaustionError : Error {
    using Error::Error;
};

/// A linear solve or similar numeric step degenerated.
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace attrib
