#pragma once

#include <stdexcept>
#include <string>

namespace socc {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Geometry
struct AngleNearPi : Error {
    AngleNearPi() : Error("rotation angle too close to pi for log map") {}
};

// Mapping
struct DomainError : Error {
    using Error::Error;
};
struct EmptyObservation : Error {
    EmptyObservation() : Error("semantic update requires at least one hit") {}
};

// Registration
struct DegenerateSystem : Error {
    DegenerateSystem() : Error("normal equations are rank deficient") {}
};
struct NoCorrespondences : Error {
    NoCorrespondences() : Error("no correspondence within the distance threshold") {}
};

// Pipeline
struct EmptyScan : Error {
    EmptyScan() : Error("scan contains no points") {}
};
struct ConfigError : Error {
    using Error::Error;
};

// I/O and evaluation
struct IoError : Error {
    using Error::Error;
};
struct MalformedFile : Error {
    using Error::Error;
};
struct CountMismatch : Error {
    using Error::Error;
};
struct TooShort : Error {
    using Error::Error;
};

}  // namespace socc
