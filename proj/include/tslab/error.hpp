#pragma once

#include <stdexcept>
#include <string>

namespace tslab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A GridCase violates a structural invariant (self-loop, duplicate branch, ...).
class InvalidCase : public Error {
public:
    using Error::Error;
};

/// A numeric argument is outside its admissible domain.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// A linear-algebra routine failed (singular system, failed decomposition).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Topology rejection sampling ran out of attempts.
class GenerationExhausted : public Error {
public:
    using Error::Error;
};

/// A scenario cannot be simulated (e.g. the post-fault network islands).
class ScenarioInvalid : public Error {
public:
    using Error::Error;
};

/// Malformed input data: bad file contents, wrong shapes, bad manifests.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Checksum mismatch on a shipped data file.
class DataCorruption : public Error {
public:
    using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingDiverged : public Error {
public:
    using Error::Error;
};

}  // namespace tslab
