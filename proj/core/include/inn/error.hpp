#pragma once

#include <stdexcept>
#include <string>

namespace inn {

// Root of every error the library throws. Each subclass maps to one failure
// family so callers (the CLI in particular) can dispatch on type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor or layer shapes do not compose.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid configuration, hyperparameter, or architecture.
class ConfigError : public Error {
public:
    using Error::Error;
};

// An internal invariant was broken (lower > upper, stale cache, ...).
class ConsistencyError : public Error {
public:
    using Error::Error;
};

// Filesystem failures; the message carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

// A persisted file is malformed: bad magic, truncation, shape mismatch.
class CorruptionError : public IoError {
public:
    using IoError::IoError;
};

// A checkpointed interval network violates lower <= point <= upper.
class ContainmentError : public CorruptionError {
public:
    using CorruptionError::CorruptionError;
};

// Training produced non-finite values or exploding intervals.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// A metric is mathematically undefined for the given inputs.
class MetricUndefined : public Error {
public:
    using Error::Error;
};

} // namespace inn
