#pragma once

#include <stdexcept>
#include <string>

namespace arbmarl {

/// Base class for every domain error raised by the library. The CLI maps
/// these to exit code 1; anything else is a usage error or a bug.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// grid
class CycleDetected : public Error {
public:
    using Error::Error;
};
class Disconnected : public Error {
public:
    using Error::Error;
};
class InvalidNetwork : public Error {
public:
    using Error::Error;
};

// lem
class InvalidBid : public Error {
public:
    using Error::Error;
};
class NegativeCapacity : public Error {
public:
    using Error::Error;
};
class InvalidMarketInput : public Error {
public:
    using Error::Error;
};

// lp / lfm
class LpError : public Error {
public:
    using Error::Error;
};
class MissingBid : public Error {
public:
    using Error::Error;
};
class NotOptimal : public Error {
public:
    using Error::Error;
};

// neural
class DimensionMismatch : public Error {
public:
    using Error::Error;
};
class NoCache : public Error {
public:
    using Error::Error;
};
class EmptyBatch : public Error {
public:
    using Error::Error;
};
class InsufficientSamples : public Error {
public:
    using Error::Error;
};
class CheckpointError : public Error {
public:
    using Error::Error;
};

// envgame / cli_io
class UnknownWeek : public Error {
public:
    using Error::Error;
};
class SchemaError : public Error {
public:
    using Error::Error;
};
class NonFiniteValue : public Error {
public:
    using Error::Error;
};
class BadLength : public Error {
public:
    using Error::Error;
};
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace arbmarl
