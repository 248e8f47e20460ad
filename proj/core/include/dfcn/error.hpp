#pragma once

#include <stdexcept>
#include <string>

namespace dfcn {

// Base for every error raised by the library. Callers that only care about
// "something in dfcn failed" catch this; the subclasses carry the stage.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class StatsError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace dfcn
