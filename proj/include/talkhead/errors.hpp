#pragma once

#include <stdexcept>
#include <string>

namespace talkhead {

// Configuration problems map to exit code 2, everything else in this
// hierarchy is a data problem (exit code 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class InputError : public DataError {
public:
    using DataError::DataError;
};

class DimensionError : public DataError {
public:
    using DataError::DataError;
};

class FormatError : public DataError {
public:
    using DataError::DataError;
};

class DomainError : public DataError {
public:
    using DataError::DataError;
};

class ProjectionError : public DataError {
public:
    ProjectionError(const std::string& what, std::size_t point_index)
        : DataError(what), index_(point_index) {}
    std::size_t point_index() const { return index_; }

private:
    std::size_t index_;
};

class SelectionError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace talkhead
