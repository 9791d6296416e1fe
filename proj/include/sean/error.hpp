#pragma once

#include <stdexcept>
#include <string>

namespace sean {

/// Malformed input file or record.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structurally valid input that violates a data contract (duplicate ids, unknown users, ...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sean
