#pragma once

#include <stdexcept>
#include <string>

namespace climattr {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File could not be opened / read / written.
class IoError : public Error {
public:
    using Error::Error;
};

// Column mapping, config file, or serialized document does not match the
// expected shape (missing column, bad JSON field, wrong month set, ...).
class SchemaError : public Error {
public:
    using Error::Error;
};

// Input text could not be turned into records (fatal variant; per-row
// soft failures are collected in ParseReport instead).
class ParseError : public Error {
public:
    using Error::Error;
};

// A window month has no temperature record.
class CoverageError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// Zero variance or |rho| at 1: the bivariate fit has no usable conditional.
class DegenerateFitError : public Error {
public:
    using Error::Error;
};

class UnitMismatchError : public Error {
public:
    using Error::Error;
};

// Bad command-line / config values (negative horizon, weight out of range, ...).
class UsageError : public Error {
public:
    using Error::Error;
};

} // namespace climattr
