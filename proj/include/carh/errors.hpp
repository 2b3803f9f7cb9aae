#pragma once

#include <stdexcept>
#include <string>

namespace carh {

/// Malformed or inconsistent input data (files, shapes, dimensions).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// An estimator or solver could not produce a result for well-formed data.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace carh
