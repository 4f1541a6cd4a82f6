#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace retina {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: malformed files, out-of-range parameters, inconsistent grids.
// `field` names the offending parameter when there is one.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message, std::string field = {})
        : Error(message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// A numerical step failed (eigen-decomposition, singular system, budget).
class ComputationError : public Error {
public:
    using Error::Error;
};

}  // namespace retina
