#pragma once

#include <stdexcept>
#include <string>

namespace qgraph {

/// Failure category. The CLI maps these onto exit statuses.
enum class ErrorKind {
    validation, ///< bad input: malformed document, assumption violated, bad argument
    numerical   ///< rank ambiguity, convention self-check failure, inconsistent detectors
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

} // namespace qgraph
