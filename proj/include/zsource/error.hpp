#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace zsource {

enum class ErrorKind {
    invalid_input,
    singular,
    out_of_range,
    invalid_pwm,
    invalid_modulation,
    divergence,
    precondition,
    certificate_not_found,
    no_contraction,
    config,
};

constexpr std::string_view to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::invalid_input: return "invalid-input";
        case ErrorKind::singular: return "singular";
        case ErrorKind::out_of_range: return "out-of-range";
        case ErrorKind::invalid_pwm: return "invalid-pwm";
        case ErrorKind::invalid_modulation: return "invalid-modulation";
        case ErrorKind::divergence: return "divergence";
        case ErrorKind::precondition: return "precondition";
        case ErrorKind::certificate_not_found: return "certificate-not-found";
        case ErrorKind::no_contraction: return "no-contraction";
        case ErrorKind::config: return "config";
    }
    return "unknown";
}

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class SingularMatrixError : public Error {
public:
    SingularMatrixError(const std::string& what, double pivot)
        : Error(ErrorKind::singular, what), pivot_(pivot) {}

    /// Magnitude of the offending pivot.
    double pivot() const noexcept { return pivot_; }

private:
    double pivot_;
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double last_valid_time)
        : Error(ErrorKind::divergence, what), last_valid_time_(last_valid_time) {}

    double last_valid_time() const noexcept { return last_valid_time_; }

private:
    double last_valid_time_;
};

/// Configuration problem attributable to one field of the input document.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(ErrorKind::config, what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace zsource
