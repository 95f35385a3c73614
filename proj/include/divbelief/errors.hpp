#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace divbelief {

// Bad input: a spec, config field or file that fails validation. The CLI maps
// this family to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& message)
        : std::invalid_argument(field.empty() ? message : field + ": " + message),
          field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// A computation that could not produce a finite, trustworthy answer. The CLI
// maps this family to exit code 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// exp(log value) would leave the representable range of double.
class SaturationError : public NumericError {
public:
    explicit SaturationError(double log_value)
        : NumericError("log value " + std::to_string(log_value) +
                       " outside representable range of double"),
          log_value_(log_value) {}

    double log_value() const noexcept { return log_value_; }

private:
    double log_value_;
};

// Stock volatility a + kappa vanished, so portfolios are undefined.
class SingularMarketError : public NumericError {
public:
    using NumericError::NumericError;
};

// Price/dividend ratio blew up; most likely the integrability condition fails
// for this parameter set.
class IntegrabilityError : public NumericError {
public:
    using NumericError::NumericError;
};

class BracketError : public NumericError {
public:
    using NumericError::NumericError;
};

// A per-step fixed point in the feedback simulator failed. Carries the step.
class FixedPointError : public NumericError {
public:
    FixedPointError(std::int64_t step, const std::string& message)
        : NumericError("step " + std::to_string(step) + ": " + message), step_(step) {}

    std::int64_t step() const noexcept { return step_; }

private:
    std::int64_t step_;
};

} // namespace divbelief
