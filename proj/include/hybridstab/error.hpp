#pragma once

#include <stdexcept>
#include <string>

namespace hybridstab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inverting (or dividing by) a rational function that is identically zero.
class ZeroFunctionError : public Error {
public:
    using Error::Error;
};

/// 1 - a*b vanishes identically in a feedback composition.
class DegenerateFeedbackError : public Error {
public:
    using Error::Error;
};

/// Evaluation point lies on (or numerically at) a pole.
class NearPoleError : public Error {
public:
    NearPoleError(const std::string& what, double distance)
        : Error(what), distance_(distance) {}
    [[nodiscard]] double distance() const noexcept { return distance_; }

private:
    double distance_;
};

/// Numerator degree exceeds denominator degree by more than one.
class ImproperError : public Error {
public:
    using Error::Error;
};

/// Invalid or missing model parameter; carries the offending field name.
class ParameterError : public Error {
public:
    ParameterError(const std::string& what, std::string field)
        : Error(what), field_(std::move(field)) {}
    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Network topology violates a structural requirement.
class NetworkError : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public Error {
public:
    using Error::Error;
};

class NotPsdError : public Error {
public:
    using Error::Error;
};

/// Direct-feedthrough loop of the interconnection cannot be solved.
class AlgebraicLoopError : public Error {
public:
    using Error::Error;
};

/// Time-domain trace left the admissible range.
class SimulationDivergedError : public Error {
public:
    SimulationDivergedError(const std::string& what, double time)
        : Error(what), time_(time) {}
    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_;
};

/// Malformed or semantically invalid case file.
class CaseError : public Error {
public:
    CaseError(const std::string& what, int line = 0) : Error(what), line_(line) {}
    [[nodiscard]] int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace hybridstab
