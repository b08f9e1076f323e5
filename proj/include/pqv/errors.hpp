#pragma once

#include <stdexcept>
#include <string>

namespace pqv {

/// Invalid argument values or mismatched inputs.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The master grid is too coarse for the requested construction.
class ResolutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A search over the available partition levels ran out before succeeding.
class ExhaustionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A coarse cell contains no fine partition point.
class GroupingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No mesh-matched pair of levels exists between two sequences.
class PairingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Too few Monte Carlo samples for the requested statistic.
class StatisticalPowerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ParameterError(what);
}

}  // namespace detail
}  // namespace pqv
