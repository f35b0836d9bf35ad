#pragma once

#include <stdexcept>
#include <string>

namespace sfsync {

/// A design request that violates a solvability bound (e.g. the delay
/// tolerance limit).  Carries the name of the violated bound in what().
class UnsolvableError : public std::runtime_error {
public:
    explicit UnsolvableError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical breakdown inside a solver or integrator.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent scenario input.
class ScenarioError : public std::runtime_error {
public:
    explicit ScenarioError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace sfsync
