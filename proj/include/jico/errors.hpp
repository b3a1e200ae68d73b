#pragma once

#include <stdexcept>
#include <string>

namespace jico {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// X(I - P) is numerically zero: the weight constraints removed all signal.
struct DegenerateProjectionError : Error {
    explicit DegenerateProjectionError(const std::string& msg) : Error(msg) {}
};

// The response is orthogonal to the feasible space; no direction for finite gamma.
struct DegenerateDirectionError : Error {
    explicit DegenerateDirectionError(const std::string& msg) : Error(msg) {}
};

// Accumulated constraints span all of the reduced space.
struct RankExhaustedError : Error {
    explicit RankExhaustedError(const std::string& msg) : Error(msg) {}
};

// No fixed point converged from any start of the rho grid.
struct FixedPointError : Error {
    explicit FixedPointError(const std::string& msg) : Error(msg) {}
};

struct FitError : Error {
    explicit FitError(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace jico
