#pragma once

// Common types, error hierarchy and small numeric helpers shared by every module.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace stentrom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Index = Eigen::Index;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Degenerate geometry (zero-length segments, overrun placements, ...).
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Missing, empty or malformed data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Operation invoked on an object in the wrong state (e.g. untrained model).
class StateError : public Error {
public:
    using Error::Error;
};

/// Numerical breakdown: NaN energies, failed factorizations, non-convergence.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Relaxation stopped at max_steps with kinetic energy above threshold.
class NonConvergenceError : public NumericalError {
public:
    NonConvergenceError(const std::string& what, double final_ke, long steps)
        : NumericalError(what), final_kinetic_energy(final_ke), steps_taken(steps) {}
    double final_kinetic_energy;
    long steps_taken;
};

inline constexpr double kPi = std::numbers::pi;

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw DomainError(msg);
}

inline std::vector<Vec3> to_points(const Eigen::VectorXd& flat) {
    std::vector<Vec3> out(static_cast<std::size_t>(flat.size() / 3));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = flat.segment<3>(3 * static_cast<Index>(i));
    return out;
}

inline Eigen::VectorXd flatten(const std::vector<Vec3>& pts) {
    Eigen::VectorXd out(3 * static_cast<Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) out.segment<3>(3 * static_cast<Index>(i)) = pts[i];
    return out;
}

}  // namespace stentrom
