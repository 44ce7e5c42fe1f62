#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace seeker {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat26 = Eigen::Matrix<double, 2, 6>;

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure (non-convergence, loss of definiteness).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Precondition or configuration violation.
class InvalidInput : public Error {
public:
    using Error::Error;
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kDeg = kPi / 180.0;
inline constexpr double kArcsec = kDeg / 3600.0;

}  // namespace seeker
