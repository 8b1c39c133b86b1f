#pragma once

#include <Eigen/Dense>

namespace cablecal {

inline constexpr int kNumJoints = 7;
inline constexpr int kActiveJoints = 3;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kRadToDeg = 180.0 / kPi;
inline constexpr double kDegToRad = kPi / 180.0;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Joint angles/translations of all seven joints. Indices 0, 1 are revolute
/// (rad), 2 is prismatic (m), 3..6 are frozen distal channels.
using JointVector = Eigen::Matrix<double, kNumJoints, 1>;

using Jacobian = Eigen::Matrix<double, 6, kNumJoints>;

}  // namespace cablecal
