#pragma once

#include "cablecal/types.hpp"

namespace cablecal {

/// Geometry of the revolute-revolute-prismatic arm. Both revolute axes and
/// the insertion axis intersect at a remote center of motion located
/// `rcm_height` above the base origin, so joints 1 and 2 act as a spherical
/// linkage.
struct KinematicParams {
  double rcm_height = 0.25;                // m, base origin to RCM along base z
  double axis_angle_1 = 75.0 * kDegToRad;  // rad, between joint-1 and joint-2 axes
  double axis_angle_2 = 52.0 * kDegToRad;  // rad, between joint-2 and insertion axes
  Vec3 tool_offset{0.0, 0.0, 0.10};        // m, in the insertion frame

  static KinematicParams reference() { return {}; }

  /// Throws Error(kInvalidArgument) when lengths are not positive or the axis
  /// angles fall outside (0, pi).
  void validate() const;

  bool operator==(const KinematicParams&) const = default;
};

struct Pose {
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
};

Pose forward_kinematics(const KinematicParams& params, const JointVector& q);

/// Geometric Jacobian of the tool tip. Rows 0..2 are linear velocity, rows
/// 3..5 angular velocity, both in the base frame. Columns 3..6 are zero.
Jacobian jacobian(const KinematicParams& params, const JointVector& q);

/// Unit insertion direction in the base frame.
Vec3 insertion_axis(const KinematicParams& params, const JointVector& q);

}  // namespace cablecal
