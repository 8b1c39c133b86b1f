#include "cablecal/kinematics.hpp"

#include <cmath>

#include "cablecal/error.hpp"

namespace cablecal {

namespace {

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

struct Frames {
  Vec3 rcm;
  Mat3 after_joint1;  // orientation whose z is the joint-2 axis
  Mat3 distal;        // orientation whose z is the insertion axis
};

Frames frames(const KinematicParams& p, const JointVector& q) {
  Frames f;
  f.rcm = Vec3(0.0, 0.0, p.rcm_height);
  f.after_joint1 = rot_z(q[0]) * rot_x(p.axis_angle_1);
  f.distal = f.after_joint1 * rot_z(q[1]) * rot_x(p.axis_angle_2);
  return f;
}

}  // namespace

void KinematicParams::validate() const {
  if (!(rcm_height > 0.0) || !(tool_offset.norm() > 0.0)) {
    throw Error(ErrorCategory::kInvalidArgument, "kinematics: lengths must be positive");
  }
  for (double a : {axis_angle_1, axis_angle_2}) {
    if (!(a > 0.0 && a < kPi)) {
      throw Error(ErrorCategory::kInvalidArgument, "kinematics: axis angles must lie in (0, pi)");
    }
  }
}

Pose forward_kinematics(const KinematicParams& params, const JointVector& q) {
  const Frames f = frames(params, q);
  Pose pose;
  pose.rotation = f.distal;
  pose.position = f.rcm + f.distal * (Vec3(0.0, 0.0, q[2]) + params.tool_offset);
  return pose;
}

Jacobian jacobian(const KinematicParams& params, const JointVector& q) {
  const Frames f = frames(params, q);
  const Vec3 tip = f.rcm + f.distal * (Vec3(0.0, 0.0, q[2]) + params.tool_offset);
  const Vec3 r = tip - f.rcm;
  const Vec3 z1 = Vec3::UnitZ();
  const Vec3 z2 = f.after_joint1.col(2);
  const Vec3 z3 = f.distal.col(2);

  Jacobian j = Jacobian::Zero();
  j.block<3, 1>(0, 0) = z1.cross(r);
  j.block<3, 1>(3, 0) = z1;
  j.block<3, 1>(0, 1) = z2.cross(r);
  j.block<3, 1>(3, 1) = z2;
  j.block<3, 1>(0, 2) = z3;
  return j;
}

Vec3 insertion_axis(const KinematicParams& params, const JointVector& q) {
  return frames(params, q).distal.col(2);
}

}  // namespace cablecal
