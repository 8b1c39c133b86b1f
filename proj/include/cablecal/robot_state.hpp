#pragma once

#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cablecal {

inline constexpr int kFeatureCount = 112;

/// One flattened robot-state snapshot.
using FeatureVector = std::array<double, kFeatureCount>;

struct FieldSpec {
  std::string_view name;
  int offset;
  int size;
};

/// Offsets of every field in the flattened state vector.
namespace layout {
inline constexpr int kTimeStamp = 0;
inline constexpr int kRunLevel = 1;
inline constexpr int kSubLevel = 2;
inline constexpr int kLastSequence = 3;
inline constexpr int kArmType = 4;
inline constexpr int kEePose = 5;
inline constexpr int kEePoseDesired = 8;
inline constexpr int kEeOrient = 11;
inline constexpr int kEeOrientDesired = 20;
inline constexpr int kEncoderValue = 29;
inline constexpr int kEncoderOffset = 36;
inline constexpr int kMotorPose = 43;
inline constexpr int kMotorPoseDesired = 50;
inline constexpr int kMotorVelocity = 57;
inline constexpr int kJointPose = 64;
inline constexpr int kJointPoseDesired = 71;
inline constexpr int kJointVelocity = 78;
inline constexpr int kMotorCurrentCmd = 85;
inline constexpr int kMotorTorque = 92;
inline constexpr int kJacobianVelocity = 99;
inline constexpr int kJacobianForce = 105;
inline constexpr int kDesiredGrasper = 111;
}  // namespace layout

inline constexpr std::array<FieldSpec, 22> kFields{{
    {"time_stamp", layout::kTimeStamp, 1},
    {"run_level", layout::kRunLevel, 1},
    {"sub_level", layout::kSubLevel, 1},
    {"last_sequence", layout::kLastSequence, 1},
    {"arm_type", layout::kArmType, 1},
    {"ee_pose", layout::kEePose, 3},
    {"ee_pose_desired", layout::kEePoseDesired, 3},
    {"ee_orient", layout::kEeOrient, 9},
    {"ee_orient_desired", layout::kEeOrientDesired, 9},
    {"encoder_value", layout::kEncoderValue, 7},
    {"encoder_offset", layout::kEncoderOffset, 7},
    {"motor_pose", layout::kMotorPose, 7},
    {"motor_pose_desired", layout::kMotorPoseDesired, 7},
    {"motor_velocity", layout::kMotorVelocity, 7},
    {"joint_pose", layout::kJointPose, 7},
    {"joint_pose_desired", layout::kJointPoseDesired, 7},
    {"joint_velocity", layout::kJointVelocity, 7},
    {"motor_current_cmd", layout::kMotorCurrentCmd, 7},
    {"motor_torque", layout::kMotorTorque, 7},
    {"jacobian_velocity", layout::kJacobianVelocity, 6},
    {"jacobian_force", layout::kJacobianForce, 6},
    {"desired_grasper", layout::kDesiredGrasper, 1},
}};

/// Column name of feature `index`, e.g. "motor_pose[3]".
std::string feature_name(int index);

/// Named feature groups (index sets into FeatureVector).
class FeatureGroupRegistry {
 public:
  /// Standard grouping: operating_status, joint_poses, end_effector,
  /// all_poses, velocity, torque, jacobian, encoders, motor_pose_4,
  /// joint_1..joint_3, plus one group per raw field.
  static FeatureGroupRegistry reference();

  /// Adds or replaces a group. Indices are sorted and deduplicated.
  void add(const std::string& name, std::vector<int> indices);

  /// Throws Error(kUnknownGroup).
  const std::vector<int>& indices(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::pair<std::string, std::vector<int>>>& groups() const { return groups_; }

  bool operator==(const FeatureGroupRegistry&) const = default;

 private:
  std::vector<std::pair<std::string, std::vector<int>>> groups_;
};

/// Indices of joint `joint` (0-based) that belong to a per-joint group.
std::vector<int> joint_group_indices(int joint);

/// Selection of active input features.
class FeatureMask {
 public:
  FeatureMask() { active_.fill(true); }

  static FeatureMask all() { return {}; }
  static FeatureMask none();
  /// Everything except encoders and motor_pose_4.
  static FeatureMask default_mask(const FeatureGroupRegistry& registry);

  FeatureMask without(const std::vector<int>& indices) const;
  FeatureMask with(const std::vector<int>& indices) const;
  bool test(int index) const { return active_[static_cast<std::size_t>(index)]; }
  std::vector<int> active_indices() const;
  int count() const;

  /// 112 characters of '0'/'1'.
  std::string to_string() const;
  /// Throws Error(kSchemaMismatch) on malformed input.
  static FeatureMask from_string(std::string_view bits);

  bool operator==(const FeatureMask&) const = default;

 private:
  std::array<bool, kFeatureCount> active_;
};

}  // namespace cablecal
