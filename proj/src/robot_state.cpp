#include "cablecal/robot_state.hpp"

#include <algorithm>

#include "cablecal/error.hpp"

namespace cablecal {

namespace {

std::vector<int> range(int offset, int size) {
  std::vector<int> out(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) out[static_cast<std::size_t>(i)] = offset + i;
  return out;
}

std::vector<int> field_indices(std::string_view name) {
  for (const auto& f : kFields) {
    if (f.name == name) return range(f.offset, f.size);
  }
  throw Error(ErrorCategory::kUnknownGroup, "unknown field: " + std::string(name));
}

std::vector<int> fields(std::initializer_list<std::string_view> names) {
  std::vector<int> out;
  for (auto n : names) {
    const auto idx = field_indices(n);
    out.insert(out.end(), idx.begin(), idx.end());
  }
  return out;
}

}  // namespace

std::string feature_name(int index) {
  for (const auto& f : kFields) {
    if (index >= f.offset && index < f.offset + f.size) {
      if (f.size == 1) return std::string(f.name);
      return std::string(f.name) + "[" + std::to_string(index - f.offset) + "]";
    }
  }
  throw Error(ErrorCategory::kInvalidArgument, "feature index out of range: " + std::to_string(index));
}

std::vector<int> joint_group_indices(int joint) {
  if (joint < 0 || joint >= 3) {
    throw Error(ErrorCategory::kUnknownGroup, "joint group must be 1..3");
  }
  std::vector<int> out;
  for (int offset : {layout::kMotorPose, layout::kMotorPoseDesired, layout::kMotorVelocity,
                     layout::kJointPose, layout::kJointPoseDesired, layout::kJointVelocity,
                     layout::kMotorCurrentCmd, layout::kMotorTorque}) {
    out.push_back(offset + joint);
  }
  std::sort(out.begin(), out.end());
  return out;
}

FeatureGroupRegistry FeatureGroupRegistry::reference() {
  FeatureGroupRegistry r;
  r.add("operating_status",
        fields({"time_stamp", "run_level", "sub_level", "last_sequence", "arm_type", "desired_grasper"}));
  r.add("joint_poses", fields({"motor_pose", "motor_pose_desired", "joint_pose", "joint_pose_desired"}));
  r.add("end_effector", fields({"ee_pose", "ee_pose_desired", "ee_orient", "ee_orient_desired"}));
  auto all_poses = r.indices("joint_poses");
  const auto& ee = r.indices("end_effector");
  all_poses.insert(all_poses.end(), ee.begin(), ee.end());
  r.add("all_poses", all_poses);
  r.add("velocity", fields({"motor_velocity", "joint_velocity"}));
  r.add("torque", fields({"motor_current_cmd", "motor_torque"}));
  r.add("jacobian", fields({"jacobian_velocity", "jacobian_force"}));
  r.add("encoders", fields({"encoder_value", "encoder_offset"}));
  r.add("motor_pose_4", {layout::kMotorPose + 3});
  for (int j = 0; j < 3; ++j) r.add("joint_" + std::to_string(j + 1), joint_group_indices(j));
  for (const auto& f : kFields) r.add(std::string(f.name), range(f.offset, f.size));
  return r;
}

void FeatureGroupRegistry::add(const std::string& name, std::vector<int> indices) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  for (int i : indices) {
    if (i < 0 || i >= kFeatureCount) {
      throw Error(ErrorCategory::kInvalidArgument, "group '" + name + "' has index out of range");
    }
  }
  for (auto& [n, idx] : groups_) {
    if (n == name) {
      idx = std::move(indices);
      return;
    }
  }
  groups_.emplace_back(name, std::move(indices));
}

const std::vector<int>& FeatureGroupRegistry::indices(const std::string& name) const {
  for (const auto& [n, idx] : groups_) {
    if (n == name) return idx;
  }
  throw Error(ErrorCategory::kUnknownGroup, "unknown feature group: " + name);
}

bool FeatureGroupRegistry::contains(const std::string& name) const {
  return std::any_of(groups_.begin(), groups_.end(), [&](const auto& g) { return g.first == name; });
}

FeatureMask FeatureMask::none() {
  FeatureMask m;
  m.active_.fill(false);
  return m;
}

FeatureMask FeatureMask::default_mask(const FeatureGroupRegistry& registry) {
  return all().without(registry.indices("encoders")).without(registry.indices("motor_pose_4"));
}

FeatureMask FeatureMask::without(const std::vector<int>& indices) const {
  FeatureMask m = *this;
  for (int i : indices) m.active_.at(static_cast<std::size_t>(i)) = false;
  return m;
}

FeatureMask FeatureMask::with(const std::vector<int>& indices) const {
  FeatureMask m = *this;
  for (int i : indices) m.active_.at(static_cast<std::size_t>(i)) = true;
  return m;
}

std::vector<int> FeatureMask::active_indices() const {
  std::vector<int> out;
  for (int i = 0; i < kFeatureCount; ++i) {
    if (active_[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

int FeatureMask::count() const {
  return static_cast<int>(std::count(active_.begin(), active_.end(), true));
}

std::string FeatureMask::to_string() const {
  std::string s(kFeatureCount, '0');
  for (int i = 0; i < kFeatureCount; ++i) {
    if (active_[static_cast<std::size_t>(i)]) s[static_cast<std::size_t>(i)] = '1';
  }
  return s;
}

FeatureMask FeatureMask::from_string(std::string_view bits) {
  if (bits.size() != static_cast<std::size_t>(kFeatureCount)) {
    throw Error(ErrorCategory::kSchemaMismatch, "feature mask must have 112 entries");
  }
  FeatureMask m;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != '0' && bits[i] != '1') {
      throw Error(ErrorCategory::kSchemaMismatch, "feature mask entries must be 0 or 1");
    }
    m.active_[i] = bits[i] == '1';
  }
  return m;
}

}  // namespace cablecal
