#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cablecal/kinematics.hpp"
#include "cablecal/plant.hpp"
#include "cablecal/statestream.hpp"
#include "cablecal/trajectories.hpp"

namespace cablecal {

/// Sizes and speeds of the data-collection protocol.
struct DatasetProfile {
  std::array<JointLimits, 3> limits = reference_limits();
  std::vector<double> sparsities{1.0 / 2, 1.0 / 3, 1.0 / 4, 1.0 / 5, 1.0 / 6};
  Vec3 train_velocity_min = Vec3::Zero();  // zig-zag cruise speed bounds
  Vec3 train_velocity = Vec3::Ones();
  Vec3 train_acceleration = Vec3::Ones();
  double test_duration = 60.0;             // s of random sinusoids
  Vec3 test_velocity_min = Vec3::Zero();
  Vec3 test_velocity_max = Vec3::Ones();
  double load_mass = 0.5;                  // kg, the loaded case
  int homing_segments = 6;                 // test segments of the homing study
  double homing_segment_duration = 60.0;   // s each

  /// Desk scale: about 20k training and 30k test pairs.
  static DatasetProfile desk();
  /// The original protocol size: about 68k training pairs.
  static DatasetProfile paper();

  void validate() const;
  bool operator==(const DatasetProfile&) const = default;
};

struct Session {
  Dataset train;
  Dataset test;
};

/// Zig-zag setpoints of every sparsity, joined by synchronized transitions.
/// The transitions are reported separately so they can be skipped.
struct TrainingPlan {
  std::vector<SetpointStream> trajectories;
  std::vector<TrajectorySpec> specs;
};
TrainingPlan training_plan(const DatasetProfile& profile, std::uint64_t seed);

/// Training pairs the profile yields at 25 Hz (for seed 0).
std::size_t expected_training_pairs(const DatasetProfile& profile);

/// One power-on session: the zig-zag training set followed by a random
/// sinusoid test set, both under `load_mass`.
Session generate_session(const PlantParams& plant, const KinematicParams& kin,
                         const DatasetProfile& profile, double load_mass, std::uint64_t seed);

/// Homing study session. The test set holds `homing_segments` sinusoid
/// segments with a re-homing before every segment but the first. With
/// `homing_in_training` the robot is also re-homed between training
/// trajectories.
Session generate_homing_session(const PlantParams& plant, const KinematicParams& kin,
                                const DatasetProfile& profile, bool homing_in_training,
                                std::uint64_t seed);

}  // namespace cablecal
