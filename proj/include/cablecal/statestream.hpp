#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cablecal/kinematics.hpp"
#include "cablecal/plant.hpp"
#include "cablecal/robot_state.hpp"
#include "cablecal/trajectories.hpp"

namespace cablecal {

/// Controller-side status channels. Constant pedal-down values while
/// recording.
struct OperatingStatus {
  double time_origin = 0.0;  // s, added to the plant clock
  double run_level = 3.0;
  double sub_level = 0.0;
  double last_sequence = 0.0;
  double arm_type = 0.0;
  double desired_grasper = 0.0;
};

/// Flattens the plant and controller state into one snapshot.
FeatureVector assemble(const PlantState& plant, const PlantParams& params,
                       const KinematicParams& kin, const OperatingStatus& status);

inline constexpr int kDecimation = 40;  // 1 kHz -> 25 Hz

/// Keeps every `factor`-th element starting with the first.
template <class T>
std::vector<T> downsample(const std::vector<T>& in, int factor = kDecimation) {
  std::vector<T> out;
  out.reserve(in.size() / static_cast<std::size_t>(factor) + 1);
  for (std::size_t i = 0; i < in.size(); i += static_cast<std::size_t>(factor)) out.push_back(in[i]);
  return out;
}

struct Record {
  FeatureVector features{};
  Vec3 ground_truth = Vec3::Zero();
  Vec3 target = Vec3::Zero();  // ground_truth - joint_pose[0..2]
  int segment = 0;
  int homing_count = 0;

  bool operator==(const Record&) const = default;
};

struct DatasetMeta {
  double load_mass = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> trajectories;
  int homing_count = 0;

  bool operator==(const DatasetMeta&) const = default;
};

struct Dataset {
  DatasetMeta meta;
  FeatureGroupRegistry groups = FeatureGroupRegistry::reference();
  std::vector<Record> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  bool operator==(const Dataset&) const = default;
};

/// Drives a plant through setpoint streams and records decimated snapshots.
/// The decimation phase runs across calls, so consecutive recordings on the
/// same plant stay on one 25 Hz grid.
class Recorder {
 public:
  Recorder(PlantParams params, KinematicParams kin, OperatingStatus status = {});

  /// Steps the plant through every setpoint; appends every 40th tick.
  void run(PlantState& plant, const SetpointStream& setpoints, Dataset& out, int segment);
  /// Steps without recording (moves between recordings).
  void run_silent(PlantState& plant, const SetpointStream& setpoints);

  Record snapshot(const PlantState& plant, int segment) const;

  const PlantParams& params() const { return params_; }
  const KinematicParams& kinematics() const { return kin_; }

 private:
  PlantParams params_;
  KinematicParams kin_;
  OperatingStatus status_;
  long tick_ = 0;
};

/// Versioned text format, see README. Throws Error(kIoError).
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
/// Throws Error(kIoError) or Error(kSchemaMismatch).
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace cablecal
