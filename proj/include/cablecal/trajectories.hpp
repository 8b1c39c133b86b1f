#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cablecal/types.hpp"

namespace cablecal {

enum class TrajectoryKind { kZigzag, kRandomSinusoid };

struct JointLimits {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const JointLimits&) const = default;
};

/// Soft workspace of the active joints (rad, rad, m).
std::array<JointLimits, 3> reference_limits();

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kZigzag;
  double sparsity = 0.5;                 // zig-zag only
  std::array<JointLimits, 3> limits = reference_limits();
  double duration = 60.0;                // s, random sinusoid only
  std::uint64_t seed = 0;
  Vec3 velocity_min = Vec3::Constant(0.0);
  Vec3 velocity_max = Vec3::Constant(1.0);
  Vec3 acceleration = Vec3::Constant(1.0);  // zig-zag ramps
  double rate = 1000.0;                     // Hz

  void validate() const;

  bool operator==(const TrajectorySpec&) const = default;
};

/// Setpoint stream sampled at `rate`.
using SetpointStream = std::vector<Vec3>;

/// Number of distinct levels a zig-zag visits on joints 2 and 3.
int zigzag_levels(double sparsity);

/// Lawnmower raster: joint 1 sweeps end to end without pausing, joint 2
/// advances one level at each joint-1 reversal, joint 3 advances one level each
/// time joint 2 finishes a pass. Steps of joints 2 and 3 run concurrently with
/// the next joint-1 sweep. All moves use trapezoidal velocity ramps. With a
/// positive velocity_min each move cruises at a speed drawn uniformly from the
/// bounds, otherwise at velocity_max.
/// Throws Error(kInvalidSparsity) for sparsity outside (0, 1].
SetpointStream zigzag(const TrajectorySpec& spec);

/// Independent per-joint half-cosine moves to random targets at random peak
/// velocities. Starts from the first drawn target.
SetpointStream random_sinusoid(const TrajectorySpec& spec);

SetpointStream generate(const TrajectorySpec& spec);

/// Synchronized trapezoidal move of all joints from `from` to `to`.
SetpointStream transition(const Vec3& from, const Vec3& to, const Vec3& velocity,
                          const Vec3& acceleration, double rate);

/// Appends a single-joint trapezoidal move; the last appended sample equals `to`.
void append_move(SetpointStream& out, Vec3 from, int joint, double to, double velocity,
                 double acceleration, double rate);

std::string describe(const TrajectorySpec& spec);

}  // namespace cablecal
