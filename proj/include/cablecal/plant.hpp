#pragma once

#include <array>
#include <cstdint>

#include "cablecal/kinematics.hpp"
#include "cablecal/rng.hpp"
#include "cablecal/types.hpp"

namespace cablecal {

inline constexpr double kGravity = 9.81;  // m/s^2

/// Standard five-parameter Bouc-Wen rate law
///   dz/dt = A*du - beta*|du|*z*|z|^(n-1) - gamma*du*|z|^n
/// with `alpha` scaling the hysteretic deflection seen at the joint.
struct BoucWenParams {
  double a = 1.0;
  double beta = 0.5;
  double gamma = 0.5;
  double n = 1.0;
  double alpha = 0.0;

  /// Bound on |z| reached under sustained monotone input.
  double z_max() const;

  bool operator==(const BoucWenParams&) const = default;
};

/// Right-hand side of the Bouc-Wen rate law for input rate `du`.
double bouc_wen_rate(const BoucWenParams& p, double z, double du);

/// Advances z over `dt` with constant input rate using classical RK4.
double bouc_wen_advance(const BoucWenParams& p, double z, double du, double dt);

/// Parameters of the synthetic cable-driven plant. Per-joint arrays cover the
/// three active joints; index 2 is the insertion joint (m, N).
struct PlantParams {
  /// joint = coupling * motor over the active block. Motor poses are in motor
  /// radians; the diagonal holds inverse transmission ratios.
  Mat3 coupling = Mat3::Identity();

  // Transmission error terms (joint units).
  Vec3 bias = Vec3::Zero();
  Vec3 runout_amplitude = Vec3::Zero();  // capstan runout, periodic in joint pose
  Vec3 runout_period = Vec3::Ones();
  Vec3 runout_phase = Vec3::Zero();
  Vec3 compliance = Vec3::Zero();       // per unit cable tension
  Vec3 backlash = Vec3::Zero();         // half-width of the dead zone
  Vec3 backlash_tension = Vec3::Ones(); // tension scale of the sign transition
  std::array<BoucWenParams, 3> hysteresis{};
  Vec3 hysteretic_friction = Vec3::Zero();  // joint torque/force per unit z
  /// Insertion error per unit joint-2 hysteresis state (joint-3 cable is
  /// routed over the joint-2 idlers).
  double coupled_hysteresis = 0.0;
  /// Unobservable joint-side disturbance (cable vibration, pulley slip):
  /// first-order Gauss-Markov process per joint.
  Vec3 disturbance_sigma = Vec3::Zero();
  double disturbance_time = 1.0;  // s, correlation time
  /// Slow drift of the cable friction (lubrication, temperature): sigma of the
  /// log friction scale, Gauss-Markov with the given correlation time.
  Vec3 friction_variation = Vec3::Zero();
  double friction_variation_time = 2.0;  // s

  // Servo and motor.
  Vec3 kp = Vec3::Ones();
  Vec3 kd = Vec3::Zero();
  Vec3 motor_inertia = Vec3::Ones();
  Vec3 motor_damping = Vec3::Zero();
  Vec3 torque_constant = Vec3::Ones();   // N*m per A
  double velocity_filter = 0.0;          // s, first-order estimator time constant

  // Gravity.
  Vec3 gravity_direction = Vec3::UnitX();  // base frame
  double arm_mass = 0.0;                   // kg, lumped at com_offset along insertion
  double com_offset = 0.0;                 // m
  Vec3 gravity_coefficient = Vec3::Ones(); // residual after counterbalance

  // Sensing.
  Vec3 motor_counts_per_rad = Vec3::Constant(4000.0);
  double ground_truth_rev_counts = 80000.0;  // joints 1, 2
  double ground_truth_linear_step = 5e-6;    // m, joint 3
  double torque_full_scale = 1.0;            // N*m, motor side
  double torque_noise = 0.0;                 // sigma as a fraction of full scale
  double motor_pose_4_scatter = 0.0;         // sigma of the void channel

  // Homing register rebase (counts).
  double first_homing_shift = 0.0;
  double later_homing_shift = 0.0;
  double first_homing_void_jump = 0.0;
  double later_homing_void_jump = 0.0;

  double control_rate = 1000.0;  // Hz

  /// The documented reference plant.
  static PlantParams reference();

  /// Checks the structural invariants (invertible, diagonally dominant
  /// coupling; compliance and backlash increasing with free cable length;
  /// valid Bouc-Wen parameters). Throws Error(kInvalidArgument).
  void validate() const;

  Mat3 coupling_inverse() const { return coupling.inverse(); }

  bool operator==(const PlantParams&) const = default;
};

/// Hidden state of the plant.
struct PlantState {
  double time = 0.0;
  Vec3 motor = Vec3::Zero();           // motor rad
  Vec3 motor_velocity = Vec3::Zero();
  Vec3 motor_velocity_estimate = Vec3::Zero();
  Vec3 reported_motor_prev = Vec3::Zero();
  Vec3 hysteresis = Vec3::Zero();      // Bouc-Wen internal states
  Vec3 disturbance = Vec3::Zero();
  Vec3 friction_drift = Vec3::Zero();  // log friction scale
  Vec3 joint_true = Vec3::Zero();
  Vec3 transmission_error = Vec3::Zero();  // joint_true - coupling * motor
  Vec3 cable_tension = Vec3::Zero();       // joint-side load
  Vec3 torque_command = Vec3::Zero();      // motor side, N*m
  Vec3 torque_measured = Vec3::Zero();
  Vec3 desired_motor = Vec3::Zero();
  Vec3 desired_motor_prev = Vec3::Zero();
  Vec3 desired_joint = Vec3::Zero();

  std::array<std::int64_t, kNumJoints> encoder_zero{};
  std::array<std::int64_t, kNumJoints> homed_zero{};  // reference found by the first homing
  double motor_pose_4 = 0.0;  // void channel register
  double motor_pose_4_reading = 0.0;
  int homing_count = 0;
  double load_mass = 0.0;
  bool stepped = false;
  Rng rng;

  /// Raw encoder registers (counts).
  std::array<std::int64_t, kNumJoints> encoder_registers(const PlantParams& params) const;
  /// Offsets registered at the last homing; registers - offsets tracks the motor.
  std::array<std::int64_t, kNumJoints> encoder_offsets() const { return encoder_zero; }
  /// Motor pose recovered from the encoder (quantized).
  Vec3 reported_motor(const PlantParams& params) const;
  /// Joint pose quantized to the external encoder resolution.
  Vec3 ground_truth(const PlantParams& params) const;
};

/// Plant at rest at the given joint pose, servo converged and hysteresis
/// relaxed.
PlantState make_plant(const PlantParams& params, const KinematicParams& kin,
                      const Vec3& joint_pose, std::uint64_t seed);

/// Advances one control tick toward `desired_joint` (active joints only).
/// Throws Error(kNonFiniteState) when the integration diverges.
void step(PlantState& state, const PlantParams& params, const KinematicParams& kin,
          const Vec3& desired_joint, double dt);

/// Rebases encoder registers and the void motor-pose-4 register.
void home(PlantState& state, const PlantParams& params);

/// Attaches a point mass at the tool tip. Throws Error(kNegativeMass).
void set_load(PlantState& state, double mass);

/// Joint-side gravity and payload torques at joint pose q.
Vec3 gravity_torque(const PlantParams& params, const KinematicParams& kin, const Vec3& q,
                    double load_mass);

/// Quantizes joint pose to the external encoder resolution.
Vec3 quantize_ground_truth(const PlantParams& params, const Vec3& q);

JointVector to_joint_vector(const Vec3& active);

}  // namespace cablecal
