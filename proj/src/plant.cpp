#include "cablecal/plant.hpp"

#include <cmath>
#include <string>

#include "cablecal/error.hpp"

namespace cablecal {

namespace {

Vec3 transmission_error(const PlantParams& p, const Vec3& q_nominal, const Vec3& z,
                        const Vec3& tension) {
  Vec3 err;
  for (int i = 0; i < kActiveJoints; ++i) {
    const double runout =
        p.runout_amplitude[i] *
        std::sin(2.0 * kPi * q_nominal[i] / p.runout_period[i] + p.runout_phase[i]);
    err[i] = p.bias[i] + runout - p.hysteresis[i].alpha * z[i] -
             p.backlash[i] * std::tanh(tension[i] / p.backlash_tension[i]) -
             p.compliance[i] * tension[i];
  }
  err[2] -= p.coupled_hysteresis * z[1];
  return err;
}

Vec3 cable_tension(const PlantParams& p, const KinematicParams& kin, const Vec3& q_nominal,
                   const Vec3& z, const Vec3& friction_drift, double load_mass) {
  const Vec3 friction = p.hysteretic_friction.cwiseProduct(friction_drift.array().exp().matrix());
  return gravity_torque(p, kin, q_nominal, load_mass) + friction.cwiseProduct(z);
}

void gauss_markov(Vec3& x, const Vec3& sigma, double tau, double dt, Rng& rng) {
  if (!(sigma.array() > 0.0).any()) return;
  const double decay = std::exp(-dt / tau);
  const double drive = std::sqrt(1.0 - decay * decay);
  for (int i = 0; i < kActiveJoints; ++i) x[i] = decay * x[i] + drive * sigma[i] * rng.normal();
}

void check_finite(const PlantState& s) {
  if (!s.motor.allFinite() || !s.motor_velocity.allFinite() || !s.hysteresis.allFinite() ||
      !s.joint_true.allFinite()) {
    throw Error(ErrorCategory::kNonFiniteState,
                "plant state became non-finite at t=" + std::to_string(s.time) +
                    " (unstable servo gains?)");
  }
}

}  // namespace

double BoucWenParams::z_max() const { return std::pow(a / (beta + gamma), 1.0 / n); }

double bouc_wen_rate(const BoucWenParams& p, double z, double du) {
  const double az = std::abs(z);
  const double zn = std::pow(az, p.n);
  const double zn1 = p.n == 1.0 ? 1.0 : std::pow(az, p.n - 1.0);
  return p.a * du - p.beta * std::abs(du) * z * zn1 - p.gamma * du * zn;
}

double bouc_wen_advance(const BoucWenParams& p, double z, double du, double dt) {
  const double k1 = bouc_wen_rate(p, z, du);
  const double k2 = bouc_wen_rate(p, z + 0.5 * dt * k1, du);
  const double k3 = bouc_wen_rate(p, z + 0.5 * dt * k2, du);
  const double k4 = bouc_wen_rate(p, z + dt * k3, du);
  return z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

PlantParams PlantParams::reference() {
  PlantParams p;
  // Transmission ratios 10:1, 10:1 and 500 rad/m; joint-3 cable passes over the
  // joint-2 pulleys, so motor 2 moves the insertion slightly.
  p.coupling << 0.1, 0.0, 0.0,  //
      0.0, 0.1, 0.0,            //
      0.0, 2.0e-4, 2.0e-3;

  p.bias = Vec3(1.5 * kDegToRad, 1.8 * kDegToRad, 3.5e-3);
  p.runout_amplitude = Vec3(1.0 * kDegToRad, 1.0 * kDegToRad, 0.05e-3);
  p.runout_period = Vec3(80.0 * kDegToRad, 110.0 * kDegToRad, 0.03);
  p.runout_phase = Vec3(0.3, 1.1, 0.0);
  p.compliance = Vec3(2.0e-5, 1.0e-4, 2.0e-4);
  p.backlash = Vec3(0.03 * kDegToRad, 0.25 * kDegToRad, 0.1e-3);
  p.backlash_tension = Vec3(0.2, 0.2, 0.2);

  auto bw = [](double transition, double alpha) {
    BoucWenParams b;
    b.a = 1.0 / transition;
    b.beta = 0.5 * b.a;
    b.gamma = 0.5 * b.a;
    b.n = 1.0;
    b.alpha = alpha;
    return b;
  };
  p.hysteresis = {bw(0.5 * kDegToRad, 0.05 * kDegToRad), bw(4.0 * kDegToRad, 0.4 * kDegToRad),
                  bw(1.0e-3, 0.02e-3)};
  p.hysteretic_friction = Vec3(0.5, 3.0, 0.1);
  // The insertion cable rides on the joint-2 pulleys and drags with their friction.
  p.coupled_hysteresis = 4.5e-3;
  p.friction_variation = Vec3(0.4, 0.5, 0.4);
  p.friction_variation_time = 2.0;
  p.disturbance_sigma = Vec3(0.06 * kDegToRad, 0.05 * kDegToRad, 0.02e-3);
  p.disturbance_time = 0.5;

  p.motor_inertia = Vec3::Constant(1.0e-3);
  const double omega = 150.0;  // critically damped servo, settles in ~30 ms
  p.kp = Vec3::Constant(1.0e-3 * omega * omega);
  p.kd = Vec3::Constant(2.0 * 1.0e-3 * omega);
  p.motor_damping = Vec3::Zero();
  p.torque_constant = Vec3::Constant(0.05);
  p.velocity_filter = 0.01;

  p.gravity_direction = Vec3::UnitX();
  p.arm_mass = 1.0;
  p.com_offset = 0.15;
  p.gravity_coefficient = Vec3(0.3, 0.1, 1.0);

  p.motor_counts_per_rad = Vec3::Constant(16384.0 / (2.0 * kPi));
  p.torque_full_scale = 5.0;
  p.torque_noise = 0.02;
  p.motor_pose_4_scatter = 1.0e-4;

  p.first_homing_shift = 1.0e4;
  p.later_homing_shift = 100.0;
  p.first_homing_void_jump = 3.0;
  p.later_homing_void_jump = 0.05;
  return p;
}

void PlantParams::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCategory::kInvalidArgument, "plant: " + what);
  };
  if (std::abs(coupling.determinant()) < 1e-12) fail("coupling matrix is singular");
  for (int r = 0; r < 3; ++r) {
    double off = 0.0;
    for (int c = 0; c < 3; ++c) off += c == r ? 0.0 : std::abs(coupling(r, c));
    if (!(std::abs(coupling(r, r)) > off)) fail("coupling matrix is not diagonally dominant");
  }
  // Compare compliance and backlash on the motor side, where the three joints
  // share units (rad, rad/(N*m)).
  Vec3 ratio;
  for (int i = 0; i < 3; ++i) ratio[i] = 1.0 / coupling(i, i);
  for (int i = 0; i + 1 < 3; ++i) {
    if (!(compliance[i] * ratio[i] * ratio[i] < compliance[i + 1] * ratio[i + 1] * ratio[i + 1])) {
      fail("compliance must grow with free cable length (joint 1 < 2 < 3)");
    }
    if (!(backlash[i] * ratio[i] < backlash[i + 1] * ratio[i + 1])) {
      fail("backlash must grow with free cable length (joint 1 < 2 < 3)");
    }
  }
  for (const auto& h : hysteresis) {
    if (!(h.n >= 1.0) || !(h.a > 0.0) || !(h.alpha > 0.0) || !(h.beta + h.gamma > 0.0)) {
      fail("Bouc-Wen parameters need n >= 1, A > 0, alpha > 0, beta + gamma > 0");
    }
  }
  if (!(control_rate > 0.0)) fail("control rate must be positive");
  if ((disturbance_sigma.array() < 0.0).any() || !(disturbance_time > 0.0)) {
    fail("disturbance sigma must be non-negative and its correlation time positive");
  }
  if ((friction_variation.array() < 0.0).any() || !(friction_variation_time > 0.0)) {
    fail("friction variation must be non-negative and its correlation time positive");
  }
  if ((kp.array() <= 0.0).any() || (motor_inertia.array() <= 0.0).any()) {
    fail("servo gains and motor inertia must be positive");
  }
}

std::array<std::int64_t, kNumJoints> PlantState::encoder_registers(
    const PlantParams& params) const {
  auto regs = encoder_zero;
  for (int i = 0; i < kActiveJoints; ++i) {
    regs[i] += static_cast<std::int64_t>(std::llround(motor[i] * params.motor_counts_per_rad[i]));
  }
  return regs;
}

Vec3 PlantState::reported_motor(const PlantParams& params) const {
  const auto regs = encoder_registers(params);
  Vec3 m;
  for (int i = 0; i < kActiveJoints; ++i) {
    m[i] = static_cast<double>(regs[i] - encoder_zero[i]) / params.motor_counts_per_rad[i];
  }
  return m;
}

Vec3 quantize_ground_truth(const PlantParams& params, const Vec3& q) {
  const double step_rev = 2.0 * kPi / params.ground_truth_rev_counts;
  return Vec3(std::round(q[0] / step_rev) * step_rev, std::round(q[1] / step_rev) * step_rev,
              std::round(q[2] / params.ground_truth_linear_step) *
                  params.ground_truth_linear_step);
}

Vec3 PlantState::ground_truth(const PlantParams& params) const {
  return quantize_ground_truth(params, joint_true);
}

JointVector to_joint_vector(const Vec3& active) {
  JointVector q = JointVector::Zero();
  q.head<3>() = active;
  return q;
}

Vec3 gravity_torque(const PlantParams& params, const KinematicParams& kin, const Vec3& q,
                    double load_mass) {
  const Vec3 g = kGravity * params.gravity_direction;
  // Arm: lumped mass at a fixed distance along the insertion axis.
  KinematicParams at_com = kin;
  at_com.tool_offset = Vec3::Zero();
  JointVector q_com = to_joint_vector(q);
  q_com[2] = params.com_offset;
  const Jacobian j_com = jacobian(at_com, q_com);
  Vec3 arm = -(j_com.block<3, 3>(0, 0).transpose() * (params.arm_mass * g));
  // The tool slides with joint 3, so its weight acts along the insertion axis
  // regardless of the lumped position.
  arm[2] = -params.arm_mass * g.dot(j_com.block<3, 1>(0, 2));
  arm = arm.cwiseProduct(params.gravity_coefficient);

  const Jacobian j_tip = jacobian(kin, to_joint_vector(q));
  const Vec3 payload = -(j_tip.block<3, 3>(0, 0).transpose() * (load_mass * g));
  return arm + payload;
}

PlantState make_plant(const PlantParams& params, const KinematicParams& kin,
                      const Vec3& joint_pose, std::uint64_t seed) {
  PlantState s;
  s.rng = Rng(seed);
  const Mat3 cinv = params.coupling_inverse();
  s.motor = cinv * joint_pose;
  s.desired_joint = joint_pose;
  s.desired_motor = s.motor;
  s.desired_motor_prev = s.motor;
  // Registers as left by the power-on homing.
  for (int i = 0; i < kNumJoints; ++i) {
    s.encoder_zero[i] = static_cast<std::int64_t>(s.rng.below(200000)) - 100000;
  }
  s.motor_pose_4 = 0.0;
  s.reported_motor_prev = s.reported_motor(params);
  s.cable_tension = cable_tension(params, kin, joint_pose, s.hysteresis, s.friction_drift, 0.0);
  s.joint_true = joint_pose + transmission_error(params, joint_pose, s.hysteresis, s.cable_tension);
  s.transmission_error = s.joint_true - params.coupling * s.motor;

  // Let the servo pick up the static load.
  const double dt = 1.0 / params.control_rate;
  for (int k = 0; k < static_cast<int>(0.5 * params.control_rate); ++k) {
    step(s, params, kin, joint_pose, dt);
  }
  s.time = 0.0;
  return s;
}

void step(PlantState& s, const PlantParams& p, const KinematicParams& kin,
          const Vec3& desired_joint, double dt) {
  const Mat3& c = p.coupling;
  const Mat3 cinv = p.coupling_inverse();

  s.desired_joint = desired_joint;
  s.desired_motor_prev = s.stepped ? s.desired_motor : cinv * desired_joint;
  s.desired_motor = cinv * desired_joint;
  const Vec3 desired_rate = (s.desired_motor - s.desired_motor_prev) / dt;

  // PD servo on the motor.
  const Vec3 e = s.desired_motor - s.motor;
  const Vec3 de = desired_rate - s.motor_velocity;
  s.torque_command = p.kp.cwiseProduct(e) + p.kd.cwiseProduct(de);

  // Motor under servo torque and the load reflected through the cables.
  const Vec3 q_nominal = c * s.motor;
  const Vec3 tension = cable_tension(p, kin, q_nominal, s.hysteresis, s.friction_drift, s.load_mass);
  const Vec3 reflected = c.transpose() * tension;
  const Vec3 accel = (s.torque_command - reflected - p.motor_damping.cwiseProduct(s.motor_velocity))
                         .cwiseQuotient(p.motor_inertia);
  s.motor_velocity += accel * dt;
  s.motor += s.motor_velocity * dt;

  const Vec3 du = c * s.motor_velocity;
  for (int i = 0; i < kActiveJoints; ++i) {
    s.hysteresis[i] = bouc_wen_advance(p.hysteresis[i], s.hysteresis[i], du[i], dt);
  }

  gauss_markov(s.disturbance, p.disturbance_sigma, p.disturbance_time, dt, s.rng);
  gauss_markov(s.friction_drift, p.friction_variation, p.friction_variation_time, dt, s.rng);

  const Vec3 q_now = c * s.motor;
  s.cable_tension = cable_tension(p, kin, q_now, s.hysteresis, s.friction_drift, s.load_mass);
  s.transmission_error = transmission_error(p, q_now, s.hysteresis, s.cable_tension) + s.disturbance;
  s.joint_true = q_now + s.transmission_error;

  for (int i = 0; i < kActiveJoints; ++i) {
    s.torque_measured[i] =
        s.torque_command[i] + s.rng.uniform_noise(p.torque_noise * p.torque_full_scale);
  }
  s.motor_pose_4_reading = s.motor_pose_4 + s.rng.uniform_noise(p.motor_pose_4_scatter);

  const Vec3 reported = s.reported_motor(p);
  const Vec3 raw_rate = (reported - s.reported_motor_prev) / dt;
  const double blend = p.velocity_filter > 0.0 ? dt / (p.velocity_filter + dt) : 1.0;
  s.motor_velocity_estimate += blend * (raw_rate - s.motor_velocity_estimate);
  s.reported_motor_prev = reported;

  s.time += dt;
  s.stepped = true;
  check_finite(s);
}

void home(PlantState& s, const PlantParams& p) {
  const bool first = s.homing_count == 0;
  const double shift = first ? p.first_homing_shift : p.later_homing_shift;
  // Later homings find the same hard-stop reference up to their repeatability,
  // so the offsets scatter around the first result instead of accumulating.
  for (int i = 0; i < kNumJoints; ++i) {
    const double sign = s.rng.uniform() < 0.5 ? -1.0 : 1.0;
    const auto delta = static_cast<std::int64_t>(std::llround(sign * s.rng.uniform(0.5, 1.0) * shift));
    s.encoder_zero[i] = (first ? s.encoder_zero[i] : s.homed_zero[i]) + delta;
    if (first) s.homed_zero[i] = s.encoder_zero[i];
  }
  const double jump = first ? p.first_homing_void_jump : p.later_homing_void_jump;
  const double sign = s.rng.uniform() < 0.5 ? -1.0 : 1.0;
  s.motor_pose_4 += sign * s.rng.uniform(0.5, 1.0) * jump;
  ++s.homing_count;
}

void set_load(PlantState& s, double mass) {
  if (!(mass >= 0.0)) {
    throw Error(ErrorCategory::kNegativeMass, "load mass must be non-negative");
  }
  s.load_mass = mass;
}

}  // namespace cablecal
