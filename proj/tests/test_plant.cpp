#include <doctest.h>

#include <cmath>

#include "cablecal/error.hpp"
#include "cablecal/plant.hpp"
#include "cablecal/trajectories.hpp"
#include "cablecal/workbench.hpp"

using namespace cablecal;

namespace {

constexpr double kDt = 1e-3;

PlantParams quiet() {
  PlantParams p = PlantParams::reference();
  p.torque_noise = 0.0;
  p.motor_pose_4_scatter = 0.0;
  p.disturbance_sigma = Vec3::Zero();
  p.friction_variation = Vec3::Zero();
  return p;
}

const Vec3 kMid(40 * kDegToRad, 80 * kDegToRad, 0.375);

void hold(PlantState& s, const PlantParams& p, const KinematicParams& k, const Vec3& q, int ticks) {
  for (int i = 0; i < ticks; ++i) step(s, p, k, q, kDt);
}

// Steady-state transmission error after sweeping joint `j` into `q` from the
// given side.
Vec3 error_after_sweep(const PlantParams& p, int j, double from_offset) {
  const auto kin = KinematicParams::reference();
  Vec3 start = kMid;
  start[j] += from_offset;
  PlantState s = make_plant(p, kin, start, 1);
  SetpointStream path;
  append_move(path, start, j, kMid[j], std::abs(from_offset) / 2.0, std::abs(from_offset) * 4, 1000.0);
  for (const auto& q : path) step(s, p, kin, q, kDt);
  hold(s, p, kin, kMid, 500);
  return s.transmission_error;
}

}  // namespace

TEST_SUITE("plant") {
  TEST_CASE("reference parameters satisfy the structural invariants") {
    const PlantParams p = PlantParams::reference();
    CHECK_NOTHROW(p.validate());
    CHECK(std::abs(p.coupling.determinant()) > 0);
    for (const auto& h : p.hysteresis) {
      CHECK(h.n >= 1.0);
      CHECK(h.a > 0.0);
      CHECK(h.alpha > 0.0);
    }
  }

  TEST_CASE("validation rejects broken plants") {
    PlantParams p = PlantParams::reference();
    p.coupling(0, 1) = 5.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = PlantParams::reference();
    p.compliance[2] = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = PlantParams::reference();
    p.backlash[0] = p.backlash[1];
    CHECK_THROWS_AS(p.validate(), Error);
    p = PlantParams::reference();
    p.hysteresis[1].n = 0.5;
    CHECK_THROWS_AS(p.validate(), Error);
  }

  TEST_CASE("equilibrium: a converged plant at rest stays put") {
    const PlantParams p = quiet();
    const auto kin = KinematicParams::reference();
    PlantState s = make_plant(p, kin, kMid, 3);
    hold(s, p, kin, kMid, 2000);
    const PlantState before = s;
    hold(s, p, kin, kMid, 1000);
    CHECK((s.joint_true - before.joint_true).norm() < 1e-10);
    CHECK((s.hysteresis - before.hysteresis).norm() < 1e-10);
    CHECK((s.motor - before.motor).norm() < 1e-10);
    CHECK(s.motor_velocity.norm() < 1e-8);
    // Only the gravity-holding torque remains.
    const Vec3 holding = p.coupling.transpose() * s.cable_tension;
    CHECK((s.torque_command - holding).norm() < 1e-8);
    // Energy sanity: the tick-to-tick change vanishes.
    PlantState next = s;
    step(next, p, kin, kMid, kDt);
    CHECK((next.motor - s.motor).norm() < 1e-12);
    CHECK((next.joint_true - s.joint_true).norm() < 1e-12);
  }

  TEST_CASE("joint-2 hysteresis follows a standalone Bouc-Wen integration") {
    PlantParams p = quiet();
    const auto kin = KinematicParams::reference();
    PlantState s = make_plant(p, kin, kMid, 4);
    const BoucWenParams bw = p.hysteresis[1];
    double z_ref = s.hysteresis[1];

    SetpointStream sweep;
    Vec3 lo = kMid, hi = kMid;
    lo[1] -= 10 * kDegToRad;
    hi[1] += 10 * kDegToRad;
    append_move(sweep, kMid, 1, hi[1], 5 * kDegToRad, 50 * kDegToRad, 1000.0);
    append_move(sweep, hi, 1, lo[1], 5 * kDegToRad, 50 * kDegToRad, 1000.0);
    append_move(sweep, lo, 1, hi[1], 5 * kDegToRad, 50 * kDegToRad, 1000.0);

    double worst = 0.0, z_peak = 0.0;
    double up_error = 0, down_error = 0;
    bool crossed_up = false, crossed_down = false;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      const double q_prev = (p.coupling * s.motor)[1];
      step(s, p, kin, sweep[i], kDt);
      const double du = (p.coupling * s.motor)[1] - q_prev;
      // Forward Euler on 20 substeps; independent of the plant's RK4.
      for (int k = 0; k < 20; ++k) z_ref += bouc_wen_rate(bw, z_ref, du / kDt) * kDt / 20;
      worst = std::max(worst, std::abs(z_ref - s.hysteresis[1]));
      z_peak = std::max(z_peak, std::abs(s.hysteresis[1]));
      const double q_nom = (p.coupling * s.motor)[1];
      const double dq = sweep[i][1] - (i > 0 ? sweep[i - 1][1] : sweep[i][1]);
      if (i > sweep.size() / 3 && dq < 0 && !crossed_down && q_nom < kMid[1]) {
        down_error = s.transmission_error[1];
        crossed_down = true;
      }
      if (crossed_down && dq > 0 && !crossed_up && q_nom > kMid[1]) {
        up_error = s.transmission_error[1];
        crossed_up = true;
      }
    }
    REQUIRE(crossed_up);
    REQUIRE(crossed_down);
    CHECK(worst < 1e-3);
    CHECK(z_peak <= bw.z_max() + 1e-9);
    // Half the separation of the two branches at mid stroke.
    const double half_width = std::abs(up_error - down_error) / 2;
    CHECK(half_width >= p.backlash[1]);
    CHECK(half_width <= p.backlash[1] + 2 * bw.alpha * bw.z_max());
  }

  TEST_CASE("Bouc-Wen state stays bounded under sustained motion") {
    BoucWenParams b;
    b.a = 40;
    b.beta = 20;
    b.gamma = 20;
    b.alpha = 1e-3;
    double z = 0;
    for (int i = 0; i < 20000; ++i) {
      z = bouc_wen_advance(b, z, (i / 5000) % 2 ? -0.3 : 0.3, 1e-3);
      CHECK(std::abs(z) <= b.z_max() + 1e-12);
    }
    CHECK(b.z_max() == doctest::Approx(1.0));
  }

  TEST_CASE("payload stretches the insertion cable by load * c3 * projection") {
    const PlantParams p = quiet();
    const auto kin = KinematicParams::reference();
    PlantState unloaded = make_plant(p, kin, kMid, 9);
    PlantState loaded = unloaded;
    set_load(loaded, 0.5);
    hold(unloaded, p, kin, kMid, 1500);
    hold(loaded, p, kin, kMid, 1500);
    const double projection = std::abs(p.gravity_direction.dot(insertion_axis(kin, to_joint_vector(kMid))));
    const double expected = 0.5 * kGravity * p.compliance[2] * projection;
    const double shift = std::abs(loaded.transmission_error[2] - unloaded.transmission_error[2]);
    CHECK(shift == doctest::Approx(expected).epsilon(0.02));
    CHECK((loaded.cable_tension - unloaded.cable_tension).norm() > 0);
  }

  TEST_CASE("payload joint torques follow J^T at two poses") {
    const PlantParams p = quiet();
    const auto kin = KinematicParams::reference();
    const Vec3 g = kGravity * p.gravity_direction;
    for (const Vec3& q : {kMid, Vec3(25 * kDegToRad, 100 * kDegToRad, 0.34)}) {
      const Vec3 with = gravity_torque(p, kin, q, 0.5);
      const Vec3 without = gravity_torque(p, kin, q, 0.0);
      const Jacobian j = jacobian(kin, to_joint_vector(q));
      const Vec3 hand = -(j.block<3, 3>(0, 0).transpose() * (0.5 * g));
      CHECK((with - without - hand).norm() < 1e-12);
    }
    const double a = (gravity_torque(p, kin, kMid, 0.5) - gravity_torque(p, kin, kMid, 0))[1];
    const double b = (gravity_torque(p, kin, Vec3(25 * kDegToRad, 100 * kDegToRad, 0.34), 0.5) -
                      gravity_torque(p, kin, Vec3(25 * kDegToRad, 100 * kDegToRad, 0.34), 0))[1];
    CHECK(std::abs(a - b) > 1e-3);
  }

  TEST_CASE("load handling") {
    const PlantParams p = PlantParams::reference();
    const auto kin = KinematicParams::reference();
    PlantState s = make_plant(p, kin, kMid, 2);
    CHECK_THROWS_AS(set_load(s, -0.1), Error);
    try {
      set_load(s, -1);
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::kNegativeMass);
    }
    // Zero mass reproduces the unloaded run bit for bit.
    PlantState a = make_plant(p, kin, kMid, 2), b = make_plant(p, kin, kMid, 2);
    set_load(b, 0.0);
    SetpointStream path;
    append_move(path, kMid, 0, kMid[0] + 0.2, 0.2, 1.0, 1000.0);
    for (const auto& q : path) {
      step(a, p, kin, q, kDt);
      step(b, p, kin, q, kDt);
    }
    CHECK(a.joint_true == b.joint_true);
    CHECK(a.torque_measured == b.torque_measured);
  }

  TEST_CASE("homing rebases registers and keeps poses") {
    const PlantParams p = PlantParams::reference();
    const auto kin = KinematicParams::reference();
    PlantState s = make_plant(p, kin, kMid, 21);
    hold(s, p, kin, kMid, 100);
    auto delta = [&](const std::array<std::int64_t, kNumJoints>& a, const std::array<std::int64_t, kNumJoints>& b) {
      double sum = 0;
      for (int i = 0; i < kNumJoints; ++i) sum += std::abs(static_cast<double>(a[i] - b[i]));
      return sum;
    };
    const auto r0 = s.encoder_registers(p);
    const Vec3 motor0 = s.reported_motor(p), joint0 = s.joint_true;
    const double void0 = s.motor_pose_4;
    home(s, p);
    const auto r1 = s.encoder_registers(p);
    const double void1 = s.motor_pose_4;
    home(s, p);
    const auto r2 = s.encoder_registers(p);
    CHECK(delta(r2, r1) <= 0.05 * delta(r1, r0));
    CHECK(std::abs(s.motor_pose_4 - void1) <= 0.05 * std::abs(void1 - void0));
    CHECK(s.homing_count == 2);
    // Compensated registers and poses are unchanged.
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs((r2[i] - s.encoder_offsets()[i]) - std::llround(motor0[i] * p.motor_counts_per_rad[i])) <= 1);
    }
    CHECK((s.reported_motor(p) - motor0).norm() < 1e-12);
    CHECK((s.joint_true - joint0).norm() < 1e-12);
  }

  TEST_CASE("encoder registers track the motor at every tick") {
    const PlantParams p = PlantParams::reference();
    const auto kin = KinematicParams::reference();
    PlantState s = make_plant(p, kin, kMid, 8);
    SetpointStream path;
    append_move(path, kMid, 2, 0.4, 0.01, 0.05, 1000.0);
    for (const auto& q : path) {
      step(s, p, kin, q, kDt);
      const auto reg = s.encoder_registers(p);
      for (int i = 0; i < 3; ++i) {
        const double counts = static_cast<double>(reg[i] - s.encoder_offsets()[i]);
        CHECK(std::abs(counts - s.motor[i] * p.motor_counts_per_rad[i]) <= 0.5 + 1e-9);
      }
    }
  }

  TEST_CASE("direction reversal moves the error by at least twice the backlash") {
    // Joints 1 and 2: cable tension reverses with the direction of motion.
    const PlantParams p = quiet();
    for (int j : {0, 1}) {
      const Vec3 from_below = error_after_sweep(p, j, -8 * kDegToRad);
      const Vec3 from_above = error_after_sweep(p, j, 8 * kDegToRad);
      CHECK(std::abs(from_below[j] - from_above[j]) >= 2 * p.backlash[j]);
    }
    // Joint 3: the gravity preload keeps the insertion cable on one side of
    // the dead zone, so only the hysteresis separates the branches.
    const Vec3 below = error_after_sweep(p, 2, -0.01);
    const Vec3 above = error_after_sweep(p, 2, 0.01);
    CHECK(std::abs(below[2] - above[2]) > 0.0);
    CHECK(std::abs(below[2] - above[2]) <= 2 * (p.hysteresis[2].alpha * p.hysteresis[2].z_max() +
                                               p.compliance[2] * p.hysteretic_friction[2]) + 1e-9);
  }

  TEST_CASE("uncalibrated error exceeds the bias-removed residual by 1.5x") {
    const PlantParams p = PlantParams::reference();
    const auto kin = KinematicParams::reference();
    TrajectorySpec spec;
    spec.kind = TrajectoryKind::kRandomSinusoid;
    spec.duration = 300;
    spec.seed = 77;
    spec.velocity_min = Vec3(2 * kDegToRad, 2 * kDegToRad, 0.002);
    spec.velocity_max = Vec3(10 * kDegToRad, 10 * kDegToRad, 0.01);
    const SetpointStream path = random_sinusoid(spec);
    PlantState s = make_plant(p, kin, path.front(), 5);
    Vec3 sum = Vec3::Zero(), sq = Vec3::Zero();
    for (std::size_t i = 0; i < path.size(); ++i) {
      step(s, p, kin, path[i], kDt);
      sum += s.transmission_error;
      sq += s.transmission_error.cwiseProduct(s.transmission_error);
    }
    const double n = static_cast<double>(path.size());
    const Vec3 mean = sum / n;
    for (int j = 0; j < 3; ++j) {
      const double before = std::sqrt(sq[j] / n);
      const double residual = std::sqrt(sq[j] / n - mean[j] * mean[j]);
      CHECK(before / residual >= 1.5);
    }
  }

  TEST_CASE("unstable gains are reported as non-finite state") {
    PlantParams p = quiet();
    p.kp = Vec3::Constant(1e9);
    p.kd = Vec3::Zero();
    const auto kin = KinematicParams::reference();
    bool thrown = false;
    try {
      PlantState s = make_plant(p, kin, kMid, 1);
      hold(s, p, kin, kMid + Vec3(0.01, 0, 0), 5000);
    } catch (const Error& e) {
      thrown = e.category() == ErrorCategory::kNonFiniteState;
    }
    CHECK(thrown);
  }

  TEST_CASE("ground truth is quantized to the external encoders") {
    const PlantParams p = PlantParams::reference();
    const Vec3 q = quantize_ground_truth(p, Vec3(0.123456789, 1.3, 0.3712345));
    const double step_rev = 2 * kPi / 80000;
    CHECK(std::abs(q[0] / step_rev - std::round(q[0] / step_rev)) < 1e-6);
    CHECK(std::abs(q[2] / 5e-6 - std::round(q[2] / 5e-6)) < 1e-6);
    CHECK(std::abs(q[0] - 0.123456789) <= step_rev / 2);
  }
}
