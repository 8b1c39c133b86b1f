#include "cablecal/workbench.hpp"

#include "cablecal/error.hpp"
#include "cablecal/rng.hpp"

namespace cablecal {

namespace {

Vec3 start_of(const SetpointStream& s) { return s.front(); }

void move_to(Recorder& rec, PlantState& plant, const DatasetProfile& profile, const Vec3& target) {
  const Vec3 from = plant.desired_joint;
  rec.run_silent(plant, transition(from, target, profile.train_velocity, profile.train_acceleration,
                                   rec.params().control_rate));
}

TrajectorySpec test_spec(const DatasetProfile& profile, double duration, std::uint64_t seed,
                         double rate) {
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kRandomSinusoid;
  spec.limits = profile.limits;
  spec.duration = duration;
  spec.seed = seed;
  spec.velocity_min = profile.test_velocity_min;
  spec.velocity_max = profile.test_velocity_max;
  spec.acceleration = profile.train_acceleration;
  spec.rate = rate;
  return spec;
}

struct Collection {
  Recorder recorder;
  PlantState plant;
  Session session;
};

Collection start_session(const PlantParams& params, const KinematicParams& kin, const DatasetProfile& profile,
                         double load_mass, std::uint64_t seed, const TrainingPlan& plan) {
  params.validate();
  kin.validate();
  profile.validate();
  Collection c{Recorder(params, kin), {}, {}};
  c.plant = make_plant(params, kin, start_of(plan.trajectories.front()), derive_seed(seed, "plant"));
  set_load(c.plant, load_mass);
  // Let the servo take up the payload before recording.
  c.recorder.run_silent(c.plant, SetpointStream(500, start_of(plan.trajectories.front())));
  for (Dataset* d : {&c.session.train, &c.session.test}) {
    d->meta.load_mass = load_mass;
    d->meta.seed = seed;
  }
  return c;
}

}  // namespace

DatasetProfile DatasetProfile::desk() {
  DatasetProfile p;
  p.train_velocity_min = Vec3(3.0 * kDegToRad, 3.0 * kDegToRad, 0.003);
  p.train_velocity = Vec3(15.0 * kDegToRad, 15.0 * kDegToRad, 0.015);
  p.train_acceleration = Vec3(50.0 * kDegToRad, 50.0 * kDegToRad, 0.05);
  p.test_duration = 1200.0;
  p.test_velocity_min = Vec3(2.0 * kDegToRad, 2.0 * kDegToRad, 0.002);
  p.test_velocity_max = Vec3(10.0 * kDegToRad, 10.0 * kDegToRad, 0.01);
  p.homing_segments = 6;
  p.homing_segment_duration = 120.0;
  return p;
}

DatasetProfile DatasetProfile::paper() {
  DatasetProfile p = desk();
  p.train_velocity_min *= 0.28;
  p.train_velocity *= 0.28;
  p.test_duration = 6.0 * 3600.0;
  p.test_velocity_min *= 0.28;
  p.test_velocity_max *= 0.28;
  p.homing_segment_duration = 600.0;
  return p;
}

void DatasetProfile::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCategory::kInvalidArgument, "profile: " + what); };
  if (sparsities.empty()) fail("no training sparsities");
  for (double s : sparsities) zigzag_levels(s);
  if ((train_velocity.array() <= 0.0).any() || (train_acceleration.array() <= 0.0).any() ||
      (train_velocity_min.array() < 0.0).any() || (train_velocity_min.array() > train_velocity.array()).any()) {
    fail("training velocity bounds and acceleration must be positive and ordered");
  }
  if (!(test_duration > 0.0) || !(homing_segment_duration > 0.0)) fail("durations must be positive");
  if (homing_segments < 2) fail("the homing study needs at least 2 segments");
  if (!(load_mass >= 0.0)) throw Error(ErrorCategory::kNegativeMass, "profile: load mass must be non-negative");
  for (const auto& l : limits) {
    if (!(l.lo < l.hi)) fail("joint limit lo >= hi");
  }
}

TrainingPlan training_plan(const DatasetProfile& profile, std::uint64_t seed) {
  TrainingPlan plan;
  for (double s : profile.sparsities) {
    TrajectorySpec spec;
    spec.kind = TrajectoryKind::kZigzag;
    spec.sparsity = s;
    spec.limits = profile.limits;
    spec.velocity_min = profile.train_velocity_min;
    spec.velocity_max = profile.train_velocity;
    spec.seed = derive_seed(seed, "train/" + std::to_string(plan.specs.size()));
    spec.acceleration = profile.train_acceleration;
    plan.trajectories.push_back(zigzag(spec));
    plan.specs.push_back(spec);
  }
  return plan;
}

std::size_t expected_training_pairs(const DatasetProfile& profile) {
  std::size_t ticks = 0;
  for (const auto& t : training_plan(profile, 0).trajectories) ticks += t.size();
  return (ticks + kDecimation - 1) / kDecimation;
}

Session generate_session(const PlantParams& params, const KinematicParams& kin, const DatasetProfile& profile,
                         double load_mass, std::uint64_t seed) {
  const TrainingPlan plan = training_plan(profile, seed);
  Collection c = start_session(params, kin, profile, load_mass, seed, plan);
  for (std::size_t i = 0; i < plan.trajectories.size(); ++i) {
    move_to(c.recorder, c.plant, profile, start_of(plan.trajectories[i]));
    c.recorder.run(c.plant, plan.trajectories[i], c.session.train, 0);
    c.session.train.meta.trajectories.push_back(describe(plan.specs[i]));
  }
  const TrajectorySpec spec =
      test_spec(profile, profile.test_duration, derive_seed(seed, "test"), params.control_rate);
  const SetpointStream test = random_sinusoid(spec);
  move_to(c.recorder, c.plant, profile, start_of(test));
  c.recorder.run(c.plant, test, c.session.test, 0);
  c.session.test.meta.trajectories.push_back(describe(spec));
  return c.session;
}

Session generate_homing_session(const PlantParams& params, const KinematicParams& kin,
                                const DatasetProfile& profile, bool homing_in_training, std::uint64_t seed) {
  const TrainingPlan plan = training_plan(profile, seed);
  Collection c = start_session(params, kin, profile, 0.0, seed, plan);
  for (std::size_t i = 0; i < plan.trajectories.size(); ++i) {
    if (homing_in_training && i > 0) home(c.plant, params);
    move_to(c.recorder, c.plant, profile, start_of(plan.trajectories[i]));
    c.recorder.run(c.plant, plan.trajectories[i], c.session.train, 0);
    c.session.train.meta.trajectories.push_back(describe(plan.specs[i]));
  }
  c.session.train.meta.homing_count = c.plant.homing_count;
  for (int k = 0; k < profile.homing_segments; ++k) {
    if (k > 0) home(c.plant, params);
    const TrajectorySpec spec = test_spec(profile, profile.homing_segment_duration,
                                          derive_seed(seed, "test/segment" + std::to_string(k)),
                                          params.control_rate);
    const SetpointStream test = random_sinusoid(spec);
    move_to(c.recorder, c.plant, profile, start_of(test));
    c.recorder.run(c.plant, test, c.session.test, k);
    c.session.test.meta.trajectories.push_back(describe(spec));
  }
  c.session.test.meta.homing_count = c.plant.homing_count;
  return c.session;
}

}  // namespace cablecal
