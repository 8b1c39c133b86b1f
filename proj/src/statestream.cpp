#include "cablecal/statestream.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cablecal/error.hpp"

namespace cablecal {

namespace {

constexpr std::string_view kMagic = "# cablecal-dataset v1";
constexpr int kBookkeeping = 2;  // segment, homing_count
constexpr int kColumns = kBookkeeping + kFeatureCount + 6;

void put(FeatureVector& f, int offset, const auto& values, int n) {
  for (int i = 0; i < n; ++i) f[static_cast<std::size_t>(offset + i)] = values[i];
}

void append_number(std::string& line, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  line.append(buf, res.ptr);
}

double parse_number(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCategory::kSchemaMismatch,
                "line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> column_names() {
  std::vector<std::string> names{"segment", "homing_count"};
  for (int i = 0; i < kFeatureCount; ++i) names.push_back(feature_name(i));
  for (const char* n : {"gt_q1", "gt_q2", "gt_q3", "target_q1", "target_q2", "target_q3"}) {
    names.emplace_back(n);
  }
  return names;
}

}  // namespace

FeatureVector assemble(const PlantState& s, const PlantParams& p, const KinematicParams& kin,
                       const OperatingStatus& status) {
  FeatureVector f{};
  f[layout::kTimeStamp] = status.time_origin + s.time;
  f[layout::kRunLevel] = status.run_level;
  f[layout::kSubLevel] = status.sub_level;
  f[layout::kLastSequence] = status.last_sequence;
  f[layout::kArmType] = status.arm_type;
  f[layout::kDesiredGrasper] = status.desired_grasper;

  const Mat3& c = p.coupling;
  const Vec3 motor = s.reported_motor(p);
  const Vec3 joint = c * motor;
  const Vec3 joint_velocity = c * s.motor_velocity_estimate;
  const JointVector q = to_joint_vector(joint);
  const JointVector q_desired = to_joint_vector(s.desired_joint);

  JointVector motor7 = to_joint_vector(motor);
  motor7[3] = s.motor_pose_4_reading;
  put(f, layout::kMotorPose, motor7, kNumJoints);
  put(f, layout::kMotorPoseDesired, to_joint_vector(s.desired_motor), kNumJoints);
  put(f, layout::kMotorVelocity, to_joint_vector(s.motor_velocity_estimate), kNumJoints);
  put(f, layout::kJointPose, q, kNumJoints);
  put(f, layout::kJointPoseDesired, q_desired, kNumJoints);
  put(f, layout::kJointVelocity, to_joint_vector(joint_velocity), kNumJoints);
  put(f, layout::kMotorCurrentCmd, to_joint_vector(s.torque_command.cwiseQuotient(p.torque_constant)),
      kNumJoints);
  put(f, layout::kMotorTorque, to_joint_vector(s.torque_measured), kNumJoints);

  const auto regs = s.encoder_registers(p);
  const auto offs = s.encoder_offsets();
  for (int i = 0; i < kNumJoints; ++i) {
    f[static_cast<std::size_t>(layout::kEncoderValue + i)] = static_cast<double>(regs[static_cast<std::size_t>(i)]);
    f[static_cast<std::size_t>(layout::kEncoderOffset + i)] = static_cast<double>(offs[static_cast<std::size_t>(i)]);
  }

  const Pose pose = forward_kinematics(kin, q);
  const Pose pose_desired = forward_kinematics(kin, q_desired);
  put(f, layout::kEePose, pose.position, 3);
  put(f, layout::kEePoseDesired, pose_desired.position, 3);
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 3; ++col) {
      f[static_cast<std::size_t>(layout::kEeOrient + 3 * r + col)] = pose.rotation(r, col);
      f[static_cast<std::size_t>(layout::kEeOrientDesired + 3 * r + col)] = pose_desired.rotation(r, col);
    }
  }

  const Jacobian j = jacobian(kin, q);
  JointVector qdot = to_joint_vector(joint_velocity);
  const Eigen::Matrix<double, 6, 1> twist = j * qdot;
  put(f, layout::kJacobianVelocity, twist, 6);
  // Joint torques from motor torques by virtual work, then the wrench that
  // would balance them: pinv(Ja^T) = Ja (Ja^T Ja)^-1.
  const Eigen::Matrix<double, 6, 3> ja = j.leftCols<3>();
  const Vec3 joint_torque = c.transpose().inverse() * s.torque_measured;
  const Eigen::Matrix<double, 6, 1> wrench = ja * (ja.transpose() * ja).ldlt().solve(joint_torque);
  put(f, layout::kJacobianForce, wrench, 6);
  return f;
}

Recorder::Recorder(PlantParams params, KinematicParams kin, OperatingStatus status)
    : params_(std::move(params)), kin_(std::move(kin)), status_(status) {}

Record Recorder::snapshot(const PlantState& plant, int segment) const {
  Record r;
  r.features = assemble(plant, params_, kin_, status_);
  r.ground_truth = plant.ground_truth(params_);
  const Vec3 joint(r.features[layout::kJointPose], r.features[layout::kJointPose + 1],
                   r.features[layout::kJointPose + 2]);
  r.target = r.ground_truth - joint;
  r.segment = segment;
  r.homing_count = plant.homing_count;
  return r;
}

void Recorder::run(PlantState& plant, const SetpointStream& setpoints, Dataset& out, int segment) {
  const double dt = 1.0 / params_.control_rate;
  for (const Vec3& q : setpoints) {
    step(plant, params_, kin_, q, dt);
    if (tick_ % kDecimation == 0) out.records.push_back(snapshot(plant, segment));
    ++tick_;
  }
}

void Recorder::run_silent(PlantState& plant, const SetpointStream& setpoints) {
  const double dt = 1.0 / params_.control_rate;
  for (const Vec3& q : setpoints) step(plant, params_, kin_, q, dt);
}

void write_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCategory::kIoError, "cannot write dataset: " + path.string());

  std::string line;
  line.append(kMagic).append("\n# load_mass ");
  append_number(line, d.meta.load_mass);
  line.append("\n# seed ").append(std::to_string(d.meta.seed));
  line.append("\n# homing_count ").append(std::to_string(d.meta.homing_count)).append("\n");
  for (const auto& t : d.meta.trajectories) line.append("# trajectory ").append(t).append("\n");
  for (const auto& [name, idx] : d.groups.groups()) {
    line.append("# group ").append(name).append(" ");
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i) line.push_back(',');
      line.append(std::to_string(idx[i]));
    }
    line.push_back('\n');
  }
  const auto names = column_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) line.push_back(',');
    line.append(names[i]);
  }
  line.push_back('\n');
  os << line;

  for (const auto& r : d.records) {
    line.clear();
    line.append(std::to_string(r.segment)).push_back(',');
    line.append(std::to_string(r.homing_count));
    for (double v : r.features) {
      line.push_back(',');
      append_number(line, v);
    }
    for (int i = 0; i < 3; ++i) {
      line.push_back(',');
      append_number(line, r.ground_truth[i]);
    }
    for (int i = 0; i < 3; ++i) {
      line.push_back(',');
      append_number(line, r.target[i]);
    }
    line.push_back('\n');
    os << line;
  }
  if (!os) throw Error(ErrorCategory::kIoError, "write failed: " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCategory::kIoError, "cannot read dataset: " + path.string());
  Dataset d;
  d.groups = FeatureGroupRegistry{};
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line) || line != kMagic) {
    throw Error(ErrorCategory::kSchemaMismatch, path.string() + ": missing dataset header");
  }
  ++line_no;
  bool have_columns = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "load_mass") {
        std::string v;
        hs >> v;
        d.meta.load_mass = parse_number(v, line_no);
      } else if (key == "seed") {
        hs >> d.meta.seed;
      } else if (key == "homing_count") {
        hs >> d.meta.homing_count;
      } else if (key == "trajectory") {
        std::string rest;
        std::getline(hs >> std::ws, rest);
        d.meta.trajectories.push_back(rest);
      } else if (key == "group") {
        std::string name, list;
        hs >> name >> list;
        std::vector<int> idx;
        if (!list.empty()) {
          for (auto tok : split(list, ',')) idx.push_back(static_cast<int>(parse_number(tok, line_no)));
        }
        d.groups.add(name, idx);
      }
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != static_cast<std::size_t>(kColumns)) {
      throw Error(ErrorCategory::kSchemaMismatch,
                  path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(kColumns) + " columns (2 bookkeeping + 112 features + 6 truth), got " +
                      std::to_string(cells.size()));
    }
    if (!have_columns) {
      have_columns = true;
      continue;
    }
    Record r;
    r.segment = static_cast<int>(parse_number(cells[0], line_no));
    r.homing_count = static_cast<int>(parse_number(cells[1], line_no));
    for (int i = 0; i < kFeatureCount; ++i) {
      r.features[static_cast<std::size_t>(i)] = parse_number(cells[static_cast<std::size_t>(kBookkeeping + i)], line_no);
    }
    for (int i = 0; i < 3; ++i) {
      r.ground_truth[i] = parse_number(cells[static_cast<std::size_t>(kBookkeeping + kFeatureCount + i)], line_no);
      r.target[i] = parse_number(cells[static_cast<std::size_t>(kBookkeeping + kFeatureCount + 3 + i)], line_no);
    }
    d.records.push_back(r);
  }
  if (!have_columns) throw Error(ErrorCategory::kSchemaMismatch, path.string() + ": missing column header");
  return d;
}

}  // namespace cablecal
