#include "cablecal/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "cablecal/error.hpp"
#include "cablecal/rng.hpp"

namespace cablecal {

namespace {

[[noreturn]] void fail_at(const YAML::Mark& mark, const std::string& message) {
  throw Error(ErrorCategory::kConfigError, "line " + std::to_string(mark.line + 1) + ", column " +
                                               std::to_string(mark.column + 1) + ": " + message);
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <class T>
T parse_number(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) fail_at(n.Mark(), "'" + key + "' must be a number");
  const std::string& s = n.Scalar();
  T v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    fail_at(n.Mark(), "'" + key + "': cannot parse '" + s + "' as a number");
  }
  return v;
}

void expect_sequence(const YAML::Node& n, const std::string& key, std::size_t size = 0) {
  if (!n.IsSequence()) fail_at(n.Mark(), "'" + key + "' must be a list");
  if (size != 0 && n.size() != size) {
    fail_at(n.Mark(), "'" + key + "' must have " + std::to_string(size) + " entries");
  }
}

// Enum names (reuse the ablation parsers, rethrowing with a position).
template <class F>
auto parse_named(const YAML::Node& n, const std::string& key, F parse) {
  if (!n.IsScalar()) fail_at(n.Mark(), "'" + key + "' must be a name");
  try {
    return parse(n.Scalar());
  } catch (const Error& e) {
    fail_at(n.Mark(), "'" + key + "': " + e.what());
  }
}

ActivityTarget parse_activity(const std::string& s) {
  if (s == "output") return ActivityTarget::kOutput;
  if (s == "hidden") return ActivityTarget::kHidden;
  throw Error(ErrorCategory::kConfigError, "unknown activity target '" + s + "' (output|hidden)");
}
std::string activity_name(ActivityTarget t) { return t == ActivityTarget::kOutput ? "output" : "hidden"; }

Precision parse_precision(const std::string& s) {
  if (s == "float") return Precision::kFloat;
  if (s == "double") return Precision::kDouble;
  throw Error(ErrorCategory::kConfigError, "unknown precision '" + s + "' (float|double)");
}
std::string precision_name(Precision p) { return p == Precision::kFloat ? "float" : "double"; }

class Reader {
 public:
  explicit Reader(YAML::Node node) : node_(std::move(node)) {}

  void operator()(const char* key, double& v) { if (auto n = take(key)) v = parse_number<double>(n, key); }
  void operator()(const char* key, int& v) { if (auto n = take(key)) v = parse_number<int>(n, key); }
  void operator()(const char* key, std::uint64_t& v) {
    if (auto n = take(key)) v = parse_number<std::uint64_t>(n, key);
  }
  void operator()(const char* key, bool& v) {
    if (auto n = take(key)) {
      if (!n.IsScalar() || (n.Scalar() != "true" && n.Scalar() != "false")) {
        fail_at(n.Mark(), std::string("'") + key + "' must be true or false");
      }
      v = n.Scalar() == "true";
    }
  }
  void operator()(const char* key, std::string& v) {
    if (auto n = take(key)) {
      if (!n.IsScalar()) fail_at(n.Mark(), std::string("'") + key + "' must be a string");
      v = n.Scalar();
    }
  }
  void operator()(const char* key, Vec3& v) {
    if (auto n = take(key)) {
      expect_sequence(n, key, 3);
      for (int i = 0; i < 3; ++i) v[i] = parse_number<double>(n[i], key);
    }
  }
  void operator()(const char* key, Mat3& m) {
    if (auto n = take(key)) {
      expect_sequence(n, key, 3);
      for (int r = 0; r < 3; ++r) {
        expect_sequence(n[r], key, 3);
        for (int c = 0; c < 3; ++c) m(r, c) = parse_number<double>(n[r][c], key);
      }
    }
  }
  void operator()(const char* key, std::array<JointLimits, 3>& limits) {
    if (auto n = take(key)) {
      expect_sequence(n, key, 3);
      for (int i = 0; i < 3; ++i) {
        expect_sequence(n[i], key, 2);
        limits[i] = {parse_number<double>(n[i][0], key), parse_number<double>(n[i][1], key)};
      }
    }
  }
  template <class T>
  void operator()(const char* key, std::vector<T>& v) {
    if (auto n = take(key)) {
      expect_sequence(n, key);
      v.clear();
      for (const auto& e : n) v.push_back(parse_number<T>(e, key));
    }
  }
  void operator()(const char* key, std::vector<std::string>& v) {
    if (auto n = take(key)) {
      expect_sequence(n, key);
      v.clear();
      for (const auto& e : n) {
        if (!e.IsScalar()) fail_at(e.Mark(), std::string("'") + key + "' entries must be names");
        v.push_back(e.Scalar());
      }
    }
  }
  void operator()(const char* key, ActivityTarget& v) { if (auto n = take(key)) v = parse_named(n, key, parse_activity); }
  void operator()(const char* key, Precision& v) { if (auto n = take(key)) v = parse_named(n, key, parse_precision); }
  void operator()(const char* key, AblationMethod& v) { if (auto n = take(key)) v = parse_named(n, key, parse_method); }
  void operator()(const char* key, NoiseShape& v) { if (auto n = take(key)) v = parse_named(n, key, parse_noise_shape); }
  // Either the 112-character bit string or a list of groups to exclude.
  void operator()(const char* key, FeatureMask& mask) {
    auto n = take(key);
    if (!n) return;
    if (n.IsScalar()) {
      try {
        mask = FeatureMask::from_string(n.Scalar());
      } catch (const Error& e) {
        fail_at(n.Mark(), std::string("'") + key + "': " + e.what());
      }
      return;
    }
    expect_sequence(n, key);
    const auto& registry = FeatureGroupRegistry::reference();
    mask = FeatureMask::all();
    for (const auto& g : n) {
      if (!g.IsScalar() || !registry.contains(g.Scalar())) {
        fail_at(g.Mark(), "unknown feature group '" + (g.IsScalar() ? g.Scalar() : std::string()) + "'");
      }
      mask = mask.without(registry.indices(g.Scalar()));
    }
  }

  template <class F>
  void section(const char* key, F&& visit) {
    if (auto n = take(key)) {
      if (!n.IsMap()) fail_at(n.Mark(), std::string("'") + key + "' must be a mapping");
      Reader sub(n);
      visit(sub);
      sub.finish();
    }
  }
  template <class T, class F>
  void list(const char* key, std::vector<T>& items, F&& visit, bool replace) {
    if (auto n = take(key)) {
      expect_sequence(n, key, replace ? 0 : items.size());
      if (replace) items.assign(n.size(), T{});
      for (std::size_t i = 0; i < n.size(); ++i) {
        if (!n[i].IsMap()) fail_at(n[i].Mark(), std::string("'") + key + "' entries must be mappings");
        Reader sub(n[i]);
        visit(sub, items[i]);
        sub.finish();
      }
    }
  }

  void finish() const {
    for (const auto& kv : node_) {
      const auto name = kv.first.as<std::string>();
      if (!seen_.count(name)) fail_at(kv.first.Mark(), "unknown key '" + name + "'");
    }
  }

  const YAML::Node& node() const { return node_; }

 private:
  YAML::Node take(const char* key) {
    seen_.insert(key);
    const YAML::Node& self = node_;
    return self[key];
  }

  YAML::Node node_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  explicit Writer(YAML::Emitter& out) : out_(out) {}

  void operator()(const char* key, double v) { out_ << YAML::Key << key << YAML::Value << format_double(v); }
  void operator()(const char* key, int v) { out_ << YAML::Key << key << YAML::Value << v; }
  void operator()(const char* key, std::uint64_t v) { out_ << YAML::Key << key << YAML::Value << std::to_string(v); }
  void operator()(const char* key, bool v) { out_ << YAML::Key << key << YAML::Value << (v ? "true" : "false"); }
  void operator()(const char* key, const std::string& v) {
    out_ << YAML::Key << key << YAML::Value << YAML::DoubleQuoted << v;
  }
  void operator()(const char* key, const Vec3& v) {
    out_ << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (int i = 0; i < 3; ++i) out_ << format_double(v[i]);
    out_ << YAML::EndSeq;
  }
  void operator()(const char* key, const Mat3& m) {
    out_ << YAML::Key << key << YAML::Value << YAML::BeginSeq;
    for (int r = 0; r < 3; ++r) {
      out_ << YAML::Flow << YAML::BeginSeq;
      for (int c = 0; c < 3; ++c) out_ << format_double(m(r, c));
      out_ << YAML::EndSeq;
    }
    out_ << YAML::EndSeq;
  }
  void operator()(const char* key, const std::array<JointLimits, 3>& limits) {
    out_ << YAML::Key << key << YAML::Value << YAML::BeginSeq;
    for (const auto& l : limits) {
      out_ << YAML::Flow << YAML::BeginSeq << format_double(l.lo) << format_double(l.hi) << YAML::EndSeq;
    }
    out_ << YAML::EndSeq;
  }
  template <class T>
  void operator()(const char* key, const std::vector<T>& v) {
    out_ << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& e : v) {
      if constexpr (std::is_same_v<T, double>) {
        out_ << format_double(e);
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        out_ << std::to_string(e);
      } else {
        out_ << e;
      }
    }
    out_ << YAML::EndSeq;
  }
  void operator()(const char* key, ActivityTarget v) { (*this)(key, activity_name(v)); }
  void operator()(const char* key, Precision v) { (*this)(key, precision_name(v)); }
  void operator()(const char* key, AblationMethod v) { (*this)(key, to_string(v)); }
  void operator()(const char* key, NoiseShape v) { (*this)(key, to_string(v)); }
  void operator()(const char* key, const FeatureMask& m) { (*this)(key, m.to_string()); }

  template <class F>
  void section(const char* key, F&& visit) {
    out_ << YAML::Key << key << YAML::Value << YAML::BeginMap;
    visit(*this);
    out_ << YAML::EndMap;
  }
  template <class T, class F>
  void list(const char* key, std::vector<T>& items, F&& visit, bool /*replace*/) {
    out_ << YAML::Key << key << YAML::Value << YAML::BeginSeq;
    for (auto& item : items) {
      out_ << YAML::BeginMap;
      visit(*this, item);
      out_ << YAML::EndMap;
    }
    out_ << YAML::EndSeq;
  }

 private:
  YAML::Emitter& out_;
};

template <class V>
void visit_kinematics(V& v, KinematicParams& k) {
  v("rcm_height", k.rcm_height);
  v("axis_angle_1", k.axis_angle_1);
  v("axis_angle_2", k.axis_angle_2);
  v("tool_offset", k.tool_offset);
}

template <class V>
void visit_bouc_wen(V& v, BoucWenParams& b) {
  v("a", b.a);
  v("beta", b.beta);
  v("gamma", b.gamma);
  v("n", b.n);
  v("alpha", b.alpha);
}

template <class V>
void visit_plant(V& v, PlantParams& p) {
  v("coupling", p.coupling);
  v("bias", p.bias);
  v("runout_amplitude", p.runout_amplitude);
  v("runout_period", p.runout_period);
  v("runout_phase", p.runout_phase);
  v("compliance", p.compliance);
  v("backlash", p.backlash);
  v("backlash_tension", p.backlash_tension);
  std::vector<BoucWenParams> hysteresis(p.hysteresis.begin(), p.hysteresis.end());
  v.list("hysteresis", hysteresis, [](auto& sub, BoucWenParams& b) { visit_bouc_wen(sub, b); }, false);
  std::copy(hysteresis.begin(), hysteresis.end(), p.hysteresis.begin());
  v("hysteretic_friction", p.hysteretic_friction);
  v("coupled_hysteresis", p.coupled_hysteresis);
  v("disturbance_sigma", p.disturbance_sigma);
  v("disturbance_time", p.disturbance_time);
  v("friction_variation", p.friction_variation);
  v("friction_variation_time", p.friction_variation_time);
  v("kp", p.kp);
  v("kd", p.kd);
  v("motor_inertia", p.motor_inertia);
  v("motor_damping", p.motor_damping);
  v("torque_constant", p.torque_constant);
  v("velocity_filter", p.velocity_filter);
  v("gravity_direction", p.gravity_direction);
  v("arm_mass", p.arm_mass);
  v("com_offset", p.com_offset);
  v("gravity_coefficient", p.gravity_coefficient);
  v("motor_counts_per_rad", p.motor_counts_per_rad);
  v("ground_truth_rev_counts", p.ground_truth_rev_counts);
  v("ground_truth_linear_step", p.ground_truth_linear_step);
  v("torque_full_scale", p.torque_full_scale);
  v("torque_noise", p.torque_noise);
  v("motor_pose_4_scatter", p.motor_pose_4_scatter);
  v("first_homing_shift", p.first_homing_shift);
  v("later_homing_shift", p.later_homing_shift);
  v("first_homing_void_jump", p.first_homing_void_jump);
  v("later_homing_void_jump", p.later_homing_void_jump);
  v("control_rate", p.control_rate);
}

template <class V>
void visit_dataset(V& v, DatasetProfile& d) {
  v("limits", d.limits);
  v("sparsities", d.sparsities);
  v("train_velocity_min", d.train_velocity_min);
  v("train_velocity", d.train_velocity);
  v("train_acceleration", d.train_acceleration);
  v("test_duration", d.test_duration);
  v("test_velocity_min", d.test_velocity_min);
  v("test_velocity_max", d.test_velocity_max);
  v("load_mass", d.load_mass);
  v("homing_segments", d.homing_segments);
  v("homing_segment_duration", d.homing_segment_duration);
}

template <class V>
void visit_train(V& v, TrainConfig& t) {
  v("learning_rate", t.learning_rate);
  v("epochs", t.epochs);
  v("batch_size", t.batch_size);
  v("beta1", t.beta1);
  v("beta2", t.beta2);
  v("epsilon", t.epsilon);
  v("l1_kernel", t.l1_kernel);
  v("l2_kernel", t.l2_kernel);
  v("l2_bias", t.l2_bias);
  v("l2_activity", t.l2_activity);
  v("activity_target", t.activity_target);
  v("precision", t.precision);
}

template <class V>
void visit_calibrator(V& v, CalibratorConfig& c) {
  v("feature_mask", c.mask);
  v("hidden_layers", c.hidden_layers);
  v("normalize_inputs", c.normalize_inputs);
  v("normalize_targets", c.normalize_targets);
  v("seeds", c.seeds);
  v.section("train", [&](auto& sub) { visit_train(sub, c.train); });
}

template <class V>
void visit_spec(V& v, AblationSpec& s) {
  v("label", s.label);
  v("method", s.method);
  v("targets", s.targets);
  v("noise_scale", s.noise_scale);
  v("noise_shape", s.noise_shape);
}

template <class V>
void visit_config(V& v, WorkbenchConfig& c) {
  v("profile", c.profile);
  v("seed", c.seed);
  v("output_dir", c.output_dir);
  v.section("kinematics", [&](auto& sub) { visit_kinematics(sub, c.kinematics); });
  v.section("plant", [&](auto& sub) { visit_plant(sub, c.plant); });
  v.section("dataset", [&](auto& sub) { visit_dataset(sub, c.dataset); });
  v.section("calibrator", [&](auto& sub) { visit_calibrator(sub, c.calibrator); });
  v.list("manifest", c.manifest, [](auto& sub, AblationSpec& s) { visit_spec(sub, s); }, true);
}

YAML::Mark mark_of(const YAML::Node& root, const char* key) {
  if (root.IsMap()) {
    for (const auto& kv : root) {
      if (kv.first.Scalar() == key) return kv.first.Mark();
    }
  }
  return root.Mark();
}

// Re-raises a component validation failure with the position of its section,
// keeping the original category.
template <class F>
void validate_section(const YAML::Node& root, const char* key, F check) {
  try {
    check();
  } catch (const Error& e) {
    const YAML::Mark m = mark_of(root, key);
    throw Error(e.category(), "line " + std::to_string(m.line + 1) + " ('" + key + "'): " + e.what());
  }
}

}  // namespace

WorkbenchConfig WorkbenchConfig::desk() {
  WorkbenchConfig c;
  c.profile = "desk";
  c.dataset = DatasetProfile::desk();
  c.calibrator.hidden_layers = {128, 64};
  c.calibrator.train.epochs = 200;
  c.calibrator.seeds = {0, 1, 2};
  return c;
}

WorkbenchConfig WorkbenchConfig::paper() {
  WorkbenchConfig c;
  c.profile = "paper";
  c.dataset = DatasetProfile::paper();
  c.calibrator.hidden_layers = {256, 128, 64};
  c.calibrator.train.epochs = 600;
  c.calibrator.seeds = {0, 1, 2, 3, 4};
  return c;
}

WorkbenchConfig WorkbenchConfig::for_profile(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw Error(ErrorCategory::kConfigError, "unknown profile '" + name + "' (desk|paper)");
}

void WorkbenchConfig::validate() const {
  if (profile != "desk" && profile != "paper") {
    throw Error(ErrorCategory::kConfigError, "unknown profile '" + profile + "' (desk|paper)");
  }
  if (output_dir.empty()) throw Error(ErrorCategory::kConfigError, "output_dir is empty");
  kinematics.validate();
  plant.validate();
  dataset.validate();
  calibrator.validate();
  for (const auto& s : manifest) s.validate(FeatureGroupRegistry::reference());
}

std::uint64_t WorkbenchConfig::session_seed(bool loaded) const {
  return derive_seed(seed, loaded ? "session/loaded" : "session/unloaded");
}

std::uint64_t WorkbenchConfig::homing_seed(int dataset) const {
  return derive_seed(seed, "homing/" + std::to_string(dataset));
}

CalibratorConfig WorkbenchConfig::effective_calibrator() const {
  CalibratorConfig c = calibrator;
  for (auto& s : c.seeds) s = derive_seed(seed, "network/" + std::to_string(s));
  return c;
}

WorkbenchConfig parse_config(const std::string& text, const std::optional<std::string>& profile_override) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    fail_at(e.mark, e.msg);
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) fail_at(root.Mark(), "the config must be a mapping");

  std::string base = "desk";
  if (const auto p = root["profile"]) {
    if (!p.IsScalar()) fail_at(p.Mark(), "'profile' must be desk or paper");
    base = p.Scalar();
    if (base != "desk" && base != "paper") fail_at(p.Mark(), "unknown profile '" + base + "' (desk|paper)");
  }
  if (profile_override) base = *profile_override;

  WorkbenchConfig c = WorkbenchConfig::for_profile(base);
  Reader reader(root);
  visit_config(reader, c);
  reader.finish();
  c.profile = base;

  validate_section(root, "kinematics", [&] { c.kinematics.validate(); });
  validate_section(root, "plant", [&] { c.plant.validate(); });
  validate_section(root, "dataset", [&] { c.dataset.validate(); });
  validate_section(root, "calibrator", [&] { c.calibrator.validate(); });
  validate_section(root, "manifest", [&] {
    for (const auto& s : c.manifest) s.validate(FeatureGroupRegistry::reference());
  });
  validate_section(root, "output_dir", [&] { c.validate(); });
  return c;
}

WorkbenchConfig load_config(const std::filesystem::path& path, const std::optional<std::string>& profile_override) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIoError, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str(), profile_override);
  } catch (const Error& e) {
    throw Error(e.category(), path.string() + ": " + e.what());
  }
}

std::string serialize_config(const WorkbenchConfig& config) {
  WorkbenchConfig copy = config;
  YAML::Emitter out;
  out << YAML::BeginMap;
  Writer writer(out);
  visit_config(writer, copy);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace cablecal
