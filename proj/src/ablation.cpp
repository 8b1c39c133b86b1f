#include "cablecal/ablation.hpp"

#include <algorithm>
#include <cmath>

#include "cablecal/error.hpp"
#include "cablecal/rng.hpp"

namespace cablecal {

namespace {

JointMetrics mean_of(const std::vector<JointMetrics>& v) {
  JointMetrics m;
  for (const auto& x : v) {
    m.rmse += x.rmse;
    m.peak += x.peak;
  }
  m.rmse /= static_cast<double>(v.size());
  m.peak /= static_cast<double>(v.size());
  return m;
}

JointMetrics stdev_of(const std::vector<JointMetrics>& v, const JointMetrics& mean) {
  JointMetrics s;
  for (const auto& x : v) {
    s.rmse += (x.rmse - mean.rmse).cwiseAbs2();
    s.peak += (x.peak - mean.peak).cwiseAbs2();
  }
  s.rmse = (s.rmse / static_cast<double>(v.size())).cwiseSqrt();
  s.peak = (s.peak / static_cast<double>(v.size())).cwiseSqrt();
  return s;
}

std::vector<int> union_of(const FeatureGroupRegistry& reg, const std::vector<std::string>& names) {
  std::vector<int> out;
  for (const auto& n : names) {
    const auto& idx = reg.indices(n);
    out.insert(out.end(), idx.begin(), idx.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(cols[i]);
  return out;
}

}  // namespace

std::string to_string(AblationMethod m) { return m == AblationMethod::kRemoval ? "removal" : "inaccurate"; }

std::string to_string(TorqueOp op) {
  switch (op) {
    case TorqueOp::kNone: return "none";
    case TorqueOp::kNoise: return "noise";
    case TorqueOp::kNegate: return "neg";
    case TorqueOp::kTriple: return "x3";
  }
  return "none";
}

std::string to_string(NoiseShape s) { return s == NoiseShape::kUniform ? "uniform" : "gaussian"; }

AblationMethod parse_method(const std::string& s) {
  if (s == "removal") return AblationMethod::kRemoval;
  if (s == "inaccurate") return AblationMethod::kInaccurate;
  throw Error(ErrorCategory::kConfigError, "unknown ablation method '" + s + "' (removal | inaccurate)");
}

TorqueOp parse_torque_op(const std::string& s) {
  if (s == "none") return TorqueOp::kNone;
  if (s == "noise") return TorqueOp::kNoise;
  if (s == "neg") return TorqueOp::kNegate;
  if (s == "x3") return TorqueOp::kTriple;
  throw Error(ErrorCategory::kConfigError, "unknown torque op '" + s + "' (none | noise | neg | x3)");
}

NoiseShape parse_noise_shape(const std::string& s) {
  if (s == "uniform") return NoiseShape::kUniform;
  if (s == "gaussian") return NoiseShape::kGaussian;
  throw Error(ErrorCategory::kConfigError, "unknown noise shape '" + s + "' (uniform | gaussian)");
}

void AblationSpec::validate(const FeatureGroupRegistry& registry) const {
  for (const auto& t : targets) registry.indices(t);
  if (method == AblationMethod::kInaccurate && !(noise_scale > 0.0)) {
    throw Error(ErrorCategory::kInvalidArgument, "ablation '" + label + "': noise scale must be positive");
  }
}

std::vector<AblationSpec> standard_manifest() {
  const std::vector<std::pair<std::string, std::string>> rows{
      {"Operating Status", "operating_status"}, {"All Poses", "all_poses"}, {"Joint Poses", "joint_poses"},
      {"End-effector", "end_effector"},         {"Velocity", "velocity"},   {"Torque", "torque"},
      {"Jacobian", "jacobian"},                 {"Joint 1", "joint_1"},     {"Joint 2", "joint_2"},
      {"Joint 3", "joint_3"}};
  std::vector<AblationSpec> out;
  for (auto method : {AblationMethod::kRemoval, AblationMethod::kInaccurate}) {
    for (const auto& [label, group] : rows) {
      if (method == AblationMethod::kInaccurate && group == "all_poses") continue;
      AblationSpec s;
      s.label = label;
      s.method = method;
      s.targets = {group};
      out.push_back(s);
    }
  }
  return out;
}

RunResult RunResult::aggregate(std::string label, std::vector<std::uint64_t> seeds,
                               std::vector<JointMetrics> per_seed) {
  RunResult r;
  r.label = std::move(label);
  r.seeds = std::move(seeds);
  r.per_seed = std::move(per_seed);
  r.mean = mean_of(r.per_seed);
  r.stdev = stdev_of(r.per_seed, r.mean);
  return r;
}

Eigen::MatrixXd corrupt(const Eigen::MatrixXd& features, const std::vector<int>& indices, const Normalizer& stats,
                        double scale, NoiseShape shape, std::uint64_t seed) {
  Eigen::MatrixXd out = features;
  Rng rng(seed);
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    for (int i : indices) {
      const double sigma = stats.sigma[i];
      const double u = shape == NoiseShape::kUniform ? rng.uniform(-1.0, 1.0) : rng.normal();
      out(i, c) += scale * sigma * u;
    }
  }
  return out;
}

Eigen::MatrixXd modify_torque(const Eigen::MatrixXd& features, const std::vector<int>& indices,
                              const Normalizer& stats, TorqueOp op, std::uint64_t seed) {
  switch (op) {
    case TorqueOp::kNone: return features;
    case TorqueOp::kNoise: return corrupt(features, indices, stats, 1.0, NoiseShape::kUniform, seed);
    case TorqueOp::kNegate:
    case TorqueOp::kTriple: {
      Eigen::MatrixXd out = features;
      const double k = op == TorqueOp::kNegate ? -1.0 : 3.0;
      for (int i : indices) out.row(i) *= k;
      return out;
    }
  }
  return features;
}

Study::Study(std::shared_ptr<const Dataset> train, std::shared_ptr<const Dataset> test, CalibratorConfig config)
    : train_(std::move(train)), test_(std::move(test)), config_(std::move(config)) {
  if (!train_ || !test_ || train_->empty() || test_->empty()) {
    throw Error(ErrorCategory::kEmptyDataset, "study needs non-empty training and test sets");
  }
  config_.validate();
  stats_ = Normalizer::fit(feature_matrix(*train_));
  test_features_ = feature_matrix(*test_);
  test_targets_ = target_matrix(*test_);
}

const CalibratorFit& Study::fit(const FeatureMask& mask, std::uint64_t seed) {
  const auto key = std::make_pair(mask.to_string(), seed);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  CalibratorConfig cfg = config_;
  cfg.mask = mask;
  return cache_.emplace(key, train_calibrator(*train_, cfg, seed)).first->second;
}

JointMetrics Study::before() const { return before_calibration(*test_); }

JointMetrics Study::bias_removal() const { return bias_removal_baseline(*train_, *test_); }

std::vector<int> Study::target_indices(const AblationSpec& spec) const {
  return union_of(train_->groups, spec.targets);
}

RunResult Study::evaluate_on(const std::string& label, const FeatureMask& mask, const Eigen::MatrixXd& features) {
  std::vector<JointMetrics> per_seed;
  for (auto seed : config_.seeds) {
    per_seed.push_back(compute_metrics(residuals(fit(mask, seed).calibrator, features, test_targets_)));
  }
  return RunResult::aggregate(label, config_.seeds, per_seed);
}

RunResult Study::baseline() { return evaluate_on("All Features", config_.mask, test_features_); }

RunResult Study::removal(const AblationSpec& spec) {
  spec.validate(train_->groups);
  const FeatureMask mask = config_.mask.without(target_indices(spec));
  if (mask.count() == 0) throw Error(ErrorCategory::kInvalidArgument, "removal '" + spec.label + "' leaves no features");
  return evaluate_on(spec.label, mask, test_features_);
}

RunResult Study::inaccurate(const AblationSpec& spec) {
  spec.validate(train_->groups);
  const auto idx = target_indices(spec);
  std::vector<JointMetrics> per_seed;
  for (auto seed : config_.seeds) {
    const Eigen::MatrixXd noisy = corrupt(test_features_, idx, stats_, spec.noise_scale, spec.noise_shape,
                                          derive_seed(seed, "inaccurate/" + spec.label));
    per_seed.push_back(compute_metrics(residuals(fit(config_.mask, seed).calibrator, noisy, test_targets_)));
  }
  return RunResult::aggregate(spec.label, config_.seeds, per_seed);
}

RunResult Study::torque(TorqueOp op) {
  const auto& idx = train_->groups.indices("torque");
  std::vector<JointMetrics> per_seed;
  for (auto seed : config_.seeds) {
    const Eigen::MatrixXd modified = modify_torque(test_features_, idx, stats_, op, derive_seed(seed, "torque"));
    per_seed.push_back(compute_metrics(residuals(fit(config_.mask, seed).calibrator, modified, test_targets_)));
  }
  return RunResult::aggregate(to_string(op), config_.seeds, per_seed);
}

RunResult Study::run(const AblationSpec& spec) {
  return spec.method == AblationMethod::kRemoval ? removal(spec) : inaccurate(spec);
}

const HomingRow& HomingStudyResult::row(const std::string& label, int dataset) const {
  for (const auto& r : rows) {
    if (r.label == label && r.dataset == dataset) return r;
  }
  throw Error(ErrorCategory::kInvalidArgument, "no homing-study row '" + label + "'");
}

HomingStudyResult homing_study(const Session& no_homing, const Session& with_homing, const CalibratorConfig& config,
                               double noise_scale) {
  HomingStudyResult result;
  const FeatureGroupRegistry& reg = no_homing.train.groups;
  const auto& encoders = reg.indices("encoders");

  // Records of each test segment.
  auto segments_of = [](const Dataset& d) {
    std::vector<std::vector<Eigen::Index>> seg;
    for (std::size_t i = 0; i < d.records.size(); ++i) {
      const auto k = static_cast<std::size_t>(d.records[i].segment);
      if (seg.size() <= k) seg.resize(k + 1);
      seg[k].push_back(static_cast<Eigen::Index>(i));
    }
    return seg;
  };

  {
    const auto seg = segments_of(no_homing.test);
    const Eigen::MatrixXd y = target_matrix(no_homing.test);
    const Vec3 offset = bias_offset(no_homing.train);
    for (const auto& cols : seg) {
      const Eigen::MatrixXd ys = select_columns(y, cols);
      result.before_per_segment.push_back(compute_metrics(ys));
      result.bias_per_segment.push_back(compute_metrics(ys.colwise() - offset));
    }
  }

  struct Variant {
    std::string label;
    int dataset;
    FeatureMask mask;
    bool noisy_encoders;
  };
  const FeatureMask all = FeatureMask::all();
  const std::vector<Variant> variants{
      {"All features", 1, all, false},
      {"No encoder", 1, FeatureMask::default_mask(reg), false},
      {"All features", 2, all, false},
      {"Inaccurate encoder", 2, all, true},
      {"No other poses, only encoder", 2, all.without(reg.indices("all_poses")), false},
      {"No other poses, inaccurate encoder", 2, all.without(reg.indices("all_poses")), true},
  };

  auto train_ptr = [](const Dataset& d) { return std::make_shared<const Dataset>(d); };
  Study first(train_ptr(no_homing.train), train_ptr(no_homing.test), config);
  Study second(train_ptr(with_homing.train), train_ptr(with_homing.test), config);

  for (const auto& v : variants) {
    Study& study = v.dataset == 1 ? first : second;
    const Dataset& test = study.test_set();
    const auto seg = segments_of(test);
    const Eigen::MatrixXd x = feature_matrix(test);
    const Eigen::MatrixXd y = target_matrix(test);

    HomingRow row;
    row.label = v.label;
    row.dataset = v.dataset;
    std::vector<JointMetrics> overall;
    std::vector<std::vector<JointMetrics>> per_segment(seg.size());
    for (auto seed : config.seeds) {
      const Eigen::MatrixXd xs = v.noisy_encoders
                                     ? corrupt(x, encoders, study.feature_stats(), noise_scale, NoiseShape::kUniform,
                                               derive_seed(seed, "inaccurate/encoders"))
                                     : x;
      const Eigen::MatrixXd r = residuals(study.fit(v.mask, seed).calibrator, xs, y);
      overall.push_back(compute_metrics(r));
      for (std::size_t k = 0; k < seg.size(); ++k) per_segment[k].push_back(compute_metrics(select_columns(r, seg[k])));
    }
    row.seeds = config.seeds;
    row.overall_per_seed = overall;
    row.segment_per_seed = per_segment;
    row.overall = mean_of(overall);
    row.overall_stdev = stdev_of(overall, row.overall);
    for (const auto& s : per_segment) row.per_segment.push_back(mean_of(s));
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace cablecal
