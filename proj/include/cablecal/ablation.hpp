#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cablecal/calibrator.hpp"
#include "cablecal/statestream.hpp"
#include "cablecal/workbench.hpp"

namespace cablecal {

enum class AblationMethod { kRemoval, kInaccurate };
enum class TorqueOp { kNone, kNoise, kNegate, kTriple };
enum class NoiseShape { kUniform, kGaussian };

std::string to_string(AblationMethod m);
std::string to_string(TorqueOp op);
std::string to_string(NoiseShape s);
/// Throw Error(kConfigError) on unknown names.
AblationMethod parse_method(const std::string& s);
TorqueOp parse_torque_op(const std::string& s);
NoiseShape parse_noise_shape(const std::string& s);

struct AblationSpec {
  std::string label;
  AblationMethod method = AblationMethod::kRemoval;
  /// Registry group names. Empty means the unmodified baseline.
  std::vector<std::string> targets;
  double noise_scale = 2.0;  // multiples of the training sigma
  NoiseShape noise_shape = NoiseShape::kUniform;

  /// Throws Error(kUnknownGroup) or Error(kInvalidArgument).
  void validate(const FeatureGroupRegistry& registry) const;

  bool operator==(const AblationSpec&) const = default;
};

/// The removal and inaccurate rows of the standard ablation tables.
std::vector<AblationSpec> standard_manifest();

/// Per-seed metrics of one experiment cell and their aggregate.
struct RunResult {
  std::string label;
  std::vector<std::uint64_t> seeds;
  std::vector<JointMetrics> per_seed;
  JointMetrics mean;
  JointMetrics stdev;  // population standard deviation over seeds

  static RunResult aggregate(std::string label, std::vector<std::uint64_t> seeds,
                             std::vector<JointMetrics> per_seed);
};

/// Test-time corruption: x + u with u uniform on [-scale*sigma, +scale*sigma]
/// (or normal with standard deviation scale*sigma), sigma from the training
/// statistics, fresh per record.
Eigen::MatrixXd corrupt(const Eigen::MatrixXd& features, const std::vector<int>& indices,
                        const Normalizer& stats, double scale, NoiseShape shape, std::uint64_t seed);

/// Torque-feature modification at test time.
Eigen::MatrixXd modify_torque(const Eigen::MatrixXd& features, const std::vector<int>& indices,
                              const Normalizer& stats, TorqueOp op, std::uint64_t seed);

/// Experiment matrix over one train/test pair. Trained models are cached per
/// (mask, seed), so inaccurate and torque runs reuse the baseline networks.
class Study {
 public:
  Study(std::shared_ptr<const Dataset> train, std::shared_ptr<const Dataset> test, CalibratorConfig config);

  const CalibratorConfig& config() const { return config_; }
  const Dataset& train_set() const { return *train_; }
  const Dataset& test_set() const { return *test_; }
  /// Raw per-feature statistics of the training set.
  const Normalizer& feature_stats() const { return stats_; }

  const CalibratorFit& fit(const FeatureMask& mask, std::uint64_t seed);
  std::size_t trained_models() const { return cache_.size(); }

  JointMetrics before() const;
  JointMetrics bias_removal() const;

  std::vector<int> target_indices(const AblationSpec& spec) const;

  RunResult baseline();
  RunResult run(const AblationSpec& spec);
  RunResult removal(const AblationSpec& spec);
  RunResult inaccurate(const AblationSpec& spec);
  RunResult torque(TorqueOp op);

  /// Metrics per seed of `mask` models on modified test features.
  RunResult evaluate_on(const std::string& label, const FeatureMask& mask, const Eigen::MatrixXd& features);

 private:
  std::shared_ptr<const Dataset> train_;
  std::shared_ptr<const Dataset> test_;
  CalibratorConfig config_;
  Normalizer stats_;
  Eigen::MatrixXd test_features_;
  Eigen::MatrixXd test_targets_;
  std::map<std::pair<std::string, std::uint64_t>, CalibratorFit> cache_;
};

/// One feature configuration of the homing study.
struct HomingRow {
  std::string label;
  int dataset = 1;                          // 1: no homing in training, 2: homing in training
  std::vector<JointMetrics> per_segment;    // seed means
  JointMetrics overall;                     // seed mean over all segments
  JointMetrics overall_stdev;
  std::vector<std::uint64_t> seeds;
  std::vector<JointMetrics> overall_per_seed;
  std::vector<std::vector<JointMetrics>> segment_per_seed;  // [segment][seed]
};

struct HomingStudyResult {
  std::vector<JointMetrics> bias_per_segment;  // dataset 1 bias-removal baseline
  std::vector<JointMetrics> before_per_segment;
  std::vector<HomingRow> rows;

  const HomingRow& row(const std::string& label, int dataset) const;
};

/// Rows: dataset 1 "All features" and "No encoder"; dataset 2 "All features",
/// "Inaccurate encoder", "No other poses, only encoder" and "No other poses,
/// inaccurate encoder".
HomingStudyResult homing_study(const Session& no_homing, const Session& with_homing,
                               const CalibratorConfig& config, double noise_scale = 2.0);

}  // namespace cablecal
