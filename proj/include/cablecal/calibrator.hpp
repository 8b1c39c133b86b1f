#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "cablecal/mlp.hpp"
#include "cablecal/robot_state.hpp"
#include "cablecal/statestream.hpp"

namespace cablecal {

/// All 112 features of a dataset, one column per record.
Eigen::MatrixXd feature_matrix(const Dataset& dataset);
/// Targets (rad, rad, m), one column per record.
Eigen::MatrixXd target_matrix(const Dataset& dataset);
/// joint_pose[0..2] of every record.
Eigen::MatrixXd raw_joint_matrix(const Dataset& dataset);

/// Per-row z-score statistics. Rows with sigma < 1e-12 map to 0.
struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd sigma;

  static constexpr double kMinSigma = 1e-12;

  /// Throws Error(kEmptyDataset).
  static Normalizer fit(const Eigen::MatrixXd& x);
  /// Identity statistics for `rows` rows.
  static Normalizer identity(Eigen::Index rows);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const;

  bool operator==(const Normalizer& o) const {
    return mean.size() == o.mean.size() && mean == o.mean && sigma == o.sigma;
  }
};

struct CalibratorConfig {
  FeatureMask mask = FeatureMask::default_mask(FeatureGroupRegistry::reference());
  std::vector<int> hidden_layers{128, 64};
  TrainConfig train;
  bool normalize_inputs = true;
  bool normalize_targets = true;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  void validate() const;
  bool operator==(const CalibratorConfig&) const = default;
};

/// Trained model plus everything needed to apply it to raw robot states.
struct Calibrator {
  FeatureMask mask;
  Normalizer input;
  Normalizer output;
  Mlp<double> model;

  /// Predicted targets for 112-row feature columns. Throws
  /// Error(kDimensionMismatch).
  Eigen::MatrixXd predict(const Eigen::MatrixXd& features) const;
  /// joint_pose[0..2] + predicted error.
  Vec3 calibrate(const FeatureVector& state) const;
  Eigen::MatrixXd calibrate(const Eigen::MatrixXd& features) const;

  bool operator==(const Calibrator&) const = default;
};

struct CalibratorFit {
  Calibrator calibrator;
  TrainResult history;
};

/// Fits the normalizers on `train` and trains a fresh network seeded with
/// `seed` (the seed overrides config.train.seed).
CalibratorFit train_calibrator(const Dataset& train, const CalibratorConfig& config, std::uint64_t seed);

/// RMSE and peak per joint, internal units (rad, rad, m).
struct JointMetrics {
  Vec3 rmse = Vec3::Zero();
  Vec3 peak = Vec3::Zero();

  bool operator==(const JointMetrics&) const = default;
};

/// Residuals are 3 x N. Throws Error(kEmptyDataset).
JointMetrics compute_metrics(const Eigen::MatrixXd& residual);

/// Report units: degrees for joints 1-2, millimetres for joint 3.
Vec3 to_report_units(const Vec3& internal);

JointMetrics before_calibration(const Dataset& test);

/// Mean training-set target per joint. Throws Error(kEmptyDataset).
Vec3 bias_offset(const Dataset& train);
JointMetrics bias_removal_baseline(const Dataset& train, const Dataset& test);

/// Residual target - prediction on (possibly modified) features.
Eigen::MatrixXd residuals(const Calibrator& calibrator, const Eigen::MatrixXd& features,
                          const Eigen::MatrixXd& targets);
JointMetrics evaluate(const Calibrator& calibrator, const Dataset& test);
/// Metrics per consecutive `window` seconds of test time stamps (long-term
/// accuracy); the last window may be partial. Throws Error(kInvalidArgument)
/// for a non-positive window and Error(kEmptyDataset) for an empty test set.
std::vector<JointMetrics> windowed_metrics(const Calibrator& calibrator, const Dataset& test, double window);

/// Binary checkpoint: "CCCAL\0\0\1", mask bits, both normalizers, then the model
/// checkpoint. Throws Error(kIoError) / Error(kSchemaMismatch).
void save_calibrator(const Calibrator& calibrator, const std::filesystem::path& path);
/// Throws Error(kMissingDataset) if the file does not exist.
Calibrator load_calibrator(const std::filesystem::path& path);

}  // namespace cablecal
