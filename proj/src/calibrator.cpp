#include "cablecal/calibrator.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "cablecal/error.hpp"

namespace cablecal {

namespace {

constexpr char kCalibratorMagic[8] = {'C', 'C', 'C', 'A', 'L', '\0', '\0', '\1'};

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) {
    throw Error(ErrorCategory::kSchemaMismatch, "truncated calibrator checkpoint");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
  write_f64(os, static_cast<double>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) write_f64(os, v[i]);
}

Eigen::VectorXd read_vector(std::istream& is) {
  const double n = read_f64(is);
  if (!(n >= 0.0 && n <= 1e6)) throw Error(ErrorCategory::kSchemaMismatch, "calibrator checkpoint: bad vector size");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = read_f64(is);
  return v;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
  return out;
}

}  // namespace

Eigen::MatrixXd feature_matrix(const Dataset& d) {
  Eigen::MatrixXd x(kFeatureCount, static_cast<Eigen::Index>(d.size()));
  for (std::size_t c = 0; c < d.size(); ++c) {
    x.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(d.records[c].features.data(), kFeatureCount);
  }
  return x;
}

Eigen::MatrixXd target_matrix(const Dataset& d) {
  Eigen::MatrixXd y(3, static_cast<Eigen::Index>(d.size()));
  for (std::size_t c = 0; c < d.size(); ++c) y.col(static_cast<Eigen::Index>(c)) = d.records[c].target;
  return y;
}

Eigen::MatrixXd raw_joint_matrix(const Dataset& d) {
  Eigen::MatrixXd y(3, static_cast<Eigen::Index>(d.size()));
  for (std::size_t c = 0; c < d.size(); ++c) {
    for (int j = 0; j < 3; ++j) y(j, static_cast<Eigen::Index>(c)) = d.records[c].features[static_cast<std::size_t>(layout::kJointPose + j)];
  }
  return y;
}

Normalizer Normalizer::fit(const Eigen::MatrixXd& x) {
  if (x.cols() == 0) throw Error(ErrorCategory::kEmptyDataset, "normalizer: no training records");
  Normalizer n;
  n.mean = x.rowwise().mean();
  n.sigma = ((x.colwise() - n.mean).array().square().rowwise().sum() / static_cast<double>(x.cols())).sqrt();
  return n;
}

Normalizer Normalizer::identity(Eigen::Index rows) {
  return {Eigen::VectorXd::Zero(rows), Eigen::VectorXd::Ones(rows)};
}

Eigen::MatrixXd Normalizer::apply(const Eigen::MatrixXd& x) const {
  if (x.rows() != mean.size()) throw Error(ErrorCategory::kDimensionMismatch, "normalizer: row count mismatch");
  Eigen::MatrixXd z(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (sigma[r] < kMinSigma) {
      z.row(r).setZero();
    } else {
      z.row(r) = (x.row(r).array() - mean[r]) / sigma[r];
    }
  }
  return z;
}

Eigen::MatrixXd Normalizer::invert(const Eigen::MatrixXd& z) const {
  if (z.rows() != mean.size()) throw Error(ErrorCategory::kDimensionMismatch, "normalizer: row count mismatch");
  Eigen::MatrixXd x(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    x.row(r) = sigma[r] < kMinSigma ? Eigen::RowVectorXd::Constant(z.cols(), mean[r])
                                    : Eigen::RowVectorXd(z.row(r).array() * sigma[r] + mean[r]);
  }
  return x;
}

void CalibratorConfig::validate() const {
  if (mask.count() == 0) throw Error(ErrorCategory::kInvalidArgument, "calibrator: feature mask is empty");
  if (hidden_layers.empty()) throw Error(ErrorCategory::kEmptyNetwork, "calibrator: no hidden layers");
  if (seeds.empty()) throw Error(ErrorCategory::kInvalidArgument, "calibrator: no seeds");
  train.validate();
}

Eigen::MatrixXd Calibrator::predict(const Eigen::MatrixXd& features) const {
  if (features.rows() != kFeatureCount) {
    throw Error(ErrorCategory::kDimensionMismatch, "calibrate: expected 112 feature rows, got " +
                                                       std::to_string(features.rows()));
  }
  const Eigen::MatrixXd x = input.apply(select_rows(features, mask.active_indices()));
  return output.invert(model.forward(x));
}

Eigen::MatrixXd Calibrator::calibrate(const Eigen::MatrixXd& features) const {
  return features.middleRows(layout::kJointPose, 3) + predict(features);
}

Vec3 Calibrator::calibrate(const FeatureVector& state) const {
  const Eigen::MatrixXd f = Eigen::Map<const Eigen::VectorXd>(state.data(), kFeatureCount);
  return calibrate(f).col(0);
}

CalibratorFit train_calibrator(const Dataset& train, const CalibratorConfig& config, std::uint64_t seed) {
  config.validate();
  if (train.empty()) throw Error(ErrorCategory::kEmptyDataset, "train_calibrator: empty training set");
  const auto active = config.mask.active_indices();
  const Eigen::MatrixXd x_raw = select_rows(feature_matrix(train), active);
  const Eigen::MatrixXd y_raw = target_matrix(train);

  CalibratorFit fit;
  Calibrator& cal = fit.calibrator;
  cal.mask = config.mask;
  cal.input = config.normalize_inputs ? Normalizer::fit(x_raw) : Normalizer::identity(x_raw.rows());
  cal.output = config.normalize_targets ? Normalizer::fit(y_raw) : Normalizer::identity(3);

  std::vector<int> sizes{static_cast<int>(active.size())};
  sizes.insert(sizes.end(), config.hidden_layers.begin(), config.hidden_layers.end());
  sizes.push_back(3);
  cal.model = Mlp<double>::init(sizes, seed);

  TrainConfig tc = config.train;
  tc.seed = seed;
  fit.history = cablecal::train(cal.model, cal.input.apply(x_raw), cal.output.apply(y_raw), tc);
  return fit;
}

JointMetrics compute_metrics(const Eigen::MatrixXd& residual) {
  if (residual.cols() == 0) throw Error(ErrorCategory::kEmptyDataset, "metrics: no residuals");
  if (residual.rows() != 3) throw Error(ErrorCategory::kDimensionMismatch, "metrics: expected 3 rows");
  JointMetrics m;
  for (int j = 0; j < 3; ++j) {
    m.rmse[j] = std::sqrt(residual.row(j).squaredNorm() / static_cast<double>(residual.cols()));
    m.peak[j] = residual.row(j).cwiseAbs().maxCoeff();
  }
  return m;
}

Vec3 to_report_units(const Vec3& v) { return Vec3(v[0] * kRadToDeg, v[1] * kRadToDeg, v[2] * 1000.0); }

JointMetrics before_calibration(const Dataset& test) { return compute_metrics(target_matrix(test)); }

Vec3 bias_offset(const Dataset& train) {
  if (train.empty()) throw Error(ErrorCategory::kEmptyDataset, "bias removal: empty training set");
  return target_matrix(train).rowwise().mean();
}

JointMetrics bias_removal_baseline(const Dataset& train, const Dataset& test) {
  const Vec3 offset = bias_offset(train);
  return compute_metrics(target_matrix(test).colwise() - offset);
}

Eigen::MatrixXd residuals(const Calibrator& cal, const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets) {
  return targets - cal.predict(features);
}

JointMetrics evaluate(const Calibrator& cal, const Dataset& test) {
  return compute_metrics(residuals(cal, feature_matrix(test), target_matrix(test)));
}

std::vector<JointMetrics> windowed_metrics(const Calibrator& cal, const Dataset& test, double window) {
  if (!(window > 0.0)) throw Error(ErrorCategory::kInvalidArgument, "metrics window must be positive");
  if (test.empty()) throw Error(ErrorCategory::kEmptyDataset, "windowed metrics on an empty test set");
  const Eigen::MatrixXd features = feature_matrix(test);
  const Eigen::MatrixXd res = residuals(cal, features, target_matrix(test));
  const double t0 = features(layout::kTimeStamp, 0);
  std::vector<JointMetrics> out;
  Eigen::Index begin = 0;
  while (begin < res.cols()) {
    const auto bin = static_cast<long long>((features(layout::kTimeStamp, begin) - t0) / window);
    Eigen::Index end = begin + 1;
    while (end < res.cols() && static_cast<long long>((features(layout::kTimeStamp, end) - t0) / window) == bin) ++end;
    out.push_back(compute_metrics(res.middleCols(begin, end - begin)));
    begin = end;
  }
  return out;
}

void save_calibrator(const Calibrator& cal, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCategory::kIoError, "cannot write calibrator: " + path.string());
  os.write(kCalibratorMagic, sizeof(kCalibratorMagic));
  const std::string bits = cal.mask.to_string();
  os.write(bits.data(), static_cast<std::streamsize>(bits.size()));
  write_vector(os, cal.input.mean);
  write_vector(os, cal.input.sigma);
  write_vector(os, cal.output.mean);
  write_vector(os, cal.output.sigma);
  write_model(os, cal.model);
  if (!os) throw Error(ErrorCategory::kIoError, "write failed: " + path.string());
}

Calibrator load_calibrator(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCategory::kMissingDataset, "calibrator checkpoint not found: " + path.string());
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCategory::kIoError, "cannot open calibrator: " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCalibratorMagic, 8) != 0) {
    throw Error(ErrorCategory::kSchemaMismatch, path.string() + ": not a calibrator checkpoint");
  }
  std::string bits(kFeatureCount, '0');
  if (!is.read(bits.data(), kFeatureCount)) throw Error(ErrorCategory::kSchemaMismatch, "truncated calibrator checkpoint");
  Calibrator cal;
  cal.mask = FeatureMask::from_string(bits);
  cal.input.mean = read_vector(is);
  cal.input.sigma = read_vector(is);
  cal.output.mean = read_vector(is);
  cal.output.sigma = read_vector(is);
  cal.model = read_model(is);
  if (cal.input.mean.size() != cal.mask.count() || cal.model.input_size() != cal.mask.count() ||
      cal.output.mean.size() != 3 || cal.model.output_size() != 3) {
    throw Error(ErrorCategory::kSchemaMismatch, path.string() + ": inconsistent calibrator checkpoint");
  }
  return cal;
}

}  // namespace cablecal
