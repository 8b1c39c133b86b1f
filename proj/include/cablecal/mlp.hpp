#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace cablecal {

/// Where the L2 activity penalty applies.
enum class ActivityTarget { kOutput, kHidden };

enum class Precision { kFloat, kDouble };

struct TrainConfig {
  double learning_rate = 5e-4;
  int epochs = 600;
  int batch_size = 1024;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l1_kernel = 1e-5;
  double l2_kernel = 1e-4;
  double l2_bias = 1e-4;
  double l2_activity = 1e-5;
  ActivityTarget activity_target = ActivityTarget::kOutput;
  Precision precision = Precision::kFloat;
  std::uint64_t seed = 0;

  /// Throws Error(kInvalidArgument).
  void validate() const;

  /// Same recipe with every penalty switched off.
  TrainConfig unregularized() const;

  bool operator==(const TrainConfig&) const = default;
};

/// Dense network: sigmoid hidden layers, linear output. Samples are columns.
template <class Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Mlp() = default;

  /// LeCun-uniform weights (limit sqrt(3 / fan_in)), zero biases.
  /// Throws Error(kEmptyNetwork) without a hidden layer.
  static Mlp init(const std::vector<int>& layer_sizes, std::uint64_t seed);

  /// Same shape, all parameters zero.
  static Mlp zeros(const std::vector<int>& layer_sizes);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int layer_count() const { return static_cast<int>(weights_.size()); }
  std::size_t parameter_count() const;

  Matrix& weight(int layer) { return weights_[static_cast<std::size_t>(layer)]; }
  const Matrix& weight(int layer) const { return weights_[static_cast<std::size_t>(layer)]; }
  Vector& bias(int layer) { return biases_[static_cast<std::size_t>(layer)]; }
  const Vector& bias(int layer) const { return biases_[static_cast<std::size_t>(layer)]; }

  /// Throws Error(kDimensionMismatch).
  Matrix forward(const Matrix& x) const;
  Vector forward(const Vector& x) const;

  /// Flat parameter order: per layer, weight row-major then bias.
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);

  template <class Other>
  Mlp<Other> cast() const;

  bool all_finite() const;

  bool operator==(const Mlp&) const = default;

 private:
  template <class>
  friend class Mlp;

  std::vector<int> sizes_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

template <class Scalar>
struct AdamState {
  Mlp<Scalar> m;
  Mlp<Scalar> v;
  long step = 0;

  static AdamState like(const Mlp<Scalar>& model);
};

/// Data term plus every penalty. Throws Error(kEmptyBatch) or
/// Error(kDimensionMismatch).
template <class Scalar>
double loss(const Mlp<Scalar>& model, const typename Mlp<Scalar>::Matrix& x,
            const typename Mlp<Scalar>::Matrix& y, const TrainConfig& config);

/// Analytic gradient of loss(). The L1 subgradient at zero is zero.
template <class Scalar>
Mlp<Scalar> gradient(const Mlp<Scalar>& model, const typename Mlp<Scalar>::Matrix& x,
                     const typename Mlp<Scalar>::Matrix& y, const TrainConfig& config);

/// One bias-corrected Adam update.
template <class Scalar>
void adam_step(Mlp<Scalar>& model, AdamState<Scalar>& state, const Mlp<Scalar>& grad,
               const TrainConfig& config);

struct TrainResult {
  std::vector<double> loss_history;  // per-epoch, sample-weighted mean of batch losses
};

/// Shuffled minibatch training for config.epochs epochs. Runs in the
/// precision selected by config.precision. Throws Error(kDimensionMismatch)
/// or Error(kEmptyDataset).
TrainResult train(Mlp<double>& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                  const TrainConfig& config);

/// Binary checkpoint: "CCMLP\0\0\1", u32 layer count, u32 sizes, u64 parameter
/// count, little-endian f64 parameters in flatten() order.
void write_model(std::ostream& os, const Mlp<double>& model);
Mlp<double> read_model(std::istream& is);
void save_model(const Mlp<double>& model, const std::filesystem::path& path);
Mlp<double> load_model(const std::filesystem::path& path);

extern template class Mlp<float>;
extern template class Mlp<double>;

}  // namespace cablecal
