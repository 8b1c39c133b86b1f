#include "cablecal/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "cablecal/error.hpp"
#include "cablecal/rng.hpp"

namespace cablecal {

namespace {

constexpr char kModelMagic[8] = {'C', 'C', 'M', 'L', 'P', '\0', '\0', '\1'};

template <class Scalar>
using MatrixT = typename Mlp<Scalar>::Matrix;

template <class Scalar>
void sigmoid_inplace(MatrixT<Scalar>& z) {
  z = ((-z.array()).exp() + Scalar(1)).inverse().matrix();
}

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCategory::kSchemaMismatch, "truncated model checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorCategory::kSchemaMismatch, "truncated model checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

/// Activations of every layer; acts[0] is the input.
template <class Scalar>
struct Workspace {
  std::vector<MatrixT<Scalar>> acts;
  MatrixT<Scalar> delta;
  MatrixT<Scalar> next_delta;
};

template <class Scalar>
void check_batch(const Mlp<Scalar>& model, const MatrixT<Scalar>& x, const MatrixT<Scalar>& y) {
  if (x.cols() == 0) throw Error(ErrorCategory::kEmptyBatch, "loss: empty batch");
  if (x.rows() != model.input_size() || y.rows() != model.output_size() || x.cols() != y.cols()) {
    throw Error(ErrorCategory::kDimensionMismatch, "loss: batch shape does not match the model");
  }
}

template <class Scalar>
void forward_all(const Mlp<Scalar>& model, const MatrixT<Scalar>& x, Workspace<Scalar>& ws) {
  const int layers = model.layer_count();
  ws.acts.resize(static_cast<std::size_t>(layers + 1));
  ws.acts[0] = x;
  for (int l = 0; l < layers; ++l) {
    auto& out = ws.acts[static_cast<std::size_t>(l + 1)];
    out.noalias() = model.weight(l) * ws.acts[static_cast<std::size_t>(l)];
    out.colwise() += model.bias(l);
    if (l + 1 < layers) sigmoid_inplace<Scalar>(out);
  }
}

/// Loss and, when `grad` is non-null, its gradient.
template <class Scalar>
double loss_and_gradient(const Mlp<Scalar>& model, const MatrixT<Scalar>& x, const MatrixT<Scalar>& y,
                         const TrainConfig& cfg, Workspace<Scalar>& ws, Mlp<Scalar>* grad) {
  check_batch(model, x, y);
  forward_all(model, x, ws);
  const int layers = model.layer_count();
  const double n = static_cast<double>(x.cols());
  const double outputs = static_cast<double>(y.rows());
  const auto& pred = ws.acts.back();

  const MatrixT<Scalar> residual = pred - y;
  double loss = residual.template cast<double>().squaredNorm() / (n * outputs);
  for (int l = 0; l + 1 < layers; ++l) {
    const auto w = model.weight(l).template cast<double>();
    loss += cfg.l1_kernel * w.cwiseAbs().sum() + cfg.l2_kernel * w.squaredNorm() +
            cfg.l2_bias * model.bias(l).template cast<double>().squaredNorm();
    if (cfg.activity_target == ActivityTarget::kHidden) {
      loss += cfg.l2_activity * ws.acts[static_cast<std::size_t>(l + 1)].template cast<double>().squaredNorm() / n;
    }
  }
  if (cfg.activity_target == ActivityTarget::kOutput) {
    loss += cfg.l2_activity * pred.template cast<double>().squaredNorm() / n;
  }
  if (!grad) return loss;

  ws.delta = residual * static_cast<Scalar>(2.0 / (n * outputs));
  if (cfg.activity_target == ActivityTarget::kOutput) {
    ws.delta += pred * static_cast<Scalar>(2.0 * cfg.l2_activity / n);
  }
  for (int l = layers - 1; l >= 0; --l) {
    const auto& a_in = ws.acts[static_cast<std::size_t>(l)];
    grad->weight(l).noalias() = ws.delta * a_in.transpose();
    grad->bias(l) = ws.delta.rowwise().sum();
    if (l + 1 < layers) {
      const auto& w = model.weight(l);
      grad->weight(l) += static_cast<Scalar>(cfg.l1_kernel) * w.unaryExpr([](Scalar v) {
        return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0));
      });
      grad->weight(l) += static_cast<Scalar>(2.0 * cfg.l2_kernel) * w;
      grad->bias(l) += static_cast<Scalar>(2.0 * cfg.l2_bias) * model.bias(l);
    }
    if (l == 0) break;
    // Back through the sigmoid of layer l-1.
    ws.next_delta.noalias() = model.weight(l).transpose() * ws.delta;
    if (cfg.activity_target == ActivityTarget::kHidden) {
      ws.next_delta += a_in * static_cast<Scalar>(2.0 * cfg.l2_activity / n);
    }
    ws.next_delta.array() *= a_in.array() * (Scalar(1) - a_in.array());
    std::swap(ws.delta, ws.next_delta);
  }
  return loss;
}

template <class Scalar>
TrainResult train_impl(Mlp<Scalar>& model, const MatrixT<Scalar>& x, const MatrixT<Scalar>& y,
                       const TrainConfig& cfg) {
  const Eigen::Index n = x.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(derive_seed(cfg.seed, "mlp/shuffle"));
  AdamState<Scalar> adam = AdamState<Scalar>::like(model);
  Mlp<Scalar> grad = Mlp<Scalar>::zeros(model.sizes());
  Workspace<Scalar> ws;
  MatrixT<Scalar> xb, yb;

  TrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double total = 0.0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index m = std::min<Eigen::Index>(cfg.batch_size, n - start);
      xb.resize(x.rows(), m);
      yb.resize(y.rows(), m);
      for (Eigen::Index k = 0; k < m; ++k) {
        xb.col(k) = x.col(order[static_cast<std::size_t>(start + k)]);
        yb.col(k) = y.col(order[static_cast<std::size_t>(start + k)]);
      }
      total += loss_and_gradient(model, xb, yb, cfg, ws, &grad) * static_cast<double>(m);
      adam_step(model, adam, grad, cfg);
    }
    result.loss_history.push_back(total / static_cast<double>(n));
  }
  if (!model.all_finite()) {
    throw Error(ErrorCategory::kNonFiniteState, "training diverged to non-finite parameters");
  }
  return result;
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCategory::kInvalidArgument, "train: " + what); };
  if (!(learning_rate > 0.0)) fail("learning rate must be positive");
  if (epochs < 0) fail("epochs must be non-negative");
  if (batch_size <= 0) fail("batch size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) fail("Adam epsilon must be positive");
  if (l1_kernel < 0.0 || l2_kernel < 0.0 || l2_bias < 0.0 || l2_activity < 0.0) {
    fail("regularization factors must be non-negative");
  }
}

TrainConfig TrainConfig::unregularized() const {
  TrainConfig c = *this;
  c.l1_kernel = c.l2_kernel = c.l2_bias = c.l2_activity = 0.0;
  return c;
}

template <class Scalar>
Mlp<Scalar> Mlp<Scalar>::zeros(const std::vector<int>& layer_sizes) {
  if (layer_sizes.size() < 3) {
    throw Error(ErrorCategory::kEmptyNetwork, "network needs an input, at least one hidden and an output layer");
  }
  for (int s : layer_sizes) {
    if (s <= 0) throw Error(ErrorCategory::kEmptyNetwork, "layer sizes must be positive");
  }
  Mlp m;
  m.sizes_ = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    m.weights_.push_back(Matrix::Zero(layer_sizes[l + 1], layer_sizes[l]));
    m.biases_.push_back(Vector::Zero(layer_sizes[l + 1]));
  }
  return m;
}

template <class Scalar>
Mlp<Scalar> Mlp<Scalar>::init(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  Mlp m = zeros(layer_sizes);
  Rng rng(derive_seed(seed, "mlp/init"));
  for (auto& w : m.weights_) {
    const double limit = std::sqrt(3.0 / static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = static_cast<Scalar>(rng.uniform(-limit, limit));
    }
  }
  return m;
}

template <class Scalar>
std::size_t Mlp<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  }
  return n;
}

template <class Scalar>
typename Mlp<Scalar>::Matrix Mlp<Scalar>::forward(const Matrix& x) const {
  if (x.rows() != input_size()) {
    throw Error(ErrorCategory::kDimensionMismatch,
                "forward: input has " + std::to_string(x.rows()) + " features, model expects " +
                    std::to_string(input_size()));
  }
  Workspace<Scalar> ws;
  forward_all(*this, x, ws);
  return ws.acts.back();
}

template <class Scalar>
typename Mlp<Scalar>::Vector Mlp<Scalar>::forward(const Vector& x) const {
  return forward(Matrix(x)).col(0);
}

template <class Scalar>
std::vector<double> Mlp<Scalar>::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const auto& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(static_cast<double>(w(r, c)));
    }
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) flat.push_back(static_cast<double>(biases_[l][r]));
  }
  return flat;
}

template <class Scalar>
void Mlp<Scalar>::unflatten(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw Error(ErrorCategory::kDimensionMismatch, "unflatten: parameter count mismatch");
  }
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    auto& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = static_cast<Scalar>(flat[k++]);
    }
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) biases_[l][r] = static_cast<Scalar>(flat[k++]);
  }
}

template <class Scalar>
template <class Other>
Mlp<Other> Mlp<Scalar>::cast() const {
  Mlp<Other> out;
  out.sizes_ = sizes_;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.weights_.push_back(weights_[l].template cast<Other>());
    out.biases_.push_back(biases_[l].template cast<Other>());
  }
  return out;
}

template <class Scalar>
bool Mlp<Scalar>::all_finite() const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
  }
  return true;
}

template <class Scalar>
AdamState<Scalar> AdamState<Scalar>::like(const Mlp<Scalar>& model) {
  AdamState s;
  s.m = Mlp<Scalar>::zeros(model.sizes());
  s.v = Mlp<Scalar>::zeros(model.sizes());
  return s;
}

template <class Scalar>
double loss(const Mlp<Scalar>& model, const typename Mlp<Scalar>::Matrix& x,
            const typename Mlp<Scalar>::Matrix& y, const TrainConfig& config) {
  Workspace<Scalar> ws;
  return loss_and_gradient<Scalar>(model, x, y, config, ws, nullptr);
}

template <class Scalar>
Mlp<Scalar> gradient(const Mlp<Scalar>& model, const typename Mlp<Scalar>::Matrix& x,
                     const typename Mlp<Scalar>::Matrix& y, const TrainConfig& config) {
  Workspace<Scalar> ws;
  Mlp<Scalar> grad = Mlp<Scalar>::zeros(model.sizes());
  loss_and_gradient<Scalar>(model, x, y, config, ws, &grad);
  return grad;
}

template <class Scalar>
void adam_step(Mlp<Scalar>& model, AdamState<Scalar>& s, const Mlp<Scalar>& g, const TrainConfig& cfg) {
  if (g.sizes() != model.sizes() || s.m.sizes() != model.sizes()) {
    throw Error(ErrorCategory::kDimensionMismatch, "adam: gradient shape does not match the model");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
  const auto b1 = static_cast<Scalar>(cfg.beta1), b2 = static_cast<Scalar>(cfg.beta2);
  const auto lr = static_cast<Scalar>(cfg.learning_rate);
  const auto eps = static_cast<Scalar>(cfg.epsilon);
  const auto inv_c1 = static_cast<Scalar>(1.0 / c1), inv_sqrt_c2 = static_cast<Scalar>(1.0 / std::sqrt(c2));
  auto update = [&](auto& p, auto& m, auto& v, const auto& gr) {
    m.array() = b1 * m.array() + (Scalar(1) - b1) * gr.array();
    v.array() = b2 * v.array() + (Scalar(1) - b2) * gr.array().square();
    p.array() -= lr * (m.array() * inv_c1) / ((v.array().sqrt() * inv_sqrt_c2) + eps);
  };
  for (int l = 0; l < model.layer_count(); ++l) {
    update(model.weight(l), s.m.weight(l), s.v.weight(l), g.weight(l));
    update(model.bias(l), s.m.bias(l), s.v.bias(l), g.bias(l));
  }
}

TrainResult train(Mlp<double>& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                  const TrainConfig& config) {
  config.validate();
  if (x.cols() == 0) throw Error(ErrorCategory::kEmptyDataset, "train: empty dataset");
  if (x.rows() != model.input_size() || y.rows() != model.output_size() || x.cols() != y.cols()) {
    throw Error(ErrorCategory::kDimensionMismatch, "train: data shape does not match the model");
  }
  if (config.precision == Precision::kDouble) return train_impl<double>(model, x, y, config);
  Mlp<float> m = model.cast<float>();
  const Eigen::MatrixXf xf = x.cast<float>();
  const Eigen::MatrixXf yf = y.cast<float>();
  TrainResult r = train_impl<float>(m, xf, yf, config);
  model = m.cast<double>();
  return r;
}

void write_model(std::ostream& os, const Mlp<double>& model) {
  os.write(kModelMagic, sizeof(kModelMagic));
  write_u32(os, static_cast<std::uint32_t>(model.sizes().size()));
  for (int s : model.sizes()) write_u32(os, static_cast<std::uint32_t>(s));
  const auto flat = model.flatten();
  write_u64(os, flat.size());
  for (double v : flat) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    write_u64(os, bits);
  }
}

Mlp<double> read_model(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kModelMagic, 8) != 0) {
    throw Error(ErrorCategory::kSchemaMismatch, "not a model checkpoint (bad magic or version)");
  }
  const std::uint32_t count = read_u32(is);
  if (count < 3 || count > 64) throw Error(ErrorCategory::kSchemaMismatch, "model checkpoint: bad layer count");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < count; ++i) sizes.push_back(static_cast<int>(read_u32(is)));
  Mlp<double> model = Mlp<double>::zeros(sizes);
  const std::uint64_t n = read_u64(is);
  if (n != model.parameter_count()) throw Error(ErrorCategory::kSchemaMismatch, "model checkpoint: parameter count mismatch");
  std::vector<double> flat(n);
  for (auto& v : flat) {
    const std::uint64_t bits = read_u64(is);
    std::memcpy(&v, &bits, sizeof(v));
  }
  model.unflatten(flat);
  return model;
}

void save_model(const Mlp<double>& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCategory::kIoError, "cannot write model: " + path.string());
  write_model(os, model);
  if (!os) throw Error(ErrorCategory::kIoError, "write failed: " + path.string());
}

Mlp<double> load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCategory::kMissingDataset, "cannot open model checkpoint: " + path.string());
  return read_model(is);
}

template class Mlp<float>;
template class Mlp<double>;
template Mlp<double> Mlp<float>::cast<double>() const;
template Mlp<float> Mlp<double>::cast<float>() const;
template double loss<float>(const Mlp<float>&, const Mlp<float>::Matrix&, const Mlp<float>::Matrix&, const TrainConfig&);
template double loss<double>(const Mlp<double>&, const Mlp<double>::Matrix&, const Mlp<double>::Matrix&, const TrainConfig&);
template Mlp<float> gradient<float>(const Mlp<float>&, const Mlp<float>::Matrix&, const Mlp<float>::Matrix&, const TrainConfig&);
template Mlp<double> gradient<double>(const Mlp<double>&, const Mlp<double>::Matrix&, const Mlp<double>::Matrix&, const TrainConfig&);
template void adam_step<float>(Mlp<float>&, AdamState<float>&, const Mlp<float>&, const TrainConfig&);
template void adam_step<double>(Mlp<double>&, AdamState<double>&, const Mlp<double>&, const TrainConfig&);
template struct AdamState<float>;
template struct AdamState<double>;

}  // namespace cablecal
