#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace diagram::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseBatch = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Seeded generator with a portable uniform draw (53 random mantissa bits).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::uint64_t next() { return engine_(); }
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

enum class Activation { tanh, identity };

struct LinearLayer {
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out
  Activation activation = Activation::tanh;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }

  static LinearLayer zeros(std::size_t in, std::size_t out, Activation act = Activation::tanh);
  // Glorot-uniform weights in +-sqrt(6/(in+out)), zero bias.
  static LinearLayer glorot(std::size_t in, std::size_t out, Rng& rng, Activation act = Activation::tanh);
};

struct LayerGrad {
  Matrix weight;
  Matrix bias;

  LayerGrad() = default;
  explicit LayerGrad(const LinearLayer& layer)
      : weight(Matrix::Zero(layer.weight.rows(), layer.weight.cols())),
        bias(Matrix::Zero(1, layer.bias.cols())) {}
  void zero() {
    weight.setZero();
    bias.setZero();
  }
};

// act(x W^T + b), one output row per input row.
Matrix forward_layer(const LinearLayer& layer, const Matrix& x);
Matrix forward_layer(const LinearLayer& layer, const SparseBatch& x);

// Given the layer input `x`, its output `y` and dL/dy, accumulates the
// parameter gradients into `grad` and returns dL/dx.
Matrix backward_layer(const LinearLayer& layer, const Matrix& x, const Matrix& y, const Matrix& dy, LayerGrad& grad);
// Same, for a sparse input batch; the input gradient is not formed.
void backward_layer(const LinearLayer& layer, const SparseBatch& x, const Matrix& y, const Matrix& dy, LayerGrad& grad);

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // dL/dpred
};

// loss = sum(((pred - target) * weight)^2), grad = 2 (pred - target) * weight^2.
LossResult masked_sq_error(const Matrix& pred, const Matrix& target, const Matrix& weight);

// Inverted dropout. In training mode each element is zeroed with probability
// `rate` and survivors are scaled by 1/(1-rate); the applied multipliers are
// written to `mask` when given. Inference mode returns `x` unchanged.
Matrix apply_dropout(const Matrix& x, double rate, Rng& rng, bool training, Matrix* mask = nullptr);

struct ParamSlot {
  std::string name;
  Matrix* value = nullptr;
  const Matrix* grad = nullptr;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig config = {}) : config_(config) {}

  // Bias-corrected adaptive-moment update of every slot. Throws before
  // touching any parameter if a gradient is non-finite.
  void step(std::span<const ParamSlot> params);

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
};

// Central-difference gradient check. `loss` must recompute the loss from the
// current parameter values; each slot's `grad` holds the analytic gradient.
// Checks `samples` random coordinates (all of them when samples == 0) and
// returns max |g_a - g_n| / max(1, |g_a|, |g_n|).
double finite_diff_check(const std::function<double()>& loss, std::span<const ParamSlot> params, double eps = 1e-5,
                         std::size_t samples = 0, std::uint64_t seed = 0);

struct NamedTensor {
  std::string name;
  Matrix value;
};

struct Checkpoint {
  std::uint64_t seed = 0;
  std::map<std::string, std::string> metadata;
  std::vector<NamedTensor> tensors;

  const Matrix& tensor(const std::string& name) const;
};

// Versioned little-endian binary container; values are stored bit-exact.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace diagram::nn
