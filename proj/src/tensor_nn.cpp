#include "tensor_nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "error.hpp"
#include "graph_io.hpp"

namespace diagram::nn {

namespace {

std::string shape_of(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

void check_input(const LinearLayer& layer, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<std::size_t>(cols) != layer.in_dim())
    fail(ErrorCode::shape, "layer expects input width " + std::to_string(layer.in_dim()) + " (weight " +
                               shape_of(layer.weight.rows(), layer.weight.cols()) + "), got input " +
                               shape_of(rows, cols));
}

void activate(Matrix& z, Activation act) {
  if (act == Activation::tanh) z = z.array().tanh().matrix();
}

// dL/dz from dL/dy for y = act(z).
Matrix pre_activation_grad(Activation act, const Matrix& y, const Matrix& dy) {
  if (act == Activation::identity) return dy;
  return (dy.array() * (1.0 - y.array().square())).matrix();
}

}  // namespace

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) return 0;
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do x = engine_();
  while (x >= limit);
  return x % bound;
}

LinearLayer LinearLayer::zeros(std::size_t in, std::size_t out, Activation act) {
  return {Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
          Matrix::Zero(1, static_cast<Eigen::Index>(out)), act};
}

LinearLayer LinearLayer::glorot(std::size_t in, std::size_t out, Rng& rng, Activation act) {
  LinearLayer l = zeros(in, out, act);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = (2.0 * rng.uniform() - 1.0) * limit;
  return l;
}

Matrix forward_layer(const LinearLayer& layer, const Matrix& x) {
  check_input(layer, x.rows(), x.cols());
  Matrix z(x.rows(), layer.weight.rows());
  z.noalias() = x * layer.weight.transpose();
  z.rowwise() += layer.bias.row(0);
  activate(z, layer.activation);
  return z;
}

Matrix forward_layer(const LinearLayer& layer, const SparseBatch& x) {
  check_input(layer, x.rows(), x.cols());
  Matrix z(x.rows(), layer.weight.rows());
  z.noalias() = x * layer.weight.transpose();
  z.rowwise() += layer.bias.row(0);
  activate(z, layer.activation);
  return z;
}

Matrix backward_layer(const LinearLayer& layer, const Matrix& x, const Matrix& y, const Matrix& dy, LayerGrad& grad) {
  check_input(layer, x.rows(), x.cols());
  Matrix dz = pre_activation_grad(layer.activation, y, dy);
  grad.weight.noalias() += dz.transpose() * x;
  grad.bias += dz.colwise().sum();
  Matrix dx(x.rows(), x.cols());
  dx.noalias() = dz * layer.weight;
  return dx;
}

void backward_layer(const LinearLayer& layer, const SparseBatch& x, const Matrix& y, const Matrix& dy,
                    LayerGrad& grad) {
  check_input(layer, x.rows(), x.cols());
  Matrix dz = pre_activation_grad(layer.activation, y, dy);
  // Only columns present in the batch receive weight gradient.
  for (Eigen::Index r = 0; r < x.outerSize(); ++r) {
    for (SparseBatch::InnerIterator it(x, r); it; ++it)
      grad.weight.col(it.col()).noalias() += it.value() * dz.row(r).transpose();
  }
  grad.bias += dz.colwise().sum();
}

LossResult masked_sq_error(const Matrix& pred, const Matrix& target, const Matrix& weight) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || pred.rows() != weight.rows() ||
      pred.cols() != weight.cols())
    fail(ErrorCode::shape, "masked_sq_error shapes differ: pred " + shape_of(pred.rows(), pred.cols()) + ", target " +
                               shape_of(target.rows(), target.cols()) + ", weight " +
                               shape_of(weight.rows(), weight.cols()));
  LossResult r;
  auto diff = (pred - target).array();
  r.loss = (diff * weight.array()).square().sum();
  r.grad = (2.0 * diff * weight.array().square()).matrix();
  return r;
}

Matrix apply_dropout(const Matrix& x, double rate, Rng& rng, bool training, Matrix* mask) {
  if (!(rate >= 0.0) || rate >= 1.0) fail(ErrorCode::invalid_argument, "dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) {
    if (mask) *mask = Matrix::Ones(x.rows(), x.cols());
    return x;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix m(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  Matrix out = (x.array() * m.array()).matrix();
  if (mask) *mask = std::move(m);
  return out;
}

void AdamOptimizer::step(std::span<const ParamSlot> params) {
  if (first_.empty()) {
    for (const auto& p : params) {
      first_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      second_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    }
  }
  if (first_.size() != params.size()) fail(ErrorCode::shape, "optimizer parameter count changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.value->rows() != p.grad->rows() || p.value->cols() != p.grad->cols() || first_[i].rows() != p.value->rows() ||
        first_[i].cols() != p.value->cols())
      fail(ErrorCode::shape, "optimizer shape mismatch for parameter '" + p.name + "'");
    if (!p.grad->allFinite()) fail(ErrorCode::numeric, "non-finite gradient for parameter '" + p.name + "'");
  }

  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.learning_rate, eps = config_.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value->array();
    auto g = params[i].grad->array();
    auto m = first_[i].array();
    auto v = second_[i].array();
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.square();
    w -= lr * (m / c1) / ((v / c2).sqrt() + eps);
  }
}

double finite_diff_check(const std::function<double()>& loss, std::span<const ParamSlot> params, double eps,
                         std::size_t samples, std::uint64_t seed) {
  std::vector<std::pair<std::size_t, Eigen::Index>> coords;
  std::size_t total = 0;
  for (const auto& p : params) total += static_cast<std::size_t>(p.value->size());
  if (samples == 0 || samples >= total) {
    for (std::size_t i = 0; i < params.size(); ++i)
      for (Eigen::Index j = 0; j < params[i].value->size(); ++j) coords.emplace_back(i, j);
  } else {
    Rng rng(seed);
    for (std::size_t s = 0; s < samples; ++s) {
      auto flat = rng.below(total);
      std::size_t i = 0;
      while (flat >= static_cast<std::uint64_t>(params[i].value->size())) flat -= params[i++].value->size();
      coords.emplace_back(i, static_cast<Eigen::Index>(flat));
    }
  }
  double worst = 0.0;
  for (auto [i, j] : coords) {
    double& w = params[i].value->data()[j];
    const double saved = w;
    w = saved + eps;
    const double up = loss();
    w = saved - eps;
    const double down = loss();
    w = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = params[i].grad->data()[j];
    const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kCheckpointMagic[8] = {'D', 'G', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), sizeof v); }
void put_u64(std::string& out, std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), sizeof v); }
void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}
  void read(void* dst, std::size_t n) {
    if (pos_ + n > data_.size()) fail(ErrorCode::parse, "truncated checkpoint '" + path_ + "'");
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    read(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    read(&v, sizeof v);
    return v;
  }
  std::string str() {
    auto n = u32();
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

const Matrix& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  fail(ErrorCode::mismatch, "checkpoint has no tensor '" + name + "'");
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_u64(out, ckpt.seed);
  put_u32(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    put_str(out, k);
    put_str(out, v);
  }
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    put_str(out, t.name);
    put_u64(out, static_cast<std::uint64_t>(t.value.rows()));
    put_u64(out, static_cast<std::uint64_t>(t.value.cols()));
    out.append(reinterpret_cast<const char*>(t.value.data()), sizeof(double) * static_cast<std::size_t>(t.value.size()));
  }
  io::write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  Reader r(buf.str(), path);
  char magic[8];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) fail(ErrorCode::parse, "'" + path + "' is not a checkpoint");
  auto version = r.u32();
  if (version != kCheckpointVersion)
    fail(ErrorCode::mismatch, "checkpoint version " + std::to_string(version) + " is not supported");
  Checkpoint ckpt;
  ckpt.seed = r.u64();
  auto meta = r.u32();
  for (std::uint32_t i = 0; i < meta; ++i) {
    auto k = r.str();
    ckpt.metadata[k] = r.str();
  }
  auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str();
    auto rows = r.u64();
    auto cols = r.u64();
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) fail(ErrorCode::parse, "corrupt tensor shape in '" + path + "'");
    t.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    r.read(t.value.data(), sizeof(double) * rows * cols);
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) fail(ErrorCode::parse, "trailing bytes in checkpoint '" + path + "'");
  return ckpt;
}

}  // namespace diagram::nn
