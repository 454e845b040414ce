#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graph_io.hpp"
#include "tensor_nn.hpp"

namespace diagram::model {

using nn::LayerGrad;
using nn::LinearLayer;
using nn::Matrix;
using nn::SparseBatch;

// content: z from concat(A_u, D_u); out: o from M_u; in: i from M^T_u.
enum class Channel : std::size_t { content = 0, out = 1, in = 2 };
inline constexpr std::array<Channel, 3> kChannels{Channel::content, Channel::out, Channel::in};
const char* to_string(Channel c);

struct Architecture {
  std::size_t node_count = 0;
  std::size_t feature_dim = 0;
  std::vector<std::size_t> encoder_dims{512, 256};
  std::size_t embedding_dim = 128;
  std::vector<std::size_t> decoder_dims{256, 512};

  std::size_t input_dim(Channel c) const { return c == Channel::content ? node_count + feature_dim : node_count; }
  std::size_t output_dim(Channel c) const { return input_dim(c); }
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

// Channel-specific input and reconstruction heads around one shared trunk.
// Layer chain for channel c:
//   input_heads[c]: in_c -> enc[0]; encoder_trunk: enc[i] -> enc[i+1];
//   embed: enc.back() -> k; decoder_trunk: k -> dec[0], dec[i] -> dec[i+1];
//   recon_heads[c]: dec.back() -> out_c.
struct ModelParams {
  Architecture arch;
  std::array<LinearLayer, 3> input_heads;
  std::vector<LinearLayer> encoder_trunk;
  LinearLayer embed;
  std::vector<LinearLayer> decoder_trunk;
  std::array<LinearLayer, 3> recon_heads;

  static ModelParams glorot(const Architecture& arch, std::uint64_t seed);
  static ModelParams zeros(const Architecture& arch);

  // Visits every tensor with a stable name, in a fixed order.
  void for_each_tensor(const std::function<void(const std::string&, Matrix&)>& f);
  void for_each_tensor(const std::function<void(const std::string&, const Matrix&)>& f) const;

  nn::Checkpoint to_checkpoint(std::uint64_t seed, std::map<std::string, std::string> metadata = {}) const;
  static ModelParams from_checkpoint(const nn::Checkpoint& ckpt);
};

// Read-only view of the layers one channel runs through. The trunk members
// refer to the same storage for every channel.
struct ChannelView {
  const LinearLayer& input_head;
  const std::vector<LinearLayer>& encoder_trunk;
  const LinearLayer& embed;
  const std::vector<LinearLayer>& decoder_trunk;
  const LinearLayer& recon_head;
};
ChannelView channel_view(const ModelParams& params, Channel c);

struct ModelGrads {
  std::array<LayerGrad, 3> input_heads;
  std::vector<LayerGrad> encoder_trunk;
  LayerGrad embed;
  std::vector<LayerGrad> decoder_trunk;
  std::array<LayerGrad, 3> recon_heads;

  explicit ModelGrads(const ModelParams& params);
  void zero();
  // Parameter/gradient pairs in for_each_tensor order.
  std::vector<nn::ParamSlot> slots(ModelParams& params);
};

struct Regime {
  double dropout = 0.0;
  nn::Rng* rng = nullptr;
  bool training = false;
};

// Activations recorded by one channel forward pass.
struct ChannelTape {
  Channel channel = Channel::content;
  SparseBatch input;
  std::vector<Matrix> encoder;       // post-dropout outputs of input head and encoder trunk
  std::vector<Matrix> encoder_raw;   // pre-dropout outputs (tanh values)
  std::vector<Matrix> dropout_mask;  // multipliers applied to encoder_raw
  Matrix embedding;
  std::vector<Matrix> decoder;
  Matrix reconstruction;
};

ChannelTape channel_forward(const ModelParams& params, Channel c, SparseBatch x, const Regime& regime = {});
// Backpropagates dL/d(reconstruction) through the channel, accumulating into grads.
void channel_backward(const ModelParams& params, const ChannelTape& tape, const Matrix& d_reconstruction,
                      ModelGrads& grads);

// Per-node inputs/targets: content rows concat(A_u, D_u), out rows M_u, in rows M^T_u.
struct TrainingData {
  io::SparseMatrix content;
  io::SparseMatrix out;
  io::SparseMatrix in;
  const io::DirectedGraph* graph = nullptr;

  static TrainingData build(const io::DirectedGraph& g, const io::FeatureMatrix& f);
  const io::SparseMatrix& rows(Channel c) const;
  std::size_t node_count() const { return out.rows; }
  std::size_t feature_dim() const { return content.cols - out.rows; }
};

SparseBatch gather_rows(const io::SparseMatrix& m, std::span<const io::NodeIndex> rows);
Matrix dense_rows(const io::SparseMatrix& m, std::span<const io::NodeIndex> rows);

// s_j = mu on the support of the target, 1 elsewhere.
Matrix weighting(const Matrix& target, double mu);

struct LossTerms {
  double content = 0.0;
  double out = 0.0;
  double in = 0.0;
  double adjusted = 0.0;  // edge model: ||(M^T_v - M~_u) . s||^2
  double total() const { return content + out + in + adjusted; }
};

// Sum over `nodes` of L_C + L_O + L_I. Gradients are accumulated when `grads` is set.
LossTerms node_loss(const ModelParams& params, const TrainingData& data, std::span<const io::NodeIndex> nodes,
                    double mu, ModelGrads* grads = nullptr, const Regime& regime = {});

// For each edge (u,v): the node loss of u and v, with u's in-channel term
// replaced by the adjusted term comparing u's out reconstruction against
// M^T_v. With adjust == false this equals node_loss(u) + node_loss(v).
LossTerms edge_loss(const ModelParams& params, const TrainingData& data, std::span<const io::Edge> edges, double mu,
                    bool adjust = true, ModelGrads* grads = nullptr, const Regime& regime = {});

struct EmbeddingSet {
  Matrix z;
  Matrix o;
  Matrix i;
  std::vector<std::string> node_ids;
  std::string mode = "node";
  std::string config_fingerprint;
  std::string dataset_fingerprint;

  std::size_t node_count() const { return static_cast<std::size_t>(z.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(z.cols()); }
};

// Runs all three channels over every node in inference mode.
EmbeddingSet compute_embeddings(const ModelParams& params, const TrainingData& data, std::size_t batch_size = 256);

struct TrainConfig {
  std::optional<std::size_t> epochs;  // node: 30; edge: 2 with transfer, 30 without
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  double dropout = 0.2;
  double mu = 10.0;
  std::uint64_t seed = 1;
  Architecture arch;  // node_count / feature_dim are filled from the data
  bool track_edge_loss = false;  // record inference-mode mean edge loss per epoch
  std::function<void(const struct EpochStats&)> on_epoch;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss_sum = 0.0;
  double mean_loss = 0.0;  // per node (node model) or per edge (edge model)
  double eval_edge_loss = -1.0;  // set when TrainConfig::track_edge_loss
  double seconds = 0.0;
};

struct TrainResult {
  ModelParams params;
  EmbeddingSet embeddings;
  std::vector<EpochStats> trace;
  std::size_t epochs = 0;
};

TrainResult train_node_model(const io::DirectedGraph& g, const io::FeatureMatrix& f, const TrainConfig& cfg);
TrainResult train_edge_model(const io::DirectedGraph& g, const io::FeatureMatrix& f, const TrainConfig& cfg,
                             const ModelParams* transfer_from = nullptr);

// Mean over all edges of the edge loss in inference mode.
double mean_edge_loss(const ModelParams& params, const TrainingData& data, double mu, std::size_t batch_size = 64);

}  // namespace diagram::model
