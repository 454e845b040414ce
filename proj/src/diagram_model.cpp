#include "diagram_model.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "error.hpp"

namespace diagram::model {

namespace {

std::size_t idx(Channel c) { return static_cast<std::size_t>(c); }

std::string join_dims(const std::vector<std::size_t>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
  return s;
}

std::vector<std::size_t> parse_dims(const std::string& text) {
  std::vector<std::size_t> dims;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) dims.push_back(std::stoull(tok));
  return dims;
}

const std::string& meta(const nn::Checkpoint& ckpt, const std::string& key) {
  auto it = ckpt.metadata.find(key);
  if (it == ckpt.metadata.end()) fail(ErrorCode::mismatch, "checkpoint metadata lacks '" + key + "'");
  return it->second;
}

template <typename Layer, typename F>
void visit_layers(Layer&& p, F&& f) {
  for (auto c : kChannels) f("input_head." + std::string(to_string(c)), p.input_heads[idx(c)]);
  for (std::size_t i = 0; i < p.encoder_trunk.size(); ++i) f("encoder." + std::to_string(i), p.encoder_trunk[i]);
  f(std::string("embed"), p.embed);
  for (std::size_t i = 0; i < p.decoder_trunk.size(); ++i) f("decoder." + std::to_string(i), p.decoder_trunk[i]);
  for (auto c : kChannels) f("recon_head." + std::string(to_string(c)), p.recon_heads[idx(c)]);
}

}  // namespace

const char* to_string(Channel c) {
  switch (c) {
    case Channel::content: return "content";
    case Channel::out: return "out";
    case Channel::in: return "in";
  }
  return "?";
}

void Architecture::validate() const {
  if (node_count == 0) fail(ErrorCode::invalid_argument, "architecture needs at least one node");
  if (encoder_dims.empty() || decoder_dims.empty())
    fail(ErrorCode::invalid_argument, "encoder and decoder need at least one layer");
  if (embedding_dim == 0) fail(ErrorCode::invalid_argument, "embedding dimension must be positive");
  for (auto d : encoder_dims)
    if (d == 0) fail(ErrorCode::invalid_argument, "encoder widths must be positive");
  for (auto d : decoder_dims)
    if (d == 0) fail(ErrorCode::invalid_argument, "decoder widths must be positive");
}

// ---------------------------------------------------------------- parameters

ModelParams ModelParams::glorot(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  nn::Rng rng(seed);
  ModelParams p;
  p.arch = arch;
  for (auto c : kChannels) p.input_heads[idx(c)] = LinearLayer::glorot(arch.input_dim(c), arch.encoder_dims.front(), rng);
  for (std::size_t i = 0; i + 1 < arch.encoder_dims.size(); ++i)
    p.encoder_trunk.push_back(LinearLayer::glorot(arch.encoder_dims[i], arch.encoder_dims[i + 1], rng));
  p.embed = LinearLayer::glorot(arch.encoder_dims.back(), arch.embedding_dim, rng);
  std::size_t prev = arch.embedding_dim;
  for (auto d : arch.decoder_dims) {
    p.decoder_trunk.push_back(LinearLayer::glorot(prev, d, rng));
    prev = d;
  }
  for (auto c : kChannels) p.recon_heads[idx(c)] = LinearLayer::glorot(prev, arch.output_dim(c), rng);
  return p;
}

ModelParams ModelParams::zeros(const Architecture& arch) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  for (auto c : kChannels) p.input_heads[idx(c)] = LinearLayer::zeros(arch.input_dim(c), arch.encoder_dims.front());
  for (std::size_t i = 0; i + 1 < arch.encoder_dims.size(); ++i)
    p.encoder_trunk.push_back(LinearLayer::zeros(arch.encoder_dims[i], arch.encoder_dims[i + 1]));
  p.embed = LinearLayer::zeros(arch.encoder_dims.back(), arch.embedding_dim);
  std::size_t prev = arch.embedding_dim;
  for (auto d : arch.decoder_dims) {
    p.decoder_trunk.push_back(LinearLayer::zeros(prev, d));
    prev = d;
  }
  for (auto c : kChannels) p.recon_heads[idx(c)] = LinearLayer::zeros(prev, arch.output_dim(c));
  return p;
}

void ModelParams::for_each_tensor(const std::function<void(const std::string&, Matrix&)>& f) {
  visit_layers(*this, [&](const std::string& name, LinearLayer& l) {
    f(name + ".weight", l.weight);
    f(name + ".bias", l.bias);
  });
}

void ModelParams::for_each_tensor(const std::function<void(const std::string&, const Matrix&)>& f) const {
  visit_layers(*this, [&](const std::string& name, const LinearLayer& l) {
    f(name + ".weight", l.weight);
    f(name + ".bias", l.bias);
  });
}

nn::Checkpoint ModelParams::to_checkpoint(std::uint64_t seed, std::map<std::string, std::string> metadata) const {
  nn::Checkpoint ckpt;
  ckpt.seed = seed;
  ckpt.metadata = std::move(metadata);
  ckpt.metadata["arch.node_count"] = std::to_string(arch.node_count);
  ckpt.metadata["arch.feature_dim"] = std::to_string(arch.feature_dim);
  ckpt.metadata["arch.encoder_dims"] = join_dims(arch.encoder_dims);
  ckpt.metadata["arch.embedding_dim"] = std::to_string(arch.embedding_dim);
  ckpt.metadata["arch.decoder_dims"] = join_dims(arch.decoder_dims);
  for_each_tensor([&](const std::string& name, const Matrix& m) { ckpt.tensors.push_back({name, m}); });
  return ckpt;
}

ModelParams ModelParams::from_checkpoint(const nn::Checkpoint& ckpt) {
  Architecture arch;
  try {
    arch.node_count = std::stoull(meta(ckpt, "arch.node_count"));
    arch.feature_dim = std::stoull(meta(ckpt, "arch.feature_dim"));
    arch.encoder_dims = parse_dims(meta(ckpt, "arch.encoder_dims"));
    arch.embedding_dim = std::stoull(meta(ckpt, "arch.embedding_dim"));
    arch.decoder_dims = parse_dims(meta(ckpt, "arch.decoder_dims"));
  } catch (const std::logic_error&) {
    fail(ErrorCode::parse, "checkpoint architecture metadata is malformed");
  }
  ModelParams p = zeros(arch);
  p.for_each_tensor([&](const std::string& name, Matrix& m) {
    const Matrix& stored = ckpt.tensor(name);
    if (stored.rows() != m.rows() || stored.cols() != m.cols())
      fail(ErrorCode::mismatch, "checkpoint tensor '" + name + "' has the wrong shape");
    m = stored;
  });
  return p;
}

ChannelView channel_view(const ModelParams& params, Channel c) {
  return {params.input_heads[idx(c)], params.encoder_trunk, params.embed, params.decoder_trunk,
          params.recon_heads[idx(c)]};
}

ModelGrads::ModelGrads(const ModelParams& p) : embed(p.embed) {
  for (auto c : kChannels) {
    input_heads[idx(c)] = LayerGrad(p.input_heads[idx(c)]);
    recon_heads[idx(c)] = LayerGrad(p.recon_heads[idx(c)]);
  }
  for (const auto& l : p.encoder_trunk) encoder_trunk.emplace_back(l);
  for (const auto& l : p.decoder_trunk) decoder_trunk.emplace_back(l);
}

void ModelGrads::zero() {
  visit_layers(*this, [](const std::string&, LayerGrad& g) { g.zero(); });
}

std::vector<nn::ParamSlot> ModelGrads::slots(ModelParams& params) {
  std::vector<const Matrix*> grads;
  visit_layers(*this, [&](const std::string&, LayerGrad& g) {
    grads.push_back(&g.weight);
    grads.push_back(&g.bias);
  });
  std::vector<nn::ParamSlot> out;
  params.for_each_tensor([&](const std::string& name, Matrix& m) {
    out.push_back({name, &m, grads[out.size()]});
  });
  return out;
}

// ------------------------------------------------------------ forward/backward

ChannelTape channel_forward(const ModelParams& params, Channel c, SparseBatch x, const Regime& regime) {
  const ChannelView view = channel_view(params, c);
  const bool drop = regime.training && regime.dropout > 0.0;
  if (drop && regime.rng == nullptr) fail(ErrorCode::invalid_argument, "dropout in training mode needs an rng");
  nn::Rng dummy(0);
  nn::Rng& rng = regime.rng ? *regime.rng : dummy;

  ChannelTape tape;
  tape.channel = c;
  tape.input = std::move(x);
  auto push_encoder = [&](Matrix h) {
    Matrix mask;
    Matrix kept = nn::apply_dropout(h, regime.dropout, rng, drop, &mask);
    tape.encoder_raw.push_back(std::move(h));
    tape.dropout_mask.push_back(std::move(mask));
    tape.encoder.push_back(std::move(kept));
  };
  push_encoder(nn::forward_layer(view.input_head, tape.input));
  for (const auto& layer : view.encoder_trunk) push_encoder(nn::forward_layer(layer, tape.encoder.back()));
  tape.embedding = nn::forward_layer(view.embed, tape.encoder.back());
  const Matrix* h = &tape.embedding;
  for (const auto& layer : view.decoder_trunk) {
    tape.decoder.push_back(nn::forward_layer(layer, *h));
    h = &tape.decoder.back();
  }
  tape.reconstruction = nn::forward_layer(view.recon_head, *h);
  return tape;
}

void channel_backward(const ModelParams& params, const ChannelTape& tape, const Matrix& d_reconstruction,
                      ModelGrads& grads) {
  const auto c = idx(tape.channel);
  const ChannelView view = channel_view(params, tape.channel);
  const Matrix& dec_last = tape.decoder.empty() ? tape.embedding : tape.decoder.back();
  Matrix d = nn::backward_layer(view.recon_head, dec_last, tape.reconstruction, d_reconstruction, grads.recon_heads[c]);
  for (std::size_t i = view.decoder_trunk.size(); i-- > 0;) {
    const Matrix& in = i == 0 ? tape.embedding : tape.decoder[i - 1];
    d = nn::backward_layer(view.decoder_trunk[i], in, tape.decoder[i], d, grads.decoder_trunk[i]);
  }
  d = nn::backward_layer(view.embed, tape.encoder.back(), tape.embedding, d, grads.embed);
  for (std::size_t i = view.encoder_trunk.size(); i-- > 0;) {
    d.array() *= tape.dropout_mask[i + 1].array();
    d = nn::backward_layer(view.encoder_trunk[i], tape.encoder[i], tape.encoder_raw[i + 1], d, grads.encoder_trunk[i]);
  }
  d.array() *= tape.dropout_mask[0].array();
  nn::backward_layer(view.input_head, tape.input, tape.encoder_raw[0], d, grads.input_heads[c]);
}

// ---------------------------------------------------------------- data

TrainingData TrainingData::build(const io::DirectedGraph& g, const io::FeatureMatrix& f) {
  if (f.rows() != g.node_count())
    fail(ErrorCode::shape, "feature matrix has " + std::to_string(f.rows()) + " rows for " +
                               std::to_string(g.node_count()) + " nodes");
  TrainingData data;
  data.graph = &g;
  data.out = g.out_adjacency();
  data.in = g.in_adjacency();
  const auto a = io::build_undirected_union(g);
  const auto n = g.node_count();
  auto& c = data.content;
  c = io::SparseMatrix::zeros(n, n + f.cols());
  for (std::size_t r = 0; r < n; ++r) {
    for (auto j : a.row_cols(r)) {
      c.col_idx.push_back(j);
      c.values.push_back(1.0);
    }
    auto fc = f.values.row_cols(r);
    auto fv = f.values.row_values(r);
    for (std::size_t k = 0; k < fc.size(); ++k) {
      c.col_idx.push_back(static_cast<std::uint32_t>(n + fc[k]));
      c.values.push_back(fv[k]);
    }
    c.row_ptr[r + 1] = c.col_idx.size();
  }
  return data;
}

const io::SparseMatrix& TrainingData::rows(Channel c) const {
  switch (c) {
    case Channel::content: return content;
    case Channel::out: return out;
    case Channel::in: return in;
  }
  return content;
}

SparseBatch gather_rows(const io::SparseMatrix& m, std::span<const io::NodeIndex> rows) {
  SparseBatch b(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.cols));
  std::size_t nnz = 0;
  for (auto r : rows) nnz += m.row_ptr[r + 1] - m.row_ptr[r];
  b.reserve(static_cast<Eigen::Index>(nnz));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.startVec(static_cast<Eigen::Index>(i));
    auto cols = m.row_cols(rows[i]);
    auto vals = m.row_values(rows[i]);
    for (std::size_t k = 0; k < cols.size(); ++k)
      b.insertBack(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cols[k])) = vals[k];
  }
  b.finalize();
  return b;
}

Matrix dense_rows(const io::SparseMatrix& m, std::span<const io::NodeIndex> rows) {
  Matrix d = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto cols = m.row_cols(rows[i]);
    auto vals = m.row_values(rows[i]);
    for (std::size_t k = 0; k < cols.size(); ++k) d(static_cast<Eigen::Index>(i), cols[k]) = vals[k];
  }
  return d;
}

Matrix weighting(const Matrix& target, double mu) {
  return (target.array() != 0.0).select(Matrix::Constant(target.rows(), target.cols(), mu), 1.0);
}

// ---------------------------------------------------------------- losses

namespace {

// Runs one channel over `rows`, scores it against the same rows' targets and
// optionally backpropagates. Returns the tape for callers that add terms.
struct ChannelPass {
  ChannelTape tape;
  nn::LossResult loss;
};

ChannelPass run_channel(const ModelParams& params, const TrainingData& data, Channel c,
                        std::span<const io::NodeIndex> rows, double mu, const Regime& regime) {
  ChannelPass pass;
  pass.tape = channel_forward(params, c, gather_rows(data.rows(c), rows), regime);
  Matrix target = dense_rows(data.rows(c), rows);
  pass.loss = nn::masked_sq_error(pass.tape.reconstruction, target, weighting(target, mu));
  return pass;
}

}  // namespace

LossTerms node_loss(const ModelParams& params, const TrainingData& data, std::span<const io::NodeIndex> nodes,
                    double mu, ModelGrads* grads, const Regime& regime) {
  for (auto u : nodes)
    if (u >= data.node_count()) fail(ErrorCode::invalid_argument, "node index " + std::to_string(u) + " out of range");
  LossTerms terms;
  for (auto c : kChannels) {
    auto pass = run_channel(params, data, c, nodes, mu, regime);
    (c == Channel::content ? terms.content : c == Channel::out ? terms.out : terms.in) = pass.loss.loss;
    if (grads) channel_backward(params, pass.tape, pass.loss.grad, *grads);
  }
  return terms;
}

LossTerms edge_loss(const ModelParams& params, const TrainingData& data, std::span<const io::Edge> edges, double mu,
                    bool adjust, ModelGrads* grads, const Regime& regime) {
  if (data.graph == nullptr) fail(ErrorCode::state, "training data is not bound to a graph");
  const auto b = edges.size();
  std::vector<io::NodeIndex> both(2 * b);
  std::vector<io::NodeIndex> sources(b), targets(b);
  for (std::size_t k = 0; k < b; ++k) {
    const auto& e = edges[k];
    if (!data.graph->has_edge(e.src, e.dst))
      fail(ErrorCode::invalid_argument,
           "edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) + ") is not in the graph");
    both[k] = sources[k] = e.src;
    both[b + k] = targets[k] = e.dst;
  }

  LossTerms terms;
  {
    auto pass = run_channel(params, data, Channel::content, both, mu, regime);
    terms.content = pass.loss.loss;
    if (grads) channel_backward(params, pass.tape, pass.loss.grad, *grads);
  }
  {
    auto pass = run_channel(params, data, Channel::out, both, mu, regime);
    terms.out = pass.loss.loss;
    Matrix d = std::move(pass.loss.grad);
    if (adjust) {
      // u's out reconstruction against v's incoming neighbourhood.
      Matrix target = dense_rows(data.in, targets);
      Matrix pred = pass.tape.reconstruction.topRows(static_cast<Eigen::Index>(b));
      auto adj = nn::masked_sq_error(pred, target, weighting(target, mu));
      terms.adjusted = adj.loss;
      d.topRows(static_cast<Eigen::Index>(b)) += adj.grad;
    }
    if (grads) channel_backward(params, pass.tape, d, *grads);
  }
  {
    auto pass = run_channel(params, data, Channel::in, adjust ? std::span<const io::NodeIndex>(targets)
                                                              : std::span<const io::NodeIndex>(both),
                            mu, regime);
    terms.in = pass.loss.loss;
    if (grads) channel_backward(params, pass.tape, pass.loss.grad, *grads);
  }
  return terms;
}

// ---------------------------------------------------------------- embeddings

EmbeddingSet compute_embeddings(const ModelParams& params, const TrainingData& data, std::size_t batch_size) {
  const auto n = data.node_count();
  const auto k = static_cast<Eigen::Index>(params.arch.embedding_dim);
  EmbeddingSet set;
  set.z.resize(static_cast<Eigen::Index>(n), k);
  set.o.resize(static_cast<Eigen::Index>(n), k);
  set.i.resize(static_cast<Eigen::Index>(n), k);
  if (data.graph) set.node_ids = data.graph->node_ids();
  std::vector<io::NodeIndex> rows;
  for (std::size_t start = 0; start < n; start += batch_size) {
    rows.clear();
    for (std::size_t u = start; u < std::min(n, start + batch_size); ++u) rows.push_back(static_cast<io::NodeIndex>(u));
    for (auto c : kChannels) {
      // Inference only needs the encoder half.
      const ChannelView view = channel_view(params, c);
      Matrix h = nn::forward_layer(view.input_head, gather_rows(data.rows(c), rows));
      for (const auto& layer : view.encoder_trunk) h = nn::forward_layer(layer, h);
      Matrix e = nn::forward_layer(view.embed, h);
      Matrix& dst = c == Channel::content ? set.z : c == Channel::out ? set.o : set.i;
      dst.middleRows(static_cast<Eigen::Index>(start), e.rows()) = e;
    }
  }
  return set;
}

double mean_edge_loss(const ModelParams& params, const TrainingData& data, double mu, std::size_t batch_size) {
  const auto edges = data.graph->edges();
  if (edges.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t start = 0; start < edges.size(); start += batch_size) {
    auto batch = edges.subspan(start, std::min(batch_size, edges.size() - start));
    sum += edge_loss(params, data, batch, mu).total();
  }
  return sum / static_cast<double>(edges.size());
}

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
  if (batch_size == 0) fail(ErrorCode::invalid_argument, "batch size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    fail(ErrorCode::invalid_argument, "learning rate must be positive");
  if (!(dropout >= 0.0) || dropout >= 1.0) fail(ErrorCode::invalid_argument, "dropout must lie in [0, 1)");
  if (!(mu > 1.0) || !std::isfinite(mu)) fail(ErrorCode::invalid_argument, "mu must be greater than 1");
}

namespace {

template <typename Item, typename BatchLoss>
std::vector<EpochStats> run_epochs(ModelParams& params, const TrainingData& data, const TrainConfig& cfg,
                                   std::size_t epochs, std::vector<Item> items, BatchLoss&& batch_loss) {
  nn::Rng shuffle_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  nn::Rng dropout_rng(cfg.seed ^ 0xD1B54A32D192ED03ULL);
  nn::AdamOptimizer opt({cfg.learning_rate});
  ModelGrads grads(params);
  auto slots = grads.slots(params);
  const Regime regime{cfg.dropout, &dropout_rng, true};

  std::vector<EpochStats> trace;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(items);
    double sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < items.size(); start += cfg.batch_size, ++batch_no) {
      std::span<const Item> batch(items.data() + start, std::min(cfg.batch_size, items.size() - start));
      grads.zero();
      const double loss = batch_loss(batch, &grads, regime);
      if (!std::isfinite(loss))
        fail(ErrorCode::numeric, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no));
      opt.step(slots);
      sum += loss;
    }
    EpochStats st;
    st.epoch = epoch;
    st.loss_sum = sum;
    st.mean_loss = items.empty() ? 0.0 : sum / static_cast<double>(items.size());
    if (cfg.track_edge_loss) st.eval_edge_loss = mean_edge_loss(params, data, cfg.mu, cfg.batch_size);
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.push_back(st);
    if (cfg.on_epoch) cfg.on_epoch(st);
  }
  return trace;
}

Architecture resolve_arch(const TrainConfig& cfg, const io::DirectedGraph& g, const io::FeatureMatrix& f) {
  Architecture arch = cfg.arch;
  arch.node_count = g.node_count();
  arch.feature_dim = f.cols();
  arch.validate();
  return arch;
}

}  // namespace

TrainResult train_node_model(const io::DirectedGraph& g, const io::FeatureMatrix& f, const TrainConfig& cfg) {
  cfg.validate();
  if (g.node_count() == 0) fail(ErrorCode::invalid_argument, "cannot train on an empty graph");
  const auto data = TrainingData::build(g, f);
  TrainResult result;
  result.params = ModelParams::glorot(resolve_arch(cfg, g, f), cfg.seed);
  result.epochs = cfg.epochs.value_or(30);
  std::vector<io::NodeIndex> nodes(g.node_count());
  std::iota(nodes.begin(), nodes.end(), 0u);
  result.trace = run_epochs(result.params, data, cfg, result.epochs, std::move(nodes),
                            [&](std::span<const io::NodeIndex> batch, ModelGrads* grads, const Regime& regime) {
                              return node_loss(result.params, data, batch, cfg.mu, grads, regime).total();
                            });
  result.embeddings = compute_embeddings(result.params, data);
  result.embeddings.mode = "node";
  return result;
}

TrainResult train_edge_model(const io::DirectedGraph& g, const io::FeatureMatrix& f, const TrainConfig& cfg,
                             const ModelParams* transfer_from) {
  cfg.validate();
  if (g.node_count() == 0) fail(ErrorCode::invalid_argument, "cannot train on an empty graph");
  const auto data = TrainingData::build(g, f);
  const auto arch = resolve_arch(cfg, g, f);
  TrainResult result;
  if (transfer_from) {
    if (!(transfer_from->arch == arch))
      fail(ErrorCode::mismatch, "transfer checkpoint architecture does not match the graph and configuration");
    result.params = *transfer_from;
  } else {
    result.params = ModelParams::glorot(arch, cfg.seed);
  }
  result.epochs = cfg.epochs.value_or(transfer_from ? 2 : 30);
  std::vector<io::Edge> edges(g.edges().begin(), g.edges().end());
  result.trace = run_epochs(result.params, data, cfg, result.epochs, std::move(edges),
                            [&](std::span<const io::Edge> batch, ModelGrads* grads, const Regime& regime) {
                              return edge_loss(result.params, data, batch, cfg.mu, true, grads, regime).total();
                            });
  result.embeddings = compute_embeddings(result.params, data);
  result.embeddings.mode = "edge";
  return result;
}

}  // namespace diagram::model
