#include "pipeline.hpp"

#include <cstdio>
#include <filesystem>

#include "embeddings_io.hpp"
#include "error.hpp"

namespace diagram::pipeline {

namespace fs = std::filesystem;
using eval::format_number;

LoadedDataset load_dataset(const RunConfig& cfg) {
  LoadedDataset ds;
  ds.content_path = cfg.resolved_content_path();
  ds.cites_path = cfg.resolved_cites_path();
  ds.data = io::load_citation_dataset(ds.content_path, ds.cites_path);
  ds.features = ds.data.features(cfg.features);
  ds.fingerprint = io::dataset_fingerprint(ds.data.graph, ds.features);
  return ds;
}

nlohmann::json summary_json(const LoadedDataset& ds) {
  const auto s = io::dataset_summary(ds.data.graph, ds.features, ds.data.labels);
  const auto& meta = ds.data.metadata;
  return {{"content", ds.content_path},
          {"cites", ds.cites_path},
          {"fingerprint", ds.fingerprint},
          {"nodes", s.nodes},
          {"edges", s.edges},
          {"features", s.features},
          {"labels", s.labels},
          {"self_loops", s.self_loops},
          {"reciprocal_pairs", s.reciprocal_pairs},
          {"isolated_nodes", s.isolated_nodes},
          {"weak_components", s.weak_components},
          {"mean_out_degree", s.mean_out_degree},
          {"max_out_degree", s.max_out_degree},
          {"max_in_degree", s.max_in_degree},
          {"edge_direction", meta.edge_direction},
          {"citation_rows", meta.citation_rows},
          {"dropped_unknown", meta.dropped_unknown},
          {"duplicates_removed", meta.duplicates_removed},
          {"feature_mode", io::to_string(ds.features.mode)},
          {"all_zero_features", ds.features.all_zero},
          {"classes", ds.data.labels.class_names}};
}

std::string summary_text(const LoadedDataset& ds) {
  const auto s = io::dataset_summary(ds.data.graph, ds.features, ds.data.labels);
  const auto& meta = ds.data.metadata;
  std::string out;
  auto line = [&](const std::string& k, const std::string& v) { out += k + std::string(20 - std::min<std::size_t>(k.size(), 19), ' ') + v + "\n"; };
  line("nodes", std::to_string(s.nodes));
  line("edges", std::to_string(s.edges));
  line("features", std::to_string(s.features));
  line("labels", std::to_string(s.labels));
  line("self_loops", std::to_string(s.self_loops));
  line("reciprocal_pairs", std::to_string(s.reciprocal_pairs));
  line("isolated_nodes", std::to_string(s.isolated_nodes));
  line("weak_components", std::to_string(s.weak_components));
  line("mean_out_degree", format_number(s.mean_out_degree));
  line("max_out_degree", std::to_string(s.max_out_degree));
  line("max_in_degree", std::to_string(s.max_in_degree));
  line("edge_direction", meta.edge_direction);
  line("dropped_unknown", std::to_string(meta.dropped_unknown));
  line("duplicates_removed", std::to_string(meta.duplicates_removed));
  line("fingerprint", ds.fingerprint);
  if (ds.features.all_zero) out += "warning: every feature row is zero\n";
  return out;
}

void export_dataset(const LoadedDataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  const auto& g = ds.data.graph;
  io::export_edge_list(g, (fs::path(dir) / "edges.tsv").string());
  io::export_feature_triplets(g, ds.features, (fs::path(dir) / "features.tsv").string());
  std::string labels;
  for (std::size_t u = 0; u < g.node_count(); ++u)
    labels += g.node_id(static_cast<io::NodeIndex>(u)) + "\t" +
              ds.data.labels.class_names[ds.data.labels.labels[u]] + "\n";
  io::write_file_atomic((fs::path(dir) / "labels.tsv").string(), labels);
}

io::DirectedGraph training_graph(const RunConfig& cfg, const LoadedDataset& ds,
                                 std::optional<eval::LinkSample>* sample) {
  if (!cfg.holdout_p) return ds.data.graph;
  auto s = eval::sample_link_prediction(ds.data.graph, *cfg.holdout_p, cfg.seed);
  auto residual = s.residual;
  if (sample) *sample = std::move(s);
  return residual;
}

namespace {

model::TrainConfig train_config(const RunConfig& cfg) {
  model::TrainConfig tc;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.learning_rate;
  tc.dropout = cfg.resolved_dropout();
  tc.mu = cfg.mu;
  tc.seed = cfg.seed;
  return tc;
}

std::string trace_csv(const std::vector<model::EpochStats>& trace) {
  std::string out = "epoch,loss_sum,mean_loss\n";
  for (const auto& s : trace)
    out += std::to_string(s.epoch) + "," + format_number(s.loss_sum) + "," + format_number(s.mean_loss) + "\n";
  return out;
}

TrainArtifacts write_artifacts(const RunConfig& cfg, const std::string& variant, model::TrainResult& result,
                               const std::string& dataset_fp) {
  const fs::path dir = cfg.out;
  TrainArtifacts a;
  a.variant = variant;
  a.config_fingerprint = cfg.training_fingerprint();
  a.dataset_fingerprint = dataset_fp;
  a.epochs = result.epochs;
  a.final_mean_loss = result.trace.empty() ? 0.0 : result.trace.back().mean_loss;
  a.checkpoint_path = (dir / (variant + ".ckpt")).string();
  a.embeddings_path = (dir / (variant + ".emb")).string();
  a.trace_path = (dir / (variant + "_trace.csv")).string();
  a.config_path = (dir / (variant + "_config.txt")).string();

  auto& emb = result.embeddings;
  emb.mode = variant;
  emb.config_fingerprint = a.config_fingerprint;
  emb.dataset_fingerprint = dataset_fp;
  const std::map<std::string, std::string> meta{{"variant", variant},
                                                {"config_fingerprint", a.config_fingerprint},
                                                {"dataset_fingerprint", dataset_fp},
                                                {"config", cfg.to_text()}};
  nn::save_checkpoint(result.params.to_checkpoint(cfg.seed, meta), a.checkpoint_path);
  model::export_embeddings(emb, a.embeddings_path,
                           cfg.format == "binary" ? model::EmbeddingFormat::binary : model::EmbeddingFormat::text);
  io::write_file_atomic(a.trace_path, trace_csv(result.trace));
  io::write_file_atomic(a.config_path, cfg.to_text());
  return a;
}

}  // namespace

std::vector<TrainArtifacts> train(const RunConfig& cfg, const Progress& progress) {
  cfg.validate();
  const auto ds = load_dataset(cfg);
  const auto graph = training_graph(cfg, ds);
  const auto dataset_fp = io::dataset_fingerprint(graph, ds.features);
  try {
    fs::create_directories(cfg.out);
  } catch (const fs::filesystem_error& e) {
    fail(ErrorCode::io, "cannot create output directory '" + cfg.out + "': " + e.what());
  }

  std::vector<TrainArtifacts> written;
  auto run_cfg = [&](const std::string& phase) {
    auto tc = train_config(cfg);
    if (progress) tc.on_epoch = [&progress, phase](const model::EpochStats& s) { progress(phase, s); };
    return tc;
  };

  if (cfg.variant == "node") {
    auto tc = run_cfg("node");
    tc.epochs = cfg.epochs;
    auto result = model::train_node_model(graph, ds.features, tc);
    written.push_back(write_artifacts(cfg, "node", result, dataset_fp));
    return written;
  }

  std::optional<model::ModelParams> start;
  if (!cfg.checkpoint.empty()) {
    const auto ckpt = nn::load_checkpoint(cfg.checkpoint);
    auto it = ckpt.metadata.find("dataset_fingerprint");
    if (it != ckpt.metadata.end() && it->second != dataset_fp)
      fail(ErrorCode::mismatch, "checkpoint '" + cfg.checkpoint + "' was trained on dataset " + it->second +
                                    ", this run uses " + dataset_fp);
    start = model::ModelParams::from_checkpoint(ckpt);
  } else if (cfg.auto_node) {
    RunConfig node_cfg = cfg;
    node_cfg.variant = "node";
    node_cfg.epochs = cfg.node_epochs;
    node_cfg.node_epochs.reset();
    auto tc = run_cfg("node");
    tc.epochs = node_cfg.epochs;
    auto result = model::train_node_model(graph, ds.features, tc);
    written.push_back(write_artifacts(node_cfg, "node", result, dataset_fp));
    start = std::move(result.params);
  } else {
    fail(ErrorCode::state, "the edge variant needs a node checkpoint: pass --checkpoint or allow auto node training");
  }

  auto tc = run_cfg("edge");
  tc.epochs = cfg.epochs;
  auto result = model::train_edge_model(graph, ds.features, tc, &*start);
  written.push_back(write_artifacts(cfg, "edge", result, dataset_fp));
  return written;
}

EvalKind parse_eval_kind(const std::string& text) {
  if (text == "reconstruct") return EvalKind::reconstruct;
  if (text == "linkpred") return EvalKind::linkpred;
  if (text == "classify") return EvalKind::classify;
  fail(ErrorCode::invalid_argument, "unknown experiment '" + text + "' (expected reconstruct|linkpred|classify)");
}

std::string to_string(EvalKind kind) {
  switch (kind) {
    case EvalKind::reconstruct: return "reconstruct";
    case EvalKind::linkpred: return "linkpred";
    case EvalKind::classify: return "classify";
  }
  return "?";
}

namespace {

void check_embeddings(const model::EmbeddingSet& emb, const io::DirectedGraph& g, const std::string& fingerprint,
                      const std::string& what) {
  if (emb.dataset_fingerprint != fingerprint)
    fail(ErrorCode::mismatch, "embeddings were trained on dataset " +
                                  (emb.dataset_fingerprint.empty() ? std::string("<unknown>") : emb.dataset_fingerprint) +
                                  " but " + what + " has fingerprint " + fingerprint);
  if (emb.node_count() != g.node_count() || emb.node_ids != g.node_ids())
    fail(ErrorCode::mismatch, "embedding node ids do not match the dataset");
}

}  // namespace

eval::EvalReport evaluate(const RunConfig& cfg, EvalKind kind, const model::EmbeddingSet& emb) {
  cfg.validate();
  const auto ds = load_dataset(cfg);
  nlohmann::json context = {{"config", cfg.to_json()},
                            {"seed", cfg.seed},
                            {"dataset_fingerprint", ds.fingerprint},
                            {"embedding_config_fingerprint", emb.config_fingerprint},
                            {"embedding_dataset_fingerprint", emb.dataset_fingerprint},
                            {"embedding_mode", emb.mode}};
  switch (kind) {
    case EvalKind::reconstruct: {
      check_embeddings(emb, ds.data.graph, ds.fingerprint, "the dataset");
      const auto rows = eval::network_reconstruction(emb, ds.data.graph, cfg.k_list, cfg.scorer);
      return eval::make_report(rows, "DIAGRAM_" + emb.mode, context);
    }
    case EvalKind::linkpred: {
      const auto sample = eval::sample_link_prediction(ds.data.graph, cfg.p, cfg.seed);
      const auto residual_fp = io::dataset_fingerprint(sample.residual, ds.features);
      check_embeddings(emb, sample.residual, residual_fp,
                       "the residual graph for p=" + format_number(cfg.p) + ", seed=" + std::to_string(cfg.seed));
      context["residual_fingerprint"] = residual_fp;
      context["quota"] = sample.quota;
      const auto report =
          eval::link_prediction_eval(emb, sample, cfg.constructors, cfg.scorer, cfg.seed, {}, cfg.folds);
      return eval::make_report(report, context);
    }
    case EvalKind::classify: {
      check_embeddings(emb, ds.data.graph, ds.fingerprint, "the dataset");
      const auto report = eval::node_classification_eval(emb, ds.data.labels, cfg.ratios, cfg.repetitions, cfg.seed,
                                                         cfg.node_features);
      return eval::make_report(report, context);
    }
  }
  fail(ErrorCode::invalid_argument, "unknown experiment");
}

std::vector<std::string> write_report(const eval::EvalReport& report, const std::string& out_dir) {
  try {
    fs::create_directories(out_dir);
  } catch (const fs::filesystem_error& e) {
    fail(ErrorCode::io, "cannot create output directory '" + out_dir + "': " + e.what());
  }
  std::vector<std::string> paths{(fs::path(out_dir) / (report.kind + ".json")).string(),
                                 (fs::path(out_dir) / (report.kind + ".csv")).string()};
  io::write_file_atomic(paths[0], report.json.dump(2) + "\n");
  io::write_file_atomic(paths[1], report.csv);
  if (!report.plot_csv.empty()) {
    paths.push_back((fs::path(out_dir) / (report.kind + "_plot.csv")).string());
    io::write_file_atomic(paths.back(), report.plot_csv);
  }
  return paths;
}

}  // namespace diagram::pipeline
