#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "diagram_model.hpp"
#include "eval_harness.hpp"
#include "run_config.hpp"

namespace diagram::pipeline {

struct LoadedDataset {
  io::CitationDataset data;
  io::FeatureMatrix features;
  std::string fingerprint;
  std::string content_path;
  std::string cites_path;
};

LoadedDataset load_dataset(const RunConfig& cfg);

nlohmann::json summary_json(const LoadedDataset& ds);
// Human-readable summary, numbers with 6 significant digits.
std::string summary_text(const LoadedDataset& ds);

// Writes edges.tsv, features.tsv and labels.tsv into `dir`.
void export_dataset(const LoadedDataset& ds, const std::string& dir);

using Progress = std::function<void(const std::string& phase, const model::EpochStats& stats)>;

struct TrainArtifacts {
  std::string variant;
  std::string checkpoint_path;
  std::string embeddings_path;
  std::string trace_path;
  std::string config_path;
  std::string config_fingerprint;
  std::string dataset_fingerprint;
  std::size_t epochs = 0;
  double final_mean_loss = 0.0;
};

// Trains the configured variant and writes <out>/<variant>.{ckpt,emb},
// <out>/<variant>_trace.csv and <out>/<variant>_config.txt. An edge run
// without a checkpoint trains and writes the node model first when
// auto_node is set. With holdout_p the model sees only the link-prediction
// residual graph.
std::vector<TrainArtifacts> train(const RunConfig& cfg, const Progress& progress = {});

// The graph a model was trained on: the full graph or its residual.
io::DirectedGraph training_graph(const RunConfig& cfg, const LoadedDataset& ds,
                                 std::optional<eval::LinkSample>* sample = nullptr);

enum class EvalKind { reconstruct, linkpred, classify };
EvalKind parse_eval_kind(const std::string& text);
std::string to_string(EvalKind kind);

// Checks the embeddings against the dataset (or the residual for
// linkpred) and runs the experiment.
eval::EvalReport evaluate(const RunConfig& cfg, EvalKind kind, const model::EmbeddingSet& emb);

// Writes <out>/<kind>.json, <out>/<kind>.csv and, for linkpred,
// <out>/linkpred_plot.csv. Returns the paths written.
std::vector<std::string> write_report(const eval::EvalReport& report, const std::string& out_dir);

}  // namespace diagram::pipeline
