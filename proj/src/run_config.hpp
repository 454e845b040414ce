#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eval_harness.hpp"
#include "graph_io.hpp"

namespace diagram {

// Everything a command needs, resolved from defaults, an optional key-value
// file and command-line overrides (applied in that order).
struct RunConfig {
  std::string dataset;  // name under the data directory, or a directory path
  std::string content_path;
  std::string cites_path;
  std::string data_dir;  // empty: $DIAGRAM_DATA_DIR, else ./data
  io::FeatureMode features = io::FeatureMode::binary;
  std::string variant = "edge";
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> node_epochs;  // auto-chained node model
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  std::optional<double> dropout;  // default 0.2, or 0.1 for citeseer
  double mu = 10.0;
  std::uint64_t seed = 1;
  std::string checkpoint;  // edge model starting point
  bool auto_node = true;
  std::optional<double> holdout_p;  // train on the link-prediction residual
  std::vector<std::size_t> k_list{2500, 5000, 7500, 10000};
  double p = 10.0;
  std::vector<double> ratios{0.1, 0.3, 0.5};
  std::vector<eval::EdgeFeature> constructors{std::begin(eval::kAllEdgeFeatures), std::end(eval::kAllEdgeFeatures)};
  eval::ScorerMode scorer = eval::ScorerMode::directed;
  eval::NodeFeatures node_features = eval::NodeFeatures::z;
  std::size_t repetitions = 10;
  std::size_t folds = 3;
  std::string embeddings;
  std::string format = "text";
  std::string out = "out";

  // Throws invalid_argument for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  // `key = value` lines; blank lines and `#` comments are ignored.
  void load_file(const std::string& path);
  void apply(const std::map<std::string, std::string>& values);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  void validate() const;
  double resolved_dropout() const;
  std::string resolved_data_dir() const;
  std::string resolved_content_path() const;
  std::string resolved_cites_path() const;

  nlohmann::json to_json() const;
  // Flat text form accepted by load_file.
  std::string to_text() const;
  // Hash of the settings that determine trained parameters.
  std::string training_fingerprint() const;
};

}  // namespace diagram
