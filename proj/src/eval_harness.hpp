#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "diagram_model.hpp"
#include "graph_io.hpp"

namespace diagram::eval {

using model::EmbeddingSet;
using nn::Matrix;

// directed: sigmoid(o_u . i_v); symmetric: sigmoid(z_u . z_v).
enum class ScorerMode { directed, symmetric };
std::string to_string(ScorerMode m);
ScorerMode parse_scorer_mode(const std::string& text);

double sigmoid(double x);
double proximity(ScorerMode mode, const EmbeddingSet& emb, io::NodeIndex u, io::NodeIndex v);

// ------------------------------------------------------------ reconstruction

struct PrecisionAtK {
  std::size_t k = 0;
  std::size_t hits = 0;
  double precision = 0.0;
};

// Ranks every ordered pair (u, v), u != v, by proximity (descending, ties by
// lexicographic (u, v)) and reports |top-K ∩ E| / K for each K.
std::vector<PrecisionAtK> network_reconstruction(const EmbeddingSet& emb, const io::DirectedGraph& truth,
                                                 std::span<const std::size_t> ks,
                                                 ScorerMode mode = ScorerMode::directed);

// ----------------------------------------------------------- link prediction

struct LinkSample {
  std::vector<io::Edge> pairs;  // true samples first, then false samples
  std::vector<int> labels;      // 1 = removed edge, 0 = non-edge
  io::DirectedGraph residual;
  std::size_t quota = 0;        // ceil(p * m / 100)

  std::span<const io::Edge> true_pairs() const { return {pairs.data(), quota}; }
  std::span<const io::Edge> false_pairs() const { return {pairs.data() + quota, pairs.size() - quota}; }
};

std::size_t link_sample_quota(std::size_t edge_count, double p);

// Removes random edges whose endpoints stay weakly connected without them
// (the residual keeps the original weak-component structure), then draws
// the same number of ordered non-edges uniformly.
LinkSample sample_link_prediction(const io::DirectedGraph& g, double p, std::uint64_t seed);

enum class EdgeFeature { average, hadamard, weighted_l1, weighted_l2 };
inline constexpr EdgeFeature kAllEdgeFeatures[] = {EdgeFeature::average, EdgeFeature::hadamard,
                                                   EdgeFeature::weighted_l1, EdgeFeature::weighted_l2};
std::string to_string(EdgeFeature f);
EdgeFeature parse_edge_feature(const std::string& text);

// a = o_u, b = i_v (directed) or a = z_u, b = z_v (symmetric).
Eigen::RowVectorXd edge_features(const EmbeddingSet& emb, io::Edge pair, EdgeFeature kind, ScorerMode mode);
Matrix edge_feature_matrix(const EmbeddingSet& emb, std::span<const io::Edge> pairs, EdgeFeature kind,
                           ScorerMode mode);

// ----------------------------------------------------------------- classifier

struct LogisticOptions {
  double l2 = 1.0;
  std::size_t max_iter = 200;
  double tolerance = 1e-6;
};

struct LogisticModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Minimizes sum_i logloss(y_i, x_i.w + b) + l2/2 |w|^2 (intercept
// unpenalized) with damped Newton steps.
LogisticModel logistic_regression_fit(const Matrix& x, std::span<const int> y, const LogisticOptions& opts = {});
Eigen::VectorXd predict_proba(const LogisticModel& model, const Matrix& x);
double logistic_objective(const LogisticModel& model, const Matrix& x, std::span<const int> y, double l2);

// --------------------------------------------------------------------- metrics

// Mann-Whitney statistic with half credit for ties.
double auc_score(std::span<const int> labels, std::span<const double> scores);
double binary_f1(std::span<const int> labels, std::span<const int> predicted);

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
};
F1Scores micro_macro_f1(std::span<const std::uint32_t> truth, std::span<const std::uint32_t> predicted,
                        std::size_t classes);

struct MetricSummary {
  std::vector<double> values;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation

  static MetricSummary of(std::vector<double> values);
};

// Fold assignment per item: within each class, items are shuffled and dealt
// round-robin into `folds` folds.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed);

struct LinkPredictionRow {
  EdgeFeature feature = EdgeFeature::hadamard;
  MetricSummary auc;
  MetricSummary f1;
};

struct LinkPredictionReport {
  ScorerMode mode = ScorerMode::directed;
  std::size_t folds = 3;
  std::size_t samples = 0;
  std::vector<LinkPredictionRow> rows;
};

LinkPredictionReport link_prediction_eval(const EmbeddingSet& emb, const LinkSample& sample,
                                          std::span<const EdgeFeature> features, ScorerMode mode = ScorerMode::directed,
                                          std::uint64_t seed = 1, const LogisticOptions& opts = {},
                                          std::size_t folds = 3);

enum class NodeFeatures { z, zoi };
NodeFeatures parse_node_features(const std::string& text);
std::string to_string(NodeFeatures f);

struct ClassificationRow {
  double train_ratio = 0.0;
  MetricSummary micro;
  MetricSummary macro;
};

struct ClassificationReport {
  NodeFeatures features = NodeFeatures::z;
  std::size_t repetitions = 10;
  std::vector<ClassificationRow> rows;
};

// One-vs-rest predictions: argmax over per-class probabilities.
std::vector<std::uint32_t> one_vs_rest_predict(const Matrix& train_x, std::span<const std::uint32_t> train_y,
                                               const Matrix& test_x, std::size_t classes,
                                               const LogisticOptions& opts = {});

// For each ratio, `repetitions` seeded stratified train/test splits.
ClassificationReport node_classification_eval(const EmbeddingSet& emb, const io::LabelVector& labels,
                                              std::span<const double> train_ratios, std::size_t repetitions = 10,
                                              std::uint64_t seed = 1, NodeFeatures features = NodeFeatures::z,
                                              const LogisticOptions& opts = {});

// --------------------------------------------------------------------- reports

// Metric tables serialized for files. `context` (resolved configuration,
// seed, fingerprints) is embedded verbatim in the JSON.
struct EvalReport {
  std::string kind;
  nlohmann::json json;
  std::string csv;
  std::string plot_csv;  // link prediction only: constructor,mean,std
};

EvalReport make_report(const std::vector<PrecisionAtK>& rows, const std::string& model_name,
                       const nlohmann::json& context);
EvalReport make_report(const LinkPredictionReport& report, const nlohmann::json& context);
EvalReport make_report(const ClassificationReport& report, const nlohmann::json& context);

// Six significant digits.
std::string format_number(double v);

}  // namespace diagram::eval
