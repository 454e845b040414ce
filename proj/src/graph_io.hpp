#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace diagram::io {

using NodeIndex = std::uint32_t;

struct Edge {
  NodeIndex src = 0;
  NodeIndex dst = 0;
  auto operator<=>(const Edge&) const = default;
};

struct Triplet {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  double value = 0.0;
};

// Compressed sparse row matrix. Column indices are sorted within each row.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;

  static SparseMatrix zeros(std::size_t rows, std::size_t cols);
  // Entries with the same (row, col) are summed; explicit zeros are dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);

  std::size_t nnz() const { return col_idx.size(); }
  std::span<const std::uint32_t> row_cols(std::size_t r) const {
    return {col_idx.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }
  double at(std::size_t r, std::size_t c) const;
  SparseMatrix transpose() const;
  std::vector<double> dense() const;  // row-major rows x cols

  bool operator==(const SparseMatrix&) const = default;
};

// Directed graph over dense node indices with external string ids.
// Edges are unique and kept in (src, dst) lexicographic order, which is also
// the storage order of the out-adjacency matrix.
class DirectedGraph {
 public:
  DirectedGraph() = default;

  // Sorts and deduplicates `edges`; `duplicates_removed` reports how many were dropped.
  static DirectedGraph from_edges(std::vector<std::string> node_ids, std::vector<Edge> edges,
                                  std::size_t* duplicates_removed = nullptr);

  std::size_t node_count() const { return node_ids_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }
  const SparseMatrix& out_adjacency() const { return out_; }  // M
  const SparseMatrix& in_adjacency() const { return in_; }    // M^T
  const std::vector<std::string>& node_ids() const { return node_ids_; }
  const std::string& node_id(NodeIndex u) const { return node_ids_.at(u); }
  std::optional<NodeIndex> index_of(std::string_view id) const;
  bool has_edge(NodeIndex u, NodeIndex v) const;
  std::size_t self_loop_count() const;
  std::size_t out_degree(NodeIndex u) const { return out_.row_ptr[u + 1] - out_.row_ptr[u]; }
  std::size_t in_degree(NodeIndex u) const { return in_.row_ptr[u + 1] - in_.row_ptr[u]; }

  DirectedGraph transposed() const;
  DirectedGraph without_edges(std::span<const Edge> removed) const;

 private:
  std::vector<std::string> node_ids_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<Edge> edges_;
  SparseMatrix out_;
  SparseMatrix in_;
};

enum class FeatureMode { binary, tfidf };

std::string to_string(FeatureMode mode);
FeatureMode parse_feature_mode(std::string_view text);

struct FeatureMatrix {
  SparseMatrix values;  // n x d
  FeatureMode mode = FeatureMode::binary;
  std::vector<std::string> vocabulary;
  bool all_zero = false;  // warning flag: no document contains any word

  std::size_t rows() const { return values.rows; }
  std::size_t cols() const { return values.cols; }
};

struct LabelVector {
  std::vector<std::uint32_t> labels;
  std::vector<std::string> class_names;  // sorted

  std::size_t class_count() const { return class_names.size(); }
};

struct LoadMetadata {
  std::string edge_direction = "citing->cited";
  std::size_t citation_rows = 0;
  std::size_t dropped_unknown = 0;
  std::size_t duplicates_removed = 0;
  std::size_t self_loops = 0;
};

struct CitationDataset {
  DirectedGraph graph;
  SparseMatrix word_counts;  // raw values from the content file
  std::vector<std::string> vocabulary;
  LabelVector labels;
  LoadMetadata metadata;

  FeatureMatrix features(FeatureMode mode) const;
};

// Reads `<id> <f_1..f_d> <label>` rows and `<cited_id> <citing_id>` rows.
// Citations are stored as citing -> cited edges.
CitationDataset load_citation_dataset(const std::string& content_path, const std::string& cites_path);

// A = M | M^T, binarized.
SparseMatrix build_undirected_union(const DirectedGraph& g);

FeatureMatrix binarize(const SparseMatrix& counts);

// tf = raw count, idf = ln((1+n)/(1+df)) + 1, rows L2-normalized.
FeatureMatrix compute_tfidf(const SparseMatrix& counts);

struct DatasetSummary {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t features = 0;
  std::size_t labels = 0;
  std::size_t self_loops = 0;
  std::size_t reciprocal_pairs = 0;
  std::size_t isolated_nodes = 0;
  std::size_t weak_components = 0;
  double mean_out_degree = 0.0;
  std::size_t max_out_degree = 0;
  std::size_t max_in_degree = 0;
};

DatasetSummary dataset_summary(const DirectedGraph& g, const FeatureMatrix& f, const LabelVector& l);

std::size_t weak_component_count(const DirectedGraph& g);

// `<src_id>\t<dst_id>` per edge.
void export_edge_list(const DirectedGraph& g, const std::string& path);
DirectedGraph read_edge_list(const std::string& path, std::vector<std::string> node_ids);
// `<node_id>\t<word>\t<value>` per stored entry.
void export_feature_triplets(const DirectedGraph& g, const FeatureMatrix& f, const std::string& path);

// FNV-1a over node ids, edges and feature entries, as 16 hex digits.
std::string dataset_fingerprint(const DirectedGraph& g, const FeatureMatrix& f);
std::string fnv1a_hex(std::string_view bytes);

// Writes via a temporary sibling file and renames it into place.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace diagram::io
