#include "graph_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "error.hpp"

namespace diagram::io {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; };
  while (i < line.size()) {
    while (i < line.size() && is_ws(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_ws(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "'");
  return in;
}

std::string where(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

}  // namespace

// ---------------------------------------------------------------- SparseMatrix

SparseMatrix SparseMatrix::zeros(std::size_t rows, std::size_t cols) {
  SparseMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(rows + 1, 0);
  return m;
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries) {
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m = zeros(rows, cols);
  std::size_t i = 0;
  while (i < entries.size()) {
    const auto& e = entries[i];
    if (e.row >= rows || e.col >= cols)
      fail(ErrorCode::shape, "triplet (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                                 ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    double v = 0.0;
    std::size_t j = i;
    while (j < entries.size() && entries[j].row == e.row && entries[j].col == e.col) v += entries[j++].value;
    if (v != 0.0) {
      m.col_idx.push_back(e.col);
      m.values.push_back(v);
      ++m.row_ptr[e.row + 1];
    }
    i = j;
  }
  std::partial_sum(m.row_ptr.begin(), m.row_ptr.end(), m.row_ptr.begin());
  return m;
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto cols_r = row_cols(r);
  auto it = std::lower_bound(cols_r.begin(), cols_r.end(), static_cast<std::uint32_t>(c));
  if (it == cols_r.end() || *it != c) return 0.0;
  return values[row_ptr[r] + static_cast<std::size_t>(it - cols_r.begin())];
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t = zeros(cols, rows);
  for (auto c : col_idx) ++t.row_ptr[c + 1];
  std::partial_sum(t.row_ptr.begin(), t.row_ptr.end(), t.row_ptr.begin());
  t.col_idx.resize(nnz());
  t.values.resize(nnz());
  std::vector<std::size_t> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      auto slot = next[col_idx[k]]++;
      t.col_idx[slot] = static_cast<std::uint32_t>(r);
      t.values[slot] = values[k];
    }
  }
  return t;
}

std::vector<double> SparseMatrix::dense() const {
  std::vector<double> out(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) out[r * cols + col_idx[k]] = values[k];
  return out;
}

// --------------------------------------------------------------- DirectedGraph

DirectedGraph DirectedGraph::from_edges(std::vector<std::string> node_ids, std::vector<Edge> edges,
                                        std::size_t* duplicates_removed) {
  DirectedGraph g;
  g.node_ids_ = std::move(node_ids);
  g.index_.reserve(g.node_ids_.size());
  for (std::size_t i = 0; i < g.node_ids_.size(); ++i) {
    if (!g.index_.emplace(g.node_ids_[i], static_cast<NodeIndex>(i)).second)
      fail(ErrorCode::invalid_argument, "duplicate node id '" + g.node_ids_[i] + "'");
  }
  const auto n = g.node_ids_.size();
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n)
      fail(ErrorCode::invalid_argument, "edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                                            ") references a node outside [0," + std::to_string(n) + ")");
  }
  std::sort(edges.begin(), edges.end());
  auto last = std::unique(edges.begin(), edges.end());
  if (duplicates_removed) *duplicates_removed = static_cast<std::size_t>(edges.end() - last);
  edges.erase(last, edges.end());
  g.edges_ = std::move(edges);

  g.out_ = SparseMatrix::zeros(n, n);
  g.out_.col_idx.reserve(g.edges_.size());
  g.out_.values.assign(g.edges_.size(), 1.0);
  for (const auto& e : g.edges_) {
    ++g.out_.row_ptr[e.src + 1];
    g.out_.col_idx.push_back(e.dst);
  }
  std::partial_sum(g.out_.row_ptr.begin(), g.out_.row_ptr.end(), g.out_.row_ptr.begin());
  g.in_ = g.out_.transpose();
  return g;
}

std::optional<NodeIndex> DirectedGraph::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool DirectedGraph::has_edge(NodeIndex u, NodeIndex v) const {
  if (u >= node_count() || v >= node_count()) return false;
  auto row = out_.row_cols(u);
  return std::binary_search(row.begin(), row.end(), v);
}

std::size_t DirectedGraph::self_loop_count() const {
  return static_cast<std::size_t>(
      std::count_if(edges_.begin(), edges_.end(), [](const Edge& e) { return e.src == e.dst; }));
}

DirectedGraph DirectedGraph::transposed() const {
  std::vector<Edge> rev;
  rev.reserve(edges_.size());
  for (const auto& e : edges_) rev.push_back({e.dst, e.src});
  return from_edges(node_ids_, std::move(rev));
}

DirectedGraph DirectedGraph::without_edges(std::span<const Edge> removed) const {
  std::vector<Edge> gone(removed.begin(), removed.end());
  std::sort(gone.begin(), gone.end());
  std::vector<Edge> kept;
  kept.reserve(edges_.size());
  std::set_difference(edges_.begin(), edges_.end(), gone.begin(), gone.end(), std::back_inserter(kept));
  return from_edges(node_ids_, std::move(kept));
}

// ----------------------------------------------------------------- features

std::string to_string(FeatureMode mode) { return mode == FeatureMode::binary ? "binary" : "tfidf"; }

FeatureMode parse_feature_mode(std::string_view text) {
  if (text == "binary") return FeatureMode::binary;
  if (text == "tfidf") return FeatureMode::tfidf;
  fail(ErrorCode::invalid_argument, "unknown feature mode '" + std::string(text) + "' (expected binary|tfidf)");
}

FeatureMatrix binarize(const SparseMatrix& counts) {
  FeatureMatrix f;
  f.mode = FeatureMode::binary;
  f.values = counts;
  std::fill(f.values.values.begin(), f.values.values.end(), 1.0);
  f.all_zero = counts.nnz() == 0;
  return f;
}

FeatureMatrix compute_tfidf(const SparseMatrix& counts) {
  for (double v : counts.values)
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::invalid_argument, "tf-idf input must be nonnegative counts");
  const auto n = static_cast<double>(counts.rows);
  std::vector<std::size_t> df(counts.cols, 0);
  for (auto c : counts.col_idx) ++df[c];

  FeatureMatrix f;
  f.mode = FeatureMode::tfidf;
  f.values = counts;
  for (std::size_t r = 0; r < counts.rows; ++r) {
    double norm2 = 0.0;
    for (std::size_t k = counts.row_ptr[r]; k < counts.row_ptr[r + 1]; ++k) {
      double idf = std::log((1.0 + n) / (1.0 + static_cast<double>(df[counts.col_idx[k]]))) + 1.0;
      f.values.values[k] = counts.values[k] * idf;
      norm2 += f.values.values[k] * f.values.values[k];
    }
    if (norm2 > 0.0) {
      double inv = 1.0 / std::sqrt(norm2);
      for (std::size_t k = counts.row_ptr[r]; k < counts.row_ptr[r + 1]; ++k) f.values.values[k] *= inv;
    }
  }
  f.all_zero = counts.nnz() == 0;
  return f;
}

FeatureMatrix CitationDataset::features(FeatureMode mode) const {
  FeatureMatrix f = mode == FeatureMode::binary ? binarize(word_counts) : compute_tfidf(word_counts);
  f.vocabulary = vocabulary;
  return f;
}

// ------------------------------------------------------------------ loading

CitationDataset load_citation_dataset(const std::string& content_path, const std::string& cites_path) {
  CitationDataset ds;
  std::vector<std::string> ids;
  std::vector<std::string> raw_labels;
  std::vector<Triplet> counts;
  std::optional<std::size_t> width;
  std::unordered_map<std::string, NodeIndex> index;

  {
    auto in = open_input(content_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto tok = split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() < 2) fail(ErrorCode::parse, where(content_path, line_no) + ": expected '<id> <features...> <label>'");
      const std::size_t d = tok.size() - 2;
      if (width && *width != d)
        fail(ErrorCode::parse, where(content_path, line_no) + ": feature width " + std::to_string(d) +
                                   " differs from " + std::to_string(*width) + " on earlier rows");
      width = d;
      const auto u = static_cast<NodeIndex>(ids.size());
      std::string id(tok.front());
      if (!index.emplace(id, u).second)
        fail(ErrorCode::parse, where(content_path, line_no) + ": duplicate node id '" + id + "'");
      for (std::size_t j = 0; j < d; ++j) {
        auto t = tok[j + 1];
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v) || v < 0.0)
          fail(ErrorCode::parse, where(content_path, line_no) + ": feature " + std::to_string(j + 1) +
                                     " is not a nonnegative number: '" + std::string(t) + "'");
        if (v != 0.0) counts.push_back({u, static_cast<std::uint32_t>(j), v});
      }
      ids.push_back(std::move(id));
      raw_labels.emplace_back(tok.back());
    }
  }
  if (ids.empty()) fail(ErrorCode::parse, content_path + ": dataset has no nodes");

  const std::size_t n = ids.size();
  const std::size_t d = width.value_or(0);
  ds.word_counts = SparseMatrix::from_triplets(n, d, std::move(counts));
  ds.vocabulary.reserve(d);
  for (std::size_t j = 0; j < d; ++j) ds.vocabulary.push_back("w" + std::to_string(j));

  ds.labels.class_names = raw_labels;
  std::sort(ds.labels.class_names.begin(), ds.labels.class_names.end());
  ds.labels.class_names.erase(std::unique(ds.labels.class_names.begin(), ds.labels.class_names.end()),
                              ds.labels.class_names.end());
  ds.labels.labels.reserve(n);
  for (const auto& name : raw_labels) {
    auto it = std::lower_bound(ds.labels.class_names.begin(), ds.labels.class_names.end(), name);
    ds.labels.labels.push_back(static_cast<std::uint32_t>(it - ds.labels.class_names.begin()));
  }

  std::vector<Edge> edges;
  {
    auto in = open_input(cites_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto tok = split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() != 2) fail(ErrorCode::parse, where(cites_path, line_no) + ": expected '<cited_id> <citing_id>'");
      ++ds.metadata.citation_rows;
      auto cited = index.find(std::string(tok[0]));
      auto citing = index.find(std::string(tok[1]));
      if (cited == index.end() || citing == index.end()) {
        ++ds.metadata.dropped_unknown;
        continue;
      }
      edges.push_back({citing->second, cited->second});
    }
  }
  ds.graph = DirectedGraph::from_edges(std::move(ids), std::move(edges), &ds.metadata.duplicates_removed);
  ds.metadata.self_loops = ds.graph.self_loop_count();
  return ds;
}

// ---------------------------------------------------------------- derived

SparseMatrix build_undirected_union(const DirectedGraph& g) {
  const auto& m = g.out_adjacency();
  const auto& mt = g.in_adjacency();
  SparseMatrix a = SparseMatrix::zeros(g.node_count(), g.node_count());
  for (std::size_t r = 0; r < a.rows; ++r) {
    auto x = m.row_cols(r);
    auto y = mt.row_cols(r);
    std::size_t before = a.col_idx.size();
    std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(a.col_idx));
    a.row_ptr[r + 1] = a.row_ptr[r] + (a.col_idx.size() - before);
  }
  a.values.assign(a.col_idx.size(), 1.0);
  return a;
}

std::size_t weak_component_count(const DirectedGraph& g) {
  const auto n = g.node_count();
  std::vector<std::uint32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t comps = n;
  for (const auto& e : g.edges()) {
    auto a = find(e.src), b = find(e.dst);
    if (a != b) {
      parent[a] = b;
      --comps;
    }
  }
  return comps;
}

DatasetSummary dataset_summary(const DirectedGraph& g, const FeatureMatrix& f, const LabelVector& l) {
  DatasetSummary s;
  s.nodes = g.node_count();
  s.edges = g.edge_count();
  s.features = f.cols();
  s.labels = l.class_count();
  s.self_loops = g.self_loop_count();
  for (const auto& e : g.edges())
    if (e.src < e.dst && g.has_edge(e.dst, e.src)) ++s.reciprocal_pairs;
  for (NodeIndex u = 0; u < s.nodes; ++u) {
    s.max_out_degree = std::max(s.max_out_degree, g.out_degree(u));
    s.max_in_degree = std::max(s.max_in_degree, g.in_degree(u));
    if (g.out_degree(u) == 0 && g.in_degree(u) == 0) ++s.isolated_nodes;
  }
  s.mean_out_degree = s.nodes ? static_cast<double>(s.edges) / static_cast<double>(s.nodes) : 0.0;
  s.weak_components = weak_component_count(g);
  return s;
}

// ------------------------------------------------------------------ export

void write_file_atomic(const std::string& path, std::string_view contents) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(ErrorCode::io, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) fail(ErrorCode::io, "cannot rename '" + tmp.string() + "' to '" + path + "': " + ec.message());
}

void export_edge_list(const DirectedGraph& g, const std::string& path) {
  std::string out;
  for (const auto& e : g.edges()) {
    out += g.node_id(e.src);
    out += '\t';
    out += g.node_id(e.dst);
    out += '\n';
  }
  write_file_atomic(path, out);
}

DirectedGraph read_edge_list(const std::string& path, std::vector<std::string> node_ids) {
  std::unordered_map<std::string, NodeIndex> index;
  for (std::size_t i = 0; i < node_ids.size(); ++i) index.emplace(node_ids[i], static_cast<NodeIndex>(i));
  auto in = open_input(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 2) fail(ErrorCode::parse, where(path, line_no) + ": expected '<src_id> <dst_id>'");
    auto a = index.find(std::string(tok[0]));
    auto b = index.find(std::string(tok[1]));
    if (a == index.end() || b == index.end()) fail(ErrorCode::parse, where(path, line_no) + ": unknown node id");
    edges.push_back({a->second, b->second});
  }
  return DirectedGraph::from_edges(std::move(node_ids), std::move(edges));
}

void export_feature_triplets(const DirectedGraph& g, const FeatureMatrix& f, const std::string& path) {
  if (f.rows() != g.node_count()) fail(ErrorCode::shape, "feature rows do not match node count");
  std::string out;
  char buf[64];
  for (std::size_t r = 0; r < f.rows(); ++r) {
    auto cols = f.values.row_cols(r);
    auto vals = f.values.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", vals[k]);
      out += g.node_id(static_cast<NodeIndex>(r));
      out += '\t';
      out += f.vocabulary.empty() ? "w" + std::to_string(cols[k]) : f.vocabulary[cols[k]];
      out += '\t';
      out += buf;
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string dataset_fingerprint(const DirectedGraph& g, const FeatureMatrix& f) {
  std::ostringstream os;
  os.precision(17);
  os << "n=" << g.node_count() << ";d=" << f.cols() << ";mode=" << to_string(f.mode) << ";";
  for (const auto& id : g.node_ids()) os << id << ',';
  os << ';';
  for (const auto& e : g.edges()) os << e.src << '>' << e.dst << ',';
  os << ';';
  for (std::size_t r = 0; r < f.rows(); ++r) {
    auto cols = f.values.row_cols(r);
    auto vals = f.values.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) os << r << ':' << cols[k] << '=' << vals[k] << ',';
  }
  return fnv1a_hex(os.str());
}

}  // namespace diagram::io
