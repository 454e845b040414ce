#include "embeddings_io.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace diagram::model {

namespace {

constexpr char kBinaryMagic[8] = {'D', 'I', 'A', 'G', 'R', 'A', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;

void check_shapes(const EmbeddingSet& set) {
  if (set.o.rows() != set.z.rows() || set.i.rows() != set.z.rows() || set.o.cols() != set.z.cols() ||
      set.i.cols() != set.z.cols())
    fail(ErrorCode::shape, "embedding matrices z, o, i must share one shape");
  if (set.node_ids.size() != set.node_count())
    fail(ErrorCode::shape, "embedding set has " + std::to_string(set.node_ids.size()) + " ids for " +
                               std::to_string(set.node_count()) + " rows");
}

std::string token_or_dash(const std::string& s) { return s.empty() ? "-" : s; }
std::string dash_to_empty(const std::string& s) { return s == "-" ? "" : s; }

template <typename T>
void put(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

std::string serialize_text(const EmbeddingSet& set) {
  std::string out = "DIAGRAM v1 " + std::to_string(set.node_count()) + " " + std::to_string(set.dim()) + " " +
                    token_or_dash(set.mode) + " config=" + token_or_dash(set.config_fingerprint) +
                    " dataset=" + token_or_dash(set.dataset_fingerprint) + "\n";
  char buf[40];
  for (std::size_t u = 0; u < set.node_count(); ++u) {
    out += set.node_ids[u];
    for (const Matrix* m : {&set.z, &set.o, &set.i}) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) {
        std::snprintf(buf, sizeof buf, " %.17g", (*m)(static_cast<Eigen::Index>(u), j));
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

std::string serialize_binary(const EmbeddingSet& set) {
  std::string out(kBinaryMagic, sizeof kBinaryMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, set.node_count());
  put<std::uint64_t>(out, set.dim());
  put_str(out, set.mode);
  put_str(out, set.config_fingerprint);
  put_str(out, set.dataset_fingerprint);
  for (const auto& id : set.node_ids) put_str(out, id);
  for (const Matrix* m : {&set.z, &set.o, &set.i})
    out.append(reinterpret_cast<const char*>(m->data()), sizeof(double) * static_cast<std::size_t>(m->size()));
  return out;
}

EmbeddingSet parse_binary(const std::string& bytes, const std::string& origin) {
  std::size_t pos = sizeof kBinaryMagic;
  auto take = [&](void* dst, std::size_t n) {
    if (pos + n > bytes.size()) fail(ErrorCode::parse, "truncated embedding file '" + origin + "'");
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  };
  auto u32 = [&] {
    std::uint32_t v;
    take(&v, sizeof v);
    return v;
  };
  auto u64 = [&] {
    std::uint64_t v;
    take(&v, sizeof v);
    return v;
  };
  auto str = [&] {
    std::string s(u32(), '\0');
    take(s.data(), s.size());
    return s;
  };
  if (auto v = u32(); v != kVersion)
    fail(ErrorCode::mismatch, "embedding file '" + origin + "' has unsupported version " + std::to_string(v));
  const auto n = u64();
  const auto k = u64();
  if (n > (1ULL << 31) || k > (1ULL << 20)) fail(ErrorCode::parse, "corrupt embedding header in '" + origin + "'");
  EmbeddingSet set;
  set.mode = str();
  set.config_fingerprint = str();
  set.dataset_fingerprint = str();
  set.node_ids.reserve(n);
  for (std::uint64_t u = 0; u < n; ++u) set.node_ids.push_back(str());
  for (Matrix* m : {&set.z, &set.o, &set.i}) {
    m->resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    take(m->data(), sizeof(double) * n * k);
  }
  if (pos != bytes.size()) fail(ErrorCode::parse, "trailing bytes in embedding file '" + origin + "'");
  return set;
}

EmbeddingSet parse_text(const std::string& bytes, const std::string& origin) {
  std::istringstream in(bytes);
  std::string line;
  std::getline(in, line);
  std::istringstream header(line);
  std::string magic, version, mode, config, dataset;
  std::uint64_t n = 0, k = 0;
  if (!(header >> magic >> version >> n >> k >> mode) || magic != "DIAGRAM")
    fail(ErrorCode::parse, "'" + origin + "' does not start with a DIAGRAM header");
  if (version != "v1") fail(ErrorCode::mismatch, "embedding file '" + origin + "' has unsupported version " + version);
  EmbeddingSet set;
  set.mode = dash_to_empty(mode);
  std::string extra;
  while (header >> extra) {
    if (extra.rfind("config=", 0) == 0) set.config_fingerprint = dash_to_empty(extra.substr(7));
    else if (extra.rfind("dataset=", 0) == 0) set.dataset_fingerprint = dash_to_empty(extra.substr(8));
  }
  for (Matrix* m : {&set.z, &set.o, &set.i}) m->resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  set.node_ids.reserve(n);
  std::vector<double> row;
  for (std::uint64_t u = 0; u < n; ++u) {
    if (!std::getline(in, line))
      fail(ErrorCode::parse, "embedding file '" + origin + "' is truncated: expected " + std::to_string(n) +
                                 " rows, found " + std::to_string(u));
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end && *p == ' ') ++p;
    const char* id_end = p;
    while (id_end < end && *id_end != ' ') ++id_end;
    set.node_ids.emplace_back(p, id_end);
    p = id_end;
    row.clear();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double v;
      auto [q, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) fail(ErrorCode::parse, origin + ":" + std::to_string(u + 2) + ": malformed value");
      row.push_back(v);
      p = q;
    }
    if (row.size() != 3 * k)
      fail(ErrorCode::mismatch, origin + ":" + std::to_string(u + 2) + ": expected " + std::to_string(3 * k) +
                                    " values for k=" + std::to_string(k) + ", found " + std::to_string(row.size()));
    for (std::uint64_t j = 0; j < k; ++j) {
      const auto r = static_cast<Eigen::Index>(u), c = static_cast<Eigen::Index>(j);
      set.z(r, c) = row[j];
      set.o(r, c) = row[k + j];
      set.i(r, c) = row[2 * k + j];
    }
  }
  while (std::getline(in, line))
    if (!line.empty()) fail(ErrorCode::parse, "embedding file '" + origin + "' has more rows than its header states");
  return set;
}

}  // namespace

std::string serialize_embeddings(const EmbeddingSet& set, EmbeddingFormat format) {
  check_shapes(set);
  return format == EmbeddingFormat::text ? serialize_text(set) : serialize_binary(set);
}

EmbeddingSet parse_embeddings(const std::string& bytes, const std::string& origin) {
  if (bytes.size() >= sizeof kBinaryMagic && std::memcmp(bytes.data(), kBinaryMagic, sizeof kBinaryMagic) == 0)
    return parse_binary(bytes, origin);
  return parse_text(bytes, origin);
}

void export_embeddings(const EmbeddingSet& set, const std::string& path, EmbeddingFormat format) {
  io::write_file_atomic(path, serialize_embeddings(set, format));
}

EmbeddingSet import_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open embedding file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_embeddings(buf.str(), path);
}

}  // namespace diagram::model
