#include <doctest.h>

#include <cstring>
#include <limits>
#include <random>

#include "embeddings_io.hpp"
#include "error.hpp"
#include "test_util.hpp"

using namespace diagram;
using model::EmbeddingFormat;
using model::EmbeddingSet;

namespace {

EmbeddingSet random_set(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  EmbeddingSet s;
  for (auto* m : {&s.z, &s.o, &s.i}) {
    m->resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (Eigen::Index j = 0; j < m->size(); ++j) m->data()[j] = d(rng);
  }
  for (std::size_t u = 0; u < n; ++u) s.node_ids.push_back("node" + std::to_string(u));
  s.mode = "edge";
  s.config_fingerprint = "0123456789abcdef";
  s.dataset_fingerprint = "fedcba9876543210";
  return s;
}

bool bit_equal(const nn::Matrix& a, const nn::Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

void check_same(const EmbeddingSet& a, const EmbeddingSet& b) {
  CHECK(bit_equal(a.z, b.z));
  CHECK(bit_equal(a.o, b.o));
  CHECK(bit_equal(a.i, b.i));
  CHECK(a.node_ids == b.node_ids);
  CHECK(a.mode == b.mode);
  CHECK(a.config_fingerprint == b.config_fingerprint);
  CHECK(a.dataset_fingerprint == b.dataset_fingerprint);
}

}  // namespace

TEST_CASE("round trips are bit exact in both formats") {
  testutil::TempDir dir;
  for (auto fmt : {EmbeddingFormat::text, EmbeddingFormat::binary}) {
    auto s = random_set(1000, 8, 3);
    s.z(0, 0) = std::numeric_limits<double>::denorm_min();
    s.o(1, 1) = -0.0;
    s.i(2, 2) = 1e300;
    const auto path = dir.file(fmt == EmbeddingFormat::text ? "e.txt" : "e.bin");
    model::export_embeddings(s, path, fmt);
    check_same(s, model::import_embeddings(path));
  }
}

TEST_CASE("text layout") {
  auto s = random_set(2, 1, 1);
  s.z(0, 0) = 0.5;
  s.o(0, 0) = -1;
  s.i(0, 0) = 2;
  auto text = model::serialize_embeddings(s, EmbeddingFormat::text);
  CHECK(text.rfind("DIAGRAM v1 2 1 edge config=0123456789abcdef dataset=fedcba9876543210\n", 0) == 0);
  CHECK(text.find("\nnode0 0.5 -1 2\n") != std::string::npos);
}

TEST_CASE("empty fingerprints survive") {
  auto s = random_set(3, 2, 5);
  s.config_fingerprint.clear();
  s.dataset_fingerprint.clear();
  for (auto fmt : {EmbeddingFormat::text, EmbeddingFormat::binary})
    check_same(s, model::parse_embeddings(model::serialize_embeddings(s, fmt), "mem"));
}

TEST_CASE("malformed files are rejected with a reason") {
  auto s = random_set(4, 3, 2);
  const auto text = model::serialize_embeddings(s, EmbeddingFormat::text);
  const auto bin = model::serialize_embeddings(s, EmbeddingFormat::binary);

  auto code_of = [](const std::string& bytes) {
    try {
      model::parse_embeddings(bytes, "mem");
    } catch (const Error& e) {
      return e.code();
    }
    return static_cast<ErrorCode>(0);
  };

  SUBCASE("wrong value count") {
    auto bad = text;
    bad.replace(bad.find("DIAGRAM v1 4 3"), 14, "DIAGRAM v1 4 2");
    CHECK(code_of(bad) == ErrorCode::mismatch);
  }
  SUBCASE("unsupported version") {
    auto bad = text;
    bad.replace(0, 10, "DIAGRAM v9");
    CHECK(code_of(bad) == ErrorCode::mismatch);
    auto bad_bin = bin;
    bad_bin[8] = 9;
    CHECK(code_of(bad_bin) == ErrorCode::mismatch);
  }
  SUBCASE("truncation") {
    const auto cut = text.substr(0, text.rfind("node3"));
    CHECK(code_of(cut) == ErrorCode::parse);
    CHECK(code_of(bin.substr(0, bin.size() - 5)) == ErrorCode::parse);
  }
  SUBCASE("extra rows") { CHECK(code_of(text + "node9 1 2 3 4 5 6 7 8 9\n") == ErrorCode::parse); }
  SUBCASE("not an embedding file") { CHECK(code_of("hello world\n") == ErrorCode::parse); }
  SUBCASE("malformed number") {
    auto bad = text;
    bad.replace(bad.find("node1 ") + 6, 1, "x");
    CHECK(code_of(bad) == ErrorCode::parse);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(model::import_embeddings("/nonexistent/e.txt"), Error); }
}

TEST_CASE("inconsistent sets are not written") {
  auto s = random_set(3, 2, 1);
  s.node_ids.pop_back();
  CHECK_THROWS_AS(model::serialize_embeddings(s, EmbeddingFormat::text), Error);
  auto t = random_set(3, 2, 1);
  t.o.resize(3, 3);
  CHECK_THROWS_AS(model::serialize_embeddings(t, EmbeddingFormat::binary), Error);
}
