#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "error.hpp"
#include "eval_harness.hpp"
#include "oracles.hpp"

using namespace diagram;
using eval::EdgeFeature;
using eval::ScorerMode;
using model::EmbeddingSet;
using nn::Matrix;

namespace {

using EdgeList = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

EmbeddingSet random_embeddings(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  EmbeddingSet s;
  for (auto* m : {&s.z, &s.o, &s.i}) {
    m->resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (Eigen::Index j = 0; j < m->size(); ++j) m->data()[j] = d(rng);
  }
  for (std::size_t u = 0; u < n; ++u) s.node_ids.push_back(std::to_string(u));
  return s;
}

io::DirectedGraph random_graph(std::size_t n, double density, std::mt19937_64& rng, EdgeList* list = nullptr) {
  std::bernoulli_distribution coin(density);
  std::vector<io::Edge> edges;
  std::vector<std::string> ids;
  for (std::size_t u = 0; u < n; ++u) {
    ids.push_back("n" + std::to_string(u));
    for (std::size_t v = 0; v < n; ++v)
      if (u != v && coin(rng)) {
        edges.push_back({static_cast<io::NodeIndex>(u), static_cast<io::NodeIndex>(v)});
        if (list) list->emplace_back(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
      }
  }
  return io::DirectedGraph::from_edges(ids, edges);
}

oracle::Dense dense_of(const Matrix& m) {
  oracle::Dense d(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) d[r].assign(m.row(r).data(), m.row(r).data() + m.cols());
  return d;
}

EdgeList edge_list(const io::DirectedGraph& g) {
  EdgeList out;
  for (auto e : g.edges()) out.emplace_back(e.src, e.dst);
  return out;
}

}  // namespace

TEST_CASE("proximity") {
  std::mt19937_64 rng(1);
  SUBCASE("zero embeddings score one half") {
    EmbeddingSet s;
    s.z = s.o = s.i = Matrix::Zero(3, 4);
    CHECK(eval::proximity(ScorerMode::directed, s, 0, 1) == 0.5);
    CHECK(eval::proximity(ScorerMode::symmetric, s, 2, 1) == 0.5);
  }
  SUBCASE("directed uses o_u and i_v, symmetric uses z") {
    auto s = random_embeddings(5, 3, rng);
    for (io::NodeIndex u = 0; u < 5; ++u)
      for (io::NodeIndex v = 0; v < 5; ++v) {
        const double d = oracle::sigmoid(s.o.row(u).dot(s.i.row(v)));
        CHECK(std::fabs(eval::proximity(ScorerMode::directed, s, u, v) - d) < 1e-15);
        CHECK(eval::proximity(ScorerMode::symmetric, s, u, v) == eval::proximity(ScorerMode::symmetric, s, v, u));
      }
  }
  CHECK(eval::parse_scorer_mode("directed") == ScorerMode::directed);
  CHECK(eval::to_string(ScorerMode::symmetric) == "symmetric");
  CHECK_THROWS_AS(eval::parse_scorer_mode("cosine"), Error);
}

TEST_CASE("network reconstruction agrees with a brute-force ranking") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    EdgeList list;
    auto g = random_graph(15, 0.15, rng, &list);
    auto emb = random_embeddings(15, 4, rng);
    if (trial % 5 == 0) emb.o.row(3) = emb.o.row(4);  // force tied scores
    std::vector<std::size_t> ks{5, 20, 50, 210};
    for (auto mode : {ScorerMode::directed, ScorerMode::symmetric}) {
      auto rows = eval::network_reconstruction(emb, g, ks, mode);
      REQUIRE(rows.size() == ks.size());
      const auto& src = mode == ScorerMode::directed ? emb.o : emb.z;
      const auto& dst = mode == ScorerMode::directed ? emb.i : emb.z;
      for (std::size_t r = 0; r < ks.size(); ++r) {
        const auto hits = oracle::brute_force_hits(dense_of(src), dense_of(dst), list, ks[r]);
        CHECK(rows[r].k == ks[r]);
        CHECK(rows[r].hits == hits);
        CHECK(rows[r].precision == static_cast<double>(hits) / static_cast<double>(ks[r]));
      }
      // Every ordered pair: precision is the edge density.
      CHECK(rows.back().hits == g.edge_count());
    }
  }
}

TEST_CASE("a perfect scorer reconstructs every edge first") {
  std::mt19937_64 rng(4);
  auto g = random_graph(12, 0.2, rng);
  EmbeddingSet s;
  const auto n = static_cast<Eigen::Index>(g.node_count());
  s.o = Matrix::Zero(n, n);
  for (auto e : g.edges()) s.o(e.src, e.dst) = 5.0;
  s.i = Matrix::Identity(n, n);
  s.z = Matrix::Zero(n, n);
  std::size_t m = g.edge_count();
  std::vector<std::size_t> ks{m, m + 1};
  auto rows = eval::network_reconstruction(s, g, ks);
  CHECK(rows[0].precision == 1.0);
  CHECK(rows[1].hits == m);
}

TEST_CASE("network reconstruction rejects bad K") {
  std::mt19937_64 rng(2);
  auto g = random_graph(4, 0.5, rng);
  auto emb = random_embeddings(4, 2, rng);
  std::vector<std::size_t> zero{0}, big{13};
  CHECK_THROWS_AS(eval::network_reconstruction(emb, g, zero), Error);
  CHECK_THROWS_AS(eval::network_reconstruction(emb, g, big), Error);
  auto small = random_embeddings(3, 2, rng);
  std::vector<std::size_t> ok{1};
  CHECK_THROWS_AS(eval::network_reconstruction(small, g, ok), Error);
}

TEST_CASE("link sample quota") {
  CHECK(eval::link_sample_quota(5429, 10) == 543);
  CHECK(eval::link_sample_quota(4732, 10) == 474);
  CHECK(eval::link_sample_quota(10, 10) == 1);
  CHECK(eval::link_sample_quota(100, 7) == 7);
  CHECK(eval::link_sample_quota(3, 50) == 2);
  CHECK(eval::link_sample_quota(3, 100) == 3);
  CHECK_THROWS_AS(eval::link_sample_quota(10, 0), Error);
  CHECK_THROWS_AS(eval::link_sample_quota(10, 101), Error);
}

TEST_CASE("link sampling") {
  SUBCASE("a path graph has no removable edge") {
    auto path = io::DirectedGraph::from_edges({"a", "b", "c", "d"}, {{0, 1}, {1, 2}, {2, 3}});
    try {
      eval::sample_link_prediction(path, 10, 1);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::state);
    }
  }
  SUBCASE("a reciprocal edge can go") {
    auto g = io::DirectedGraph::from_edges({"a", "b", "c", "d"}, {{0, 1}, {1, 0}, {1, 2}, {2, 3}});
    auto s = eval::sample_link_prediction(g, 25, 3);
    REQUIRE(s.quota == 1);
    auto removed = s.true_pairs()[0];
    CHECK(((removed == io::Edge{0, 1}) || (removed == io::Edge{1, 0})));
    CHECK(s.residual.edge_count() == 3);
  }
  SUBCASE("random graphs keep their weak components") {
    std::mt19937_64 rng(30);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto g = random_graph(30, 0.08, rng);
      const auto before = oracle::weak_components(30, edge_list(g));
      auto s = eval::sample_link_prediction(g, 10, seed);
      const auto after = oracle::weak_components(30, edge_list(s.residual));
      CHECK(after == before);
      CHECK(s.quota == eval::link_sample_quota(g.edge_count(), 10));
      CHECK(s.pairs.size() == 2 * s.quota);
      CHECK(std::count(s.labels.begin(), s.labels.end(), 1) == static_cast<long>(s.quota));
      std::set<io::Edge> seen;
      for (std::size_t k = 0; k < s.pairs.size(); ++k) {
        const auto e = s.pairs[k];
        CHECK(seen.insert(e).second);
        CHECK(e.src != e.dst);
        if (s.labels[k] == 1) {
          CHECK(g.has_edge(e.src, e.dst));
          CHECK_FALSE(s.residual.has_edge(e.src, e.dst));
        } else {
          CHECK_FALSE(g.has_edge(e.src, e.dst));
        }
      }
      CHECK(s.residual.edge_count() + s.quota == g.edge_count());
      auto again = eval::sample_link_prediction(g, 10, seed);
      CHECK(again.pairs == s.pairs);
    }
  }
}

TEST_CASE("edge features") {
  EmbeddingSet s;
  s.o = Matrix(2, 2);
  s.i = Matrix(2, 2);
  s.z = Matrix(2, 2);
  s.o << 1, 2, 0, 0;
  s.i << 0, 0, 3, 4;
  s.z << 1, 2, 3, 4;
  const io::Edge e{0, 1};
  auto f = [&](EdgeFeature k, ScorerMode m) {
    auto v = eval::edge_features(s, e, k, m);
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  for (auto mode : {ScorerMode::directed, ScorerMode::symmetric}) {
    CHECK(f(EdgeFeature::average, mode) == std::vector<double>{2, 3});
    CHECK(f(EdgeFeature::hadamard, mode) == std::vector<double>{3, 8});
    CHECK(f(EdgeFeature::weighted_l1, mode) == std::vector<double>{2, 2});
    CHECK(f(EdgeFeature::weighted_l2, mode) == std::vector<double>{4, 4});
  }
  std::mt19937_64 rng(3);
  auto r = random_embeddings(6, 5, rng);
  std::vector<io::Edge> pairs{{0, 1}, {2, 5}, {4, 3}};
  for (int kind = 0; kind < 4; ++kind) {
    auto x = eval::edge_feature_matrix(r, pairs, eval::kAllEdgeFeatures[kind], ScorerMode::directed);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      auto a = dense_of(r.o)[pairs[p].src];
      auto b = dense_of(r.i)[pairs[p].dst];
      auto ref = oracle::edge_feature(a, b, kind);
      for (std::size_t j = 0; j < ref.size(); ++j) CHECK(std::fabs(x(p, j) - ref[j]) < 1e-12);
    }
  }
  CHECK(eval::to_string(EdgeFeature::weighted_l1) == "W-L1");
  CHECK(eval::parse_edge_feature("hadamard") == EdgeFeature::hadamard);
  CHECK(eval::parse_edge_feature("w-l2") == EdgeFeature::weighted_l2);
  CHECK_THROWS_AS(eval::parse_edge_feature("concat"), Error);
}

TEST_CASE("auc") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> level(0, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> labels;
    std::vector<double> scores;
    for (int k = 0; k < 40; ++k) {
      labels.push_back(k % 3 == 0);
      scores.push_back(level(rng) * 0.1);  // many ties
    }
    const double auc = eval::auc_score(labels, scores);
    CHECK(std::fabs(auc - oracle::pair_count_auc(labels, scores)) < 1e-12);
    std::vector<double> warped;
    for (double s : scores) warped.push_back(std::exp(3 * s) - 7);
    CHECK(eval::auc_score(labels, warped) == auc);
  }
  std::vector<int> y{1, 1, 0, 0};
  std::vector<double> perfect{0.9, 0.8, 0.2, 0.1}, reversed{0.1, 0.2, 0.8, 0.9}, flat{1, 1, 1, 1};
  CHECK(eval::auc_score(y, perfect) == 1.0);
  CHECK(eval::auc_score(y, reversed) == 0.0);
  CHECK(eval::auc_score(y, flat) == 0.5);
  std::vector<int> one_class{1, 1};
  std::vector<double> two{0.1, 0.2};
  CHECK_THROWS_AS(eval::auc_score(one_class, two), Error);
}

TEST_CASE("f1 scores") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint32_t> cls(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint32_t> t, p;
    for (int k = 0; k < 50; ++k) {
      t.push_back(cls(rng));
      p.push_back(k % 4 == 0 ? t.back() : cls(rng));
    }
    auto f = eval::micro_macro_f1(t, p, 5);  // class 4 never appears
    auto [micro, macro] = oracle::confusion_f1(t, p, 5);
    CHECK(std::fabs(f.micro - micro) < 1e-12);
    CHECK(std::fabs(f.macro - macro) < 1e-12);
    std::vector<int> bt, bp;
    for (std::size_t k = 0; k < t.size(); ++k) {
      bt.push_back(t[k] < 2);
      bp.push_back(p[k] < 2);
    }
    CHECK(std::fabs(eval::binary_f1(bt, bp) - oracle::binary_f1(bt, bp)) < 1e-12);
  }
  std::vector<int> none{0, 0}, also_none{0, 0};
  CHECK(eval::binary_f1(none, also_none) == 0.0);
  std::vector<std::uint32_t> bad{7};
  CHECK_THROWS_AS(eval::micro_macro_f1(bad, bad, 3), Error);
}

TEST_CASE("metric summary uses the population deviation") {
  auto s = eval::MetricSummary::of({1, 2, 3, 4});
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
  CHECK(eval::MetricSummary::of({0.7}).std == 0.0);
}

TEST_CASE("logistic regression") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix x(60, 3);
  std::vector<int> y(60);
  for (int r = 0; r < 60; ++r) {
    for (int c = 0; c < 3; ++c) x(r, c) = d(rng);
    y[r] = (x(r, 0) - 0.5 * x(r, 1) + 0.8 * d(rng) > 0.2);
  }
  SUBCASE("optimum matches long gradient descent") {
    auto m = eval::logistic_regression_fit(x, y);
    CHECK(m.converged);
    const double newton = eval::logistic_objective(m, x, y, 1.0);
    const double gd = oracle::logistic_gd_objective(dense_of(x), y, 1.0, 20000, 0.01);
    CHECK(std::fabs(newton - gd) < 1e-6);
  }
  SUBCASE("probabilities rank with the signal") {
    auto m = eval::logistic_regression_fit(x, y);
    auto p = eval::predict_proba(m, x);
    std::vector<double> scores(p.data(), p.data() + p.size());
    CHECK(eval::auc_score(y, scores) > 0.8);
    CHECK(m.weights(0) > 0);
    CHECK(m.weights(1) < 0);
  }
  SUBCASE("a constant column gets zero weight") {
    Matrix xc(60, 4);
    xc << x, Matrix::Zero(60, 1);
    auto m = eval::logistic_regression_fit(xc, y);
    CHECK(std::fabs(m.weights(3)) < 1e-12);
  }
  SUBCASE("separable data stays finite") {
    Matrix xs(4, 1);
    xs << -2, -1, 1, 2;
    std::vector<int> ys{0, 0, 1, 1};
    auto m = eval::logistic_regression_fit(xs, ys);
    CHECK(std::isfinite(m.weights(0)));
    CHECK(m.weights(0) > 0);
  }
  SUBCASE("bad input") {
    Matrix bad = x;
    bad(3, 1) = std::nan("");
    CHECK_THROWS_AS(eval::logistic_regression_fit(bad, y), Error);
    std::vector<int> y3 = y;
    y3[0] = 2;
    CHECK_THROWS_AS(eval::logistic_regression_fit(x, y3), Error);
  }
}

TEST_CASE("stratified folds") {
  std::vector<int> labels;
  for (int k = 0; k < 31; ++k) labels.push_back(k % 3 == 0);
  auto folds = eval::stratified_folds(labels, 3, 8);
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<int> per(3, 0);
    for (std::size_t k = 0; k < labels.size(); ++k)
      if (labels[k] == cls) ++per[folds[k]];
    CHECK(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()) <= 1);
  }
  CHECK(eval::stratified_folds(labels, 3, 8) == folds);
  std::vector<int> tiny{1, 0, 0, 0};
  CHECK_THROWS_AS(eval::stratified_folds(tiny, 3, 1), Error);
}

TEST_CASE("link prediction evaluation") {
  std::mt19937_64 rng(6);
  auto g = random_graph(40, 0.1, rng);
  auto sample = eval::sample_link_prediction(g, 10, 2);
  SUBCASE("constant embeddings carry no signal") {
    EmbeddingSet s;
    s.o = s.i = s.z = Matrix::Ones(40, 3);
    s.node_ids.resize(40);
    std::vector<EdgeFeature> feats{EdgeFeature::hadamard};
    auto rep = eval::link_prediction_eval(s, sample, feats);
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.rows[0].auc.mean == 0.5);
    CHECK(rep.rows[0].auc.values.size() == 3);
    CHECK(rep.samples == sample.pairs.size());
  }
  SUBCASE("reports") {
    auto emb = random_embeddings(40, 4, rng);
    auto rep = eval::link_prediction_eval(emb, sample, eval::kAllEdgeFeatures);
    auto r = eval::make_report(rep, {{"seed", 2}});
    CHECK(r.kind == "linkpred");
    CHECK(r.csv.rfind("constructor,auc_mean,auc_std,f1_mean,f1_std\nAverage,", 0) == 0);
    CHECK(r.plot_csv.rfind("constructor,mean,std\n", 0) == 0);
    CHECK(r.json["constructors"].size() == 4);
    CHECK(r.json["context"]["seed"] == 2);
    for (const auto& row : rep.rows) {
      CHECK(row.auc.mean >= 0.0);
      CHECK(row.auc.mean <= 1.0);
    }
    auto again = eval::link_prediction_eval(emb, sample, eval::kAllEdgeFeatures);
    CHECK(eval::make_report(again, {{"seed", 2}}).csv == r.csv);
  }
}

TEST_CASE("node classification") {
  const std::size_t n = 60, classes = 3;
  io::LabelVector labels;
  labels.class_names = {"a", "b", "c"};
  EmbeddingSet s;
  s.z = Matrix::Zero(n, classes);
  s.o = s.i = Matrix::Zero(n, classes);
  for (std::size_t u = 0; u < n; ++u) {
    labels.labels.push_back(static_cast<std::uint32_t>(u % classes));
    s.z(u, u % classes) = 1.0;
    s.node_ids.push_back(std::to_string(u));
  }
  std::vector<double> ratios{0.1, 0.5};
  auto rep = eval::node_classification_eval(s, labels, ratios, 4, 1);
  REQUIRE(rep.rows.size() == 2);
  for (const auto& row : rep.rows) {
    CHECK(row.micro.mean == 1.0);
    CHECK(row.macro.mean == 1.0);
    CHECK(row.micro.values.size() == 4);
  }
  auto r = eval::make_report(rep, nlohmann::json::object());
  CHECK(r.csv == "train_ratio,micro_f1,macro_f1\n0.1,1,1\n0.5,1,1\n");

  SUBCASE("zoi features concatenate channels") {
    auto zoi = eval::node_classification_eval(s, labels, ratios, 2, 1, eval::NodeFeatures::zoi);
    CHECK(zoi.rows[0].micro.mean == 1.0);
  }
  SUBCASE("invalid ratio") {
    std::vector<double> bad{1.0};
    CHECK_THROWS_AS(eval::node_classification_eval(s, labels, bad), Error);
  }
  SUBCASE("one-vs-rest predicts the argmax class") {
    auto pred = eval::one_vs_rest_predict(s.z, labels.labels, s.z, classes);
    CHECK(pred == labels.labels);
  }
}

TEST_CASE("reconstruction report") {
  std::vector<eval::PrecisionAtK> rows{{2500, 300, 0.12}, {5000, 342, 0.0684}};
  auto r = eval::make_report(rows, "DIAGRAM_edge", {{"seed", 1}});
  CHECK(r.csv == "algorithm,K=2500,K=5000\nDIAGRAM_edge,0.12,0.0684\n");
  CHECK(r.json["precision_at_k"][1]["hits"] == 342);
  CHECK(eval::format_number(1.0 / 3.0) == "0.333333");
}
