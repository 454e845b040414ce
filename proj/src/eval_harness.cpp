#include "eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <queue>
#include <unordered_set>

#include "error.hpp"

namespace diagram::eval {

namespace {

const Matrix& source_of(const EmbeddingSet& emb, ScorerMode mode) { return mode == ScorerMode::directed ? emb.o : emb.z; }
const Matrix& target_of(const EmbeddingSet& emb, ScorerMode mode) { return mode == ScorerMode::directed ? emb.i : emb.z; }

std::uint64_t pair_key(io::NodeIndex u, io::NodeIndex v) { return (static_cast<std::uint64_t>(u) << 32) | v; }

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_labels(std::span<const int> y) {
  for (int v : y)
    if (v != 0 && v != 1) fail(ErrorCode::invalid_argument, "binary labels must be 0 or 1");
}

}  // namespace

std::string to_string(ScorerMode m) { return m == ScorerMode::directed ? "directed" : "symmetric"; }

ScorerMode parse_scorer_mode(const std::string& text) {
  if (text == "directed") return ScorerMode::directed;
  if (text == "symmetric") return ScorerMode::symmetric;
  fail(ErrorCode::invalid_argument, "unknown scorer '" + text + "' (expected directed|symmetric)");
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double proximity(ScorerMode mode, const EmbeddingSet& emb, io::NodeIndex u, io::NodeIndex v) {
  return sigmoid(source_of(emb, mode).row(u).dot(target_of(emb, mode).row(v)));
}

// ------------------------------------------------------------ reconstruction

std::vector<PrecisionAtK> network_reconstruction(const EmbeddingSet& emb, const io::DirectedGraph& truth,
                                                 std::span<const std::size_t> ks, ScorerMode mode) {
  const std::size_t n = emb.node_count();
  if (n != truth.node_count())
    fail(ErrorCode::mismatch, "embeddings cover " + std::to_string(n) + " nodes, graph has " +
                                  std::to_string(truth.node_count()));
  const std::size_t candidates = n * (n - 1);
  std::size_t kmax = 0;
  for (auto k : ks) {
    if (k == 0) fail(ErrorCode::invalid_argument, "K must be positive");
    if (k > candidates)
      fail(ErrorCode::invalid_argument, "K=" + std::to_string(k) + " exceeds the " + std::to_string(candidates) +
                                            " candidate pairs");
    kmax = std::max(kmax, k);
  }

  struct Scored {
    double score;
    io::NodeIndex u, v;
  };
  // a ranks ahead of b.
  auto ahead = [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  };
  // Max-heap on "ranks behind", so top() is the weakest retained pair.
  std::priority_queue<Scored, std::vector<Scored>, decltype(ahead)> heap(ahead);
  for (io::NodeIndex u = 0; u < n; ++u) {
    for (io::NodeIndex v = 0; v < n; ++v) {
      if (u == v) continue;
      Scored s{proximity(mode, emb, u, v), u, v};
      if (heap.size() < kmax) {
        heap.push(s);
      } else if (ahead(s, heap.top())) {
        heap.pop();
        heap.push(s);
      }
    }
  }
  std::vector<Scored> ranked;
  ranked.reserve(heap.size());
  while (!heap.empty()) {
    ranked.push_back(heap.top());
    heap.pop();
  }
  std::reverse(ranked.begin(), ranked.end());

  std::vector<std::size_t> cumulative(ranked.size() + 1, 0);
  for (std::size_t r = 0; r < ranked.size(); ++r)
    cumulative[r + 1] = cumulative[r] + (truth.has_edge(ranked[r].u, ranked[r].v) ? 1 : 0);
  std::vector<PrecisionAtK> out;
  for (auto k : ks) out.push_back({k, cumulative[k], static_cast<double>(cumulative[k]) / static_cast<double>(k)});
  return out;
}

// ----------------------------------------------------------- link prediction

std::size_t link_sample_quota(std::size_t edge_count, double p) {
  if (!(p > 0.0) || p > 100.0) fail(ErrorCode::invalid_argument, "p must lie in (0, 100]");
  // Snap to a 1e-9 grid so p*m/100 landing on an integer is not bumped by roundoff.
  const double q = std::round(p * static_cast<double>(edge_count) / 100.0 * 1e9) / 1e9;
  return static_cast<std::size_t>(std::ceil(q));
}

LinkSample sample_link_prediction(const io::DirectedGraph& g, double p, std::uint64_t seed) {
  const auto quota = link_sample_quota(g.edge_count(), p);
  const auto n = g.node_count();
  const auto& out = g.out_adjacency();
  const auto& in = g.in_adjacency();
  nn::Rng rng(seed);

  std::unordered_set<std::uint64_t> removed;
  auto present = [&](io::NodeIndex a, io::NodeIndex b) { return g.has_edge(a, b) && !removed.count(pair_key(a, b)); };

  // BFS over the undirected residual from `from`, looking for `to`.
  std::vector<std::uint32_t> seen(n, 0);
  std::uint32_t stamp = 0;
  std::vector<io::NodeIndex> frontier;
  auto reachable = [&](io::NodeIndex from, io::NodeIndex to) {
    ++stamp;
    frontier.assign(1, from);
    seen[from] = stamp;
    while (!frontier.empty()) {
      auto x = frontier.back();
      frontier.pop_back();
      if (x == to) return true;
      for (auto y : out.row_cols(x))
        if (seen[y] != stamp && !removed.count(pair_key(x, y))) {
          seen[y] = stamp;
          frontier.push_back(y);
        }
      for (auto y : in.row_cols(x))
        if (seen[y] != stamp && !removed.count(pair_key(y, x))) {
          seen[y] = stamp;
          frontier.push_back(y);
        }
    }
    return false;
  };

  std::vector<io::Edge> order(g.edges().begin(), g.edges().end());
  rng.shuffle(order);
  LinkSample sample;
  sample.quota = quota;
  for (const auto& e : order) {
    if (sample.pairs.size() == quota) break;
    removed.insert(pair_key(e.src, e.dst));
    const bool keeps_connected = e.src == e.dst || present(e.dst, e.src) || reachable(e.src, e.dst);
    if (keeps_connected) {
      sample.pairs.push_back(e);
    } else {
      removed.erase(pair_key(e.src, e.dst));
    }
  }
  if (sample.pairs.size() < quota)
    fail(ErrorCode::state, "could only remove " + std::to_string(sample.pairs.size()) + " of " +
                               std::to_string(quota) + " edges without disconnecting the residual graph");

  const std::size_t non_edges = n * (n - 1) - (g.edge_count() - g.self_loop_count());
  if (non_edges < quota) fail(ErrorCode::state, "graph has fewer non-edges than the requested false samples");
  std::unordered_set<std::uint64_t> drawn;
  while (sample.pairs.size() < 2 * quota) {
    auto u = static_cast<io::NodeIndex>(rng.below(n));
    auto v = static_cast<io::NodeIndex>(rng.below(n));
    if (u == v || g.has_edge(u, v) || !drawn.insert(pair_key(u, v)).second) continue;
    sample.pairs.push_back({u, v});
  }
  sample.labels.assign(2 * quota, 0);
  std::fill(sample.labels.begin(), sample.labels.begin() + static_cast<std::ptrdiff_t>(quota), 1);
  sample.residual = g.without_edges(sample.true_pairs());
  return sample;
}

std::string to_string(EdgeFeature f) {
  switch (f) {
    case EdgeFeature::average: return "Average";
    case EdgeFeature::hadamard: return "Hadamard";
    case EdgeFeature::weighted_l1: return "W-L1";
    case EdgeFeature::weighted_l2: return "W-L2";
  }
  return "?";
}

EdgeFeature parse_edge_feature(const std::string& text) {
  std::string t;
  for (char c : text) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "average" || t == "avg") return EdgeFeature::average;
  if (t == "hadamard") return EdgeFeature::hadamard;
  if (t == "w-l1" || t == "wl1" || t == "weighted-l1") return EdgeFeature::weighted_l1;
  if (t == "w-l2" || t == "wl2" || t == "weighted-l2") return EdgeFeature::weighted_l2;
  fail(ErrorCode::invalid_argument, "unknown edge feature '" + text + "' (expected Average|Hadamard|W-L1|W-L2)");
}

Eigen::RowVectorXd edge_features(const EmbeddingSet& emb, io::Edge pair, EdgeFeature kind, ScorerMode mode) {
  const auto a = source_of(emb, mode).row(pair.src).array();
  const auto b = target_of(emb, mode).row(pair.dst).array();
  switch (kind) {
    case EdgeFeature::average: return ((a + b) / 2.0).matrix();
    case EdgeFeature::hadamard: return (a * b).matrix();
    case EdgeFeature::weighted_l1: return (a - b).abs().matrix();
    case EdgeFeature::weighted_l2: return (a - b).square().matrix();
  }
  return {};
}

Matrix edge_feature_matrix(const EmbeddingSet& emb, std::span<const io::Edge> pairs, EdgeFeature kind,
                           ScorerMode mode) {
  Matrix x(static_cast<Eigen::Index>(pairs.size()), static_cast<Eigen::Index>(emb.dim()));
  for (std::size_t r = 0; r < pairs.size(); ++r) x.row(static_cast<Eigen::Index>(r)) = edge_features(emb, pairs[r], kind, mode);
  return x;
}

// ----------------------------------------------------------------- classifier

double logistic_objective(const LogisticModel& model, const Matrix& x, std::span<const int> y, double l2) {
  Eigen::VectorXd z = x * model.weights;
  double f = 0.5 * l2 * model.weights.squaredNorm();
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double zi = z[i] + model.intercept;
    f += softplus(zi) - y[static_cast<std::size_t>(i)] * zi;
  }
  return f;
}

LogisticModel logistic_regression_fit(const Matrix& x, std::span<const int> y, const LogisticOptions& opts) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) fail(ErrorCode::shape, "feature rows and labels differ in count");
  if (x.rows() == 0) fail(ErrorCode::invalid_argument, "cannot fit a classifier on zero samples");
  if (!x.allFinite()) fail(ErrorCode::numeric, "classifier features contain non-finite values");
  if (!(opts.l2 >= 0.0)) fail(ErrorCode::invalid_argument, "l2 must be nonnegative");
  check_labels(y);
  const Eigen::Index n = x.rows(), d = x.cols();
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = y[static_cast<std::size_t>(i)];

  LogisticModel m;
  m.weights = Eigen::VectorXd::Zero(d);
  double f = logistic_objective(m, x, y, opts.l2);
  for (m.iterations = 0; m.iterations < opts.max_iter; ++m.iterations) {
    Eigen::VectorXd z = (x * m.weights).array() + m.intercept;
    Eigen::VectorXd p = z.unaryExpr([](double t) { return sigmoid(t); });
    Eigen::VectorXd r = p - yv;
    Eigen::VectorXd grad(d + 1);
    grad.head(d) = x.transpose() * r + opts.l2 * m.weights;
    grad[d] = r.sum();
    if (grad.norm() < opts.tolerance) {
      m.converged = true;
      break;
    }
    Eigen::VectorXd wdiag = (p.array() * (1.0 - p.array())).matrix();
    Eigen::MatrixXd h(d + 1, d + 1);
    Matrix xw = x.array().colwise() * wdiag.array();
    h.topLeftCorner(d, d) = x.transpose() * xw;
    h.topLeftCorner(d, d).diagonal().array() += opts.l2;
    Eigen::VectorXd hb = xw.colwise().sum().transpose();
    h.topRightCorner(d, 1) = hb;
    h.bottomLeftCorner(1, d) = hb.transpose();
    h(d, d) = wdiag.sum() + 1e-12;
    Eigen::VectorXd step = h.ldlt().solve(grad);
    if (!step.allFinite() || grad.dot(step) <= 0.0) step = grad;  // fall back to steepest descent

    double t = 1.0;
    LogisticModel trial = m;
    double ft = f;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      trial.weights = m.weights - t * step.head(d);
      trial.intercept = m.intercept - t * step[d];
      ft = logistic_objective(trial, x, y, opts.l2);
      if (ft <= f - 1e-4 * t * grad.dot(step)) break;
    }
    if (!(ft < f)) {
      // No further decrease available at working precision.
      m.converged = grad.norm() < std::sqrt(opts.tolerance);
      break;
    }
    m.weights = trial.weights;
    m.intercept = trial.intercept;
    f = ft;
  }
  return m;
}

Eigen::VectorXd predict_proba(const LogisticModel& model, const Matrix& x) {
  Eigen::VectorXd z = (x * model.weights).array() + model.intercept;
  return z.unaryExpr([](double t) { return sigmoid(t); });
}

// --------------------------------------------------------------------- metrics

double auc_score(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) fail(ErrorCode::shape, "labels and scores differ in length");
  if (labels.empty()) fail(ErrorCode::invalid_argument, "AUC of an empty sample");
  check_labels(labels);
  const auto n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) {
        rank_sum += midrank;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) fail(ErrorCode::invalid_argument, "AUC needs both positive and negative samples");
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double binary_f1(std::span<const int> labels, std::span<const int> predicted) {
  if (labels.size() != predicted.size()) fail(ErrorCode::shape, "labels and predictions differ in length");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted[i] == 1 && labels[i] == 1) ++tp;
    else if (predicted[i] == 1) ++fp;
    else if (labels[i] == 1) ++fn;
  }
  const auto denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

F1Scores micro_macro_f1(std::span<const std::uint32_t> truth, std::span<const std::uint32_t> predicted,
                        std::size_t classes) {
  if (truth.size() != predicted.size()) fail(ErrorCode::shape, "truth and predictions differ in length");
  if (truth.empty()) fail(ErrorCode::invalid_argument, "F1 of an empty sample");
  std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= classes || predicted[i] >= classes) fail(ErrorCode::invalid_argument, "class index out of range");
    if (truth[i] == predicted[i]) {
      ++tp[truth[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[truth[i]];
    }
  }
  F1Scores s;
  std::size_t stp = 0, sfp = 0, sfn = 0;
  double macro = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    stp += tp[c];
    sfp += fp[c];
    sfn += fn[c];
    const auto denom = 2 * tp[c] + fp[c] + fn[c];
    macro += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
  }
  s.micro = 2.0 * static_cast<double>(stp) / static_cast<double>(2 * stp + sfp + sfn);
  s.macro = macro / static_cast<double>(classes);
  return s;
}

MetricSummary MetricSummary::of(std::vector<double> values) {
  MetricSummary s;
  s.values = std::move(values);
  if (s.values.empty()) return s;
  const double n = static_cast<double>(s.values.size());
  s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / n);
  return s;
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) fail(ErrorCode::invalid_argument, "need at least two folds");
  nn::Rng rng(seed);
  std::vector<std::size_t> fold(labels.size(), 0);
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  for (int c : classes) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) members.push_back(i);
    if (members.size() < folds)
      fail(ErrorCode::invalid_argument, "class " + std::to_string(c) + " has fewer members than folds");
    rng.shuffle(members);
    for (std::size_t r = 0; r < members.size(); ++r) fold[members[r]] = r % folds;
  }
  return fold;
}

LinkPredictionReport link_prediction_eval(const EmbeddingSet& emb, const LinkSample& sample,
                                          std::span<const EdgeFeature> features, ScorerMode mode, std::uint64_t seed,
                                          const LogisticOptions& opts, std::size_t folds) {
  if (sample.labels.size() != sample.pairs.size()) fail(ErrorCode::shape, "link sample labels and pairs differ");
  const auto positives = static_cast<std::size_t>(std::count(sample.labels.begin(), sample.labels.end(), 1));
  if (positives * 2 != sample.labels.size()) fail(ErrorCode::invalid_argument, "link sample is not balanced");
  for (const auto& e : sample.pairs)
    if (e.src >= emb.node_count() || e.dst >= emb.node_count())
      fail(ErrorCode::mismatch, "link sample references nodes outside the embedding set");

  const auto fold = stratified_folds(sample.labels, folds, seed);
  LinkPredictionReport report;
  report.mode = mode;
  report.folds = folds;
  report.samples = sample.pairs.size();
  for (auto kind : features) {
    const Matrix x = edge_feature_matrix(emb, sample.pairs, kind, mode);
    std::vector<double> aucs, f1s;
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<Eigen::Index> train, test;
      for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
      Matrix xtr = x(train, Eigen::all), xte = x(test, Eigen::all);
      std::vector<int> ytr, yte;
      for (auto i : train) ytr.push_back(sample.labels[static_cast<std::size_t>(i)]);
      for (auto i : test) yte.push_back(sample.labels[static_cast<std::size_t>(i)]);
      const auto m = logistic_regression_fit(xtr, ytr, opts);
      const Eigen::VectorXd prob = predict_proba(m, xte);
      std::vector<double> scores(prob.data(), prob.data() + prob.size());
      std::vector<int> pred;
      for (double s : scores) pred.push_back(s >= 0.5 ? 1 : 0);
      aucs.push_back(auc_score(yte, scores));
      f1s.push_back(binary_f1(yte, pred));
    }
    report.rows.push_back({kind, MetricSummary::of(std::move(aucs)), MetricSummary::of(std::move(f1s))});
  }
  return report;
}

NodeFeatures parse_node_features(const std::string& text) {
  if (text == "z") return NodeFeatures::z;
  if (text == "zoi") return NodeFeatures::zoi;
  fail(ErrorCode::invalid_argument, "unknown node features '" + text + "' (expected z|zoi)");
}

std::string to_string(NodeFeatures f) { return f == NodeFeatures::z ? "z" : "zoi"; }

std::vector<std::uint32_t> one_vs_rest_predict(const Matrix& train_x, std::span<const std::uint32_t> train_y,
                                               const Matrix& test_x, std::size_t classes,
                                               const LogisticOptions& opts) {
  Matrix prob(test_x.rows(), static_cast<Eigen::Index>(classes));
  std::vector<int> y(train_y.size());
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < train_y.size(); ++i) y[i] = train_y[i] == c ? 1 : 0;
    const auto m = logistic_regression_fit(train_x, y, opts);
    prob.col(static_cast<Eigen::Index>(c)) = predict_proba(m, test_x);
  }
  std::vector<std::uint32_t> pred(static_cast<std::size_t>(test_x.rows()));
  for (Eigen::Index r = 0; r < prob.rows(); ++r) {
    Eigen::Index best;
    prob.row(r).maxCoeff(&best);
    pred[static_cast<std::size_t>(r)] = static_cast<std::uint32_t>(best);
  }
  return pred;
}

ClassificationReport node_classification_eval(const EmbeddingSet& emb, const io::LabelVector& labels,
                                              std::span<const double> train_ratios, std::size_t repetitions,
                                              std::uint64_t seed, NodeFeatures features,
                                              const LogisticOptions& opts) {
  const auto n = emb.node_count();
  if (labels.labels.size() != n)
    fail(ErrorCode::mismatch, "labels cover " + std::to_string(labels.labels.size()) + " nodes, embeddings " +
                                  std::to_string(n));
  const auto classes = labels.class_count();
  Matrix x = features == NodeFeatures::z ? emb.z : Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(3 * emb.dim()));
  if (features == NodeFeatures::zoi) x << emb.z, emb.o, emb.i;

  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t u = 0; u < n; ++u) members[labels.labels[u]].push_back(u);

  ClassificationReport report;
  report.features = features;
  report.repetitions = repetitions;
  for (std::size_t r = 0; r < train_ratios.size(); ++r) {
    const double ratio = train_ratios[r];
    if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorCode::invalid_argument, "train ratios must lie in (0, 1)");
    std::vector<double> micro, macro;
    for (std::size_t t = 0; t < repetitions; ++t) {
      nn::Rng rng(seed * 1000003ULL + r * 1009ULL + t);
      std::vector<std::size_t> train, test;
      constexpr int kMaxRetries = 10;
      for (int attempt = 0;; ++attempt) {
        train.clear();
        test.clear();
        for (auto group : members) {
          rng.shuffle(group);
          auto take = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(group.size())));
          take = std::clamp<std::size_t>(take, group.size() > 1 ? 1 : group.size(),
                                         group.size() > 1 ? group.size() - 1 : group.size());
          train.insert(train.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(take));
          test.insert(test.end(), group.begin() + static_cast<std::ptrdiff_t>(take), group.end());
        }
        std::vector<bool> seen(classes, false);
        for (auto u : train) seen[labels.labels[u]] = true;
        if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) break;
        if (attempt + 1 == kMaxRetries)
          fail(ErrorCode::state, "a class is missing from every resampled training split");
      }
      std::sort(train.begin(), train.end());
      std::sort(test.begin(), test.end());
      std::vector<Eigen::Index> tr(train.begin(), train.end()), te(test.begin(), test.end());
      std::vector<std::uint32_t> ytr, yte;
      for (auto u : train) ytr.push_back(labels.labels[u]);
      for (auto u : test) yte.push_back(labels.labels[u]);
      const auto pred = one_vs_rest_predict(x(tr, Eigen::all), ytr, x(te, Eigen::all), classes, opts);
      const auto f1 = micro_macro_f1(yte, pred, classes);
      micro.push_back(f1.micro);
      macro.push_back(f1.macro);
    }
    report.rows.push_back({ratio, MetricSummary::of(std::move(micro)), MetricSummary::of(std::move(macro))});
  }
  return report;
}

// --------------------------------------------------------------------- reports

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

namespace {

nlohmann::json summary_json(const MetricSummary& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"values", s.values}};
}

}  // namespace

EvalReport make_report(const std::vector<PrecisionAtK>& rows, const std::string& model_name,
                       const nlohmann::json& context) {
  EvalReport r;
  r.kind = "reconstruct";
  r.json = {{"experiment", r.kind}, {"context", context}, {"model", model_name}};
  auto& table = r.json["precision_at_k"] = nlohmann::json::array();
  std::string header = "algorithm", line = model_name;
  for (const auto& row : rows) {
    table.push_back({{"k", row.k}, {"hits", row.hits}, {"precision", row.precision}});
    header += ",K=" + std::to_string(row.k);
    line += "," + format_number(row.precision);
  }
  r.csv = header + "\n" + line + "\n";
  return r;
}

EvalReport make_report(const LinkPredictionReport& report, const nlohmann::json& context) {
  EvalReport r;
  r.kind = "linkpred";
  r.json = {{"experiment", r.kind},      {"context", context},       {"scorer", to_string(report.mode)},
            {"folds", report.folds},     {"samples", report.samples}};
  auto& table = r.json["constructors"] = nlohmann::json::array();
  r.csv = "constructor,auc_mean,auc_std,f1_mean,f1_std\n";
  r.plot_csv = "constructor,mean,std\n";
  for (const auto& row : report.rows) {
    table.push_back({{"constructor", to_string(row.feature)}, {"auc", summary_json(row.auc)}, {"f1", summary_json(row.f1)}});
    r.csv += to_string(row.feature) + "," + format_number(row.auc.mean) + "," + format_number(row.auc.std) + "," +
             format_number(row.f1.mean) + "," + format_number(row.f1.std) + "\n";
    r.plot_csv += to_string(row.feature) + "," + format_number(row.auc.mean) + "," + format_number(row.auc.std) + "\n";
  }
  return r;
}

EvalReport make_report(const ClassificationReport& report, const nlohmann::json& context) {
  EvalReport r;
  r.kind = "classify";
  r.json = {{"experiment", r.kind},
            {"context", context},
            {"features", to_string(report.features)},
            {"repetitions", report.repetitions}};
  auto& table = r.json["ratios"] = nlohmann::json::array();
  r.csv = "train_ratio,micro_f1,macro_f1\n";
  for (const auto& row : report.rows) {
    table.push_back({{"train_ratio", row.train_ratio}, {"micro_f1", summary_json(row.micro)}, {"macro_f1", summary_json(row.macro)}});
    r.csv += format_number(row.train_ratio) + "," + format_number(row.micro.mean) + "," +
             format_number(row.macro.mean) + "\n";
  }
  return r;
}

}  // namespace diagram::eval
