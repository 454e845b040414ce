#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "error.hpp"
#include "oracles.hpp"
#include "tensor_nn.hpp"
#include "test_util.hpp"

using namespace diagram;
using nn::Matrix;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

oracle::Dense to_dense(const Matrix& m) {
  oracle::Dense d(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) d[r][c] = m(r, c);
  return d;
}

std::vector<double> row_of(const Matrix& m, Eigen::Index r) {
  return std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols());
}

}  // namespace

TEST_CASE("forward layer") {
  std::mt19937_64 rng(1);
  SUBCASE("zero layer gives zero output") {
    auto layer = nn::LinearLayer::zeros(4, 3);
    auto y = nn::forward_layer(layer, random_matrix(5, 4, rng));
    CHECK(y.isZero(0.0));
  }
  SUBCASE("1x1 tanh") {
    auto layer = nn::LinearLayer::zeros(1, 1);
    layer.weight(0, 0) = 1.0;
    Matrix x(1, 1);
    x(0, 0) = 0.5;
    CHECK(nn::forward_layer(layer, x)(0, 0) == doctest::Approx(0.46211715726).epsilon(1e-11));
  }
  SUBCASE("random 3x4 layer matches scalar oracle") {
    nn::Rng r(4);
    auto layer = nn::LinearLayer::glorot(4, 3, r);
    layer.bias = random_matrix(1, 3, rng);
    Matrix x = random_matrix(2, 4, rng);
    auto y = nn::forward_layer(layer, x);
    for (Eigen::Index i = 0; i < 2; ++i) {
      auto ref = oracle::dense_layer(row_of(x, i), to_dense(layer.weight), row_of(layer.bias, 0), true);
      for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::fabs(y(i, j) - ref[j]) < 1e-12);
      for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::fabs(y(i, j)) < 1.0);
    }
  }
  SUBCASE("identity activation") {
    auto layer = nn::LinearLayer::zeros(2, 2, nn::Activation::identity);
    layer.weight << 2, 0, 0, 3;
    Matrix x(1, 2);
    x << 1, 1;
    auto y = nn::forward_layer(layer, x);
    CHECK(y(0, 0) == 2.0);
    CHECK(y(0, 1) == 3.0);
  }
  SUBCASE("sparse and dense inputs agree") {
    nn::Rng r(9);
    auto layer = nn::LinearLayer::glorot(6, 3, r);
    Matrix x = Matrix::Zero(3, 6);
    x(0, 1) = 1;
    x(1, 4) = 2;
    x(2, 0) = -1;
    x(2, 5) = 0.5;
    nn::SparseBatch sx = x.sparseView();
    CHECK((nn::forward_layer(layer, x) - nn::forward_layer(layer, sx)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("shape mismatch names both shapes") {
    auto layer = nn::LinearLayer::zeros(4, 3);
    try {
      nn::forward_layer(layer, Matrix::Zero(2, 5));
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::shape);
      const std::string msg = e.what();
      CHECK(msg.find("2x5") != std::string::npos);
      CHECK(msg.find("3x4") != std::string::npos);
    }
  }
}

TEST_CASE("glorot bounds") {
  nn::Rng r(3);
  auto layer = nn::LinearLayer::glorot(30, 20, r);
  const double bound = std::sqrt(6.0 / 50.0);
  CHECK(layer.weight.cwiseAbs().maxCoeff() <= bound);
  CHECK(layer.weight.cwiseAbs().maxCoeff() > 0.8 * bound);
  CHECK(layer.bias.isZero(0.0));
}

TEST_CASE("masked squared error") {
  std::mt19937_64 rng(2);
  SUBCASE("exact prediction") {
    Matrix p = random_matrix(3, 4, rng);
    auto r = nn::masked_sq_error(p, p, Matrix::Constant(3, 4, 10.0));
    CHECK(r.loss == 0.0);
    CHECK(r.grad.isZero(0.0));
  }
  SUBCASE("worked example") {
    Matrix p(1, 2), t(1, 2), w(1, 2);
    p << 1, 0;
    t << 0, 0;
    w << 10, 1;
    auto r = nn::masked_sq_error(p, t, w);
    CHECK(r.loss == 100.0);
    CHECK(r.grad(0, 0) == 200.0);
  }
  SUBCASE("random 5x7 against scalar loops") {
    Matrix p = random_matrix(5, 7, rng), t = random_matrix(5, 7, rng), w = random_matrix(5, 7, rng, 10.0);
    auto r = nn::masked_sq_error(p, t, w);
    double loss = 0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 7; ++j) {
        const double d = p(i, j) - t(i, j);
        loss += d * w(i, j) * d * w(i, j);
        CHECK(std::fabs(r.grad(i, j) - 2 * d * w(i, j) * w(i, j)) < 1e-12);
      }
    CHECK(std::fabs(r.loss - loss) < 1e-12 * std::max(1.0, loss));
  }
  SUBCASE("zero exactly when weighted coordinates agree") {
    Matrix p = random_matrix(2, 3, rng), t = p, w = Matrix::Ones(2, 3);
    t(1, 2) += 1.0;
    w(1, 2) = 0.0;
    CHECK(nn::masked_sq_error(p, t, w).loss == 0.0);
    w(1, 2) = 1.0;
    CHECK(nn::masked_sq_error(p, t, w).loss > 0.0);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(nn::masked_sq_error(Matrix::Zero(2, 2), Matrix::Zero(2, 3), Matrix::Zero(2, 2)), Error);
  }
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(8);
  nn::Rng r(5);
  Matrix x = random_matrix(4, 5, rng);
  SUBCASE("rate zero is identity") {
    Matrix y = nn::apply_dropout(x, 0.0, r, true);
    CHECK(y == x);
  }
  SUBCASE("inference is bitwise identity") {
    Matrix y = nn::apply_dropout(x, 0.5, r, false);
    CHECK(std::memcmp(y.data(), x.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0);
  }
  SUBCASE("zero fraction and survivor scaling") {
    Matrix big = Matrix::Ones(1000, 1000);
    Matrix mask;
    Matrix y = nn::apply_dropout(big, 0.2, r, true, &mask);
    const double zeros = static_cast<double>((y.array() == 0.0).count()) / 1e6;
    CHECK(std::fabs(zeros - 0.2) <= 0.003);
    CHECK(y.maxCoeff() == doctest::Approx(1.25));
    CHECK(mask == y);
  }
  SUBCASE("invalid rate") {
    CHECK_THROWS_AS(nn::apply_dropout(x, 1.0, r, true), Error);
    CHECK_THROWS_AS(nn::apply_dropout(x, -0.1, r, true), Error);
  }
}

TEST_CASE("backward layer against finite differences") {
  std::mt19937_64 rng(12);
  nn::Rng r(12);
  auto l1 = nn::LinearLayer::glorot(5, 4, r);
  auto l2 = nn::LinearLayer::glorot(4, 3, r);
  l1.bias = random_matrix(1, 4, rng, 0.3);
  l2.bias = random_matrix(1, 3, rng, 0.3);
  Matrix x = random_matrix(6, 5, rng), target = random_matrix(6, 3, rng, 0.9), w = random_matrix(6, 3, rng, 3.0);
  nn::LayerGrad g1(l1), g2(l2);
  auto loss = [&] {
    auto h = nn::forward_layer(l1, x);
    return nn::masked_sq_error(nn::forward_layer(l2, h), target, w).loss;
  };
  auto h = nn::forward_layer(l1, x);
  auto y = nn::forward_layer(l2, h);
  auto lr = nn::masked_sq_error(y, target, w);
  Matrix dh = nn::backward_layer(l2, h, y, lr.grad, g2);
  nn::backward_layer(l1, x, h, dh, g1);
  std::vector<nn::ParamSlot> slots{{"l1.w", &l1.weight, &g1.weight},
                                   {"l1.b", &l1.bias, &g1.bias},
                                   {"l2.w", &l2.weight, &g2.weight},
                                   {"l2.b", &l2.bias, &g2.bias}};
  SUBCASE("all coordinates") { CHECK(nn::finite_diff_check(loss, slots) < 1e-6); }
  SUBCASE("50 sampled coordinates") { CHECK(nn::finite_diff_check(loss, slots, 1e-5, 50, 3) < 1e-4); }
  SUBCASE("corrupted gradient is caught") {
    Matrix bad = g1.weight;
    bad(1, 2) *= 2.0;
    if (std::fabs(bad(1, 2)) < 0.5) bad(1, 2) += 1.0;
    slots[0].grad = &bad;
    CHECK(nn::finite_diff_check(loss, slots) > 0.3);
  }
  SUBCASE("sparse input gives the same parameter gradient") {
    Matrix xs = x;
    for (Eigen::Index i = 0; i < xs.size(); ++i)
      if (i % 3) xs.data()[i] = 0.0;
    nn::SparseBatch sx = xs.sparseView();
    nn::LayerGrad gd(l1), gs(l1);
    auto y1 = nn::forward_layer(l1, xs);
    Matrix dy = random_matrix(6, 4, rng);
    nn::backward_layer(l1, xs, y1, dy, gd);
    nn::backward_layer(l1, sx, y1, dy, gs);
    CHECK((gd.weight - gs.weight).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((gd.bias - gs.bias).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("finite difference check is tight on a quadratic") {
  Matrix w(1, 3);
  w << 0.5, -1.0, 2.0;
  Matrix g = 2.0 * w;
  std::vector<nn::ParamSlot> slots{{"w", &w, &g}};
  CHECK(nn::finite_diff_check([&] { return w.squaredNorm(); }, slots) < 1e-9);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Matrix w = Matrix::Constant(2, 2, 0.7), g = Matrix::Zero(2, 2);
    nn::AdamOptimizer opt;
    std::vector<nn::ParamSlot> slots{{"w", &w, &g}};
    opt.step(slots);
    CHECK(w == Matrix::Constant(2, 2, 0.7));
    CHECK(opt.step_count() == 1);
  }
  SUBCASE("first step with unit gradient moves by lr") {
    Matrix w = Matrix::Zero(1, 1), g = Matrix::Ones(1, 1);
    nn::AdamOptimizer opt;
    std::vector<nn::ParamSlot> slots{{"w", &w, &g}};
    opt.step(slots);
    CHECK(w(0, 0) == doctest::Approx(-1e-4).epsilon(1e-7));
  }
  SUBCASE("five steps on a quadratic match a hand-stepped trace") {
    nn::AdamConfig cfg;
    cfg.learning_rate = 0.1;
    nn::AdamOptimizer opt(cfg);
    Matrix w(1, 2), g(1, 2);
    w << 1.0, -2.0;
    std::vector<nn::ParamSlot> slots{{"w", &w, &g}};
    double ref[2] = {1.0, -2.0}, m[2] = {0, 0}, v[2] = {0, 0};
    for (int t = 1; t <= 5; ++t) {
      g = 3.0 * w;  // f = 1.5 |w|^2
      opt.step(slots);
      for (int j = 0; j < 2; ++j) {
        const double gj = 3.0 * ref[j];
        m[j] = 0.9 * m[j] + 0.1 * gj;
        v[j] = 0.999 * v[j] + 0.001 * gj * gj;
        const double mh = m[j] / (1 - std::pow(0.9, t)), vh = v[j] / (1 - std::pow(0.999, t));
        ref[j] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      }
    }
    CHECK(std::fabs(w(0, 0) - ref[0]) < 1e-12);
    CHECK(std::fabs(w(0, 1) - ref[1]) < 1e-12);
  }
  SUBCASE("non-finite gradient names the parameter") {
    Matrix w = Matrix::Zero(1, 2), g = Matrix::Zero(1, 2);
    g(0, 1) = std::nan("");
    nn::AdamOptimizer opt;
    std::vector<nn::ParamSlot> slots{{"decoder.0.weight", &w, &g}};
    try {
      opt.step(slots);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::numeric);
      CHECK(std::string(e.what()).find("decoder.0.weight") != std::string::npos);
    }
    CHECK(w.isZero(0.0));
  }
  SUBCASE("trajectories are reproducible") {
    auto run = [] {
      std::mt19937_64 rng(4);
      Matrix w = random_matrix(3, 3, rng), g;
      nn::AdamOptimizer opt;
      std::vector<nn::ParamSlot> slots{{"w", &w, &g}};
      for (int t = 0; t < 20; ++t) {
        g = w.array().sin().matrix();
        opt.step(slots);
      }
      return w;
    };
    Matrix a = run(), b = run();
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 9) == 0);
  }
}

TEST_CASE("rng") {
  nn::Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  nn::Rng c(1);
  for (int i = 0; i < 1000; ++i) {
    auto v = c.below(7);
    CHECK(v < 7);
    double u = c.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  std::vector<int> v{1, 2, 3, 4, 5, 6};
  nn::Rng d(3);
  d.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("checkpoint round trip is bit exact") {
  std::mt19937_64 rng(6);
  nn::Checkpoint ck;
  ck.seed = 77;
  ck.metadata = {{"variant", "node"}, {"note", "a b\tc"}};
  ck.tensors.push_back({"a", random_matrix(3, 4, rng)});
  ck.tensors.push_back({"b", random_matrix(1, 5, rng)});
  testutil::TempDir dir;
  nn::save_checkpoint(ck, dir.file("m.ckpt"));
  auto back = nn::load_checkpoint(dir.file("m.ckpt"));
  CHECK(back.seed == 77);
  CHECK(back.metadata == ck.metadata);
  REQUIRE(back.tensors.size() == 2);
  CHECK(std::memcmp(back.tensor("a").data(), ck.tensors[0].value.data(), sizeof(double) * 12) == 0);
  CHECK(back.tensor("b") == ck.tensors[1].value);
  CHECK_THROWS_AS(back.tensor("c"), Error);

  auto bytes = testutil::read_text(dir.file("m.ckpt"));
  testutil::write_text(dir.file("t.ckpt"), bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(nn::load_checkpoint(dir.file("t.ckpt")), Error);
  testutil::write_text(dir.file("x.ckpt"), "NOTACKPT" + bytes.substr(8));
  CHECK_THROWS_AS(nn::load_checkpoint(dir.file("x.ckpt")), Error);
  testutil::write_text(dir.file("e.ckpt"), bytes + "junk");
  CHECK_THROWS_AS(nn::load_checkpoint(dir.file("e.ckpt")), Error);
}
