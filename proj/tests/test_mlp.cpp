#include <algorithm>
#include <cmath>
#include <vector>

#include "cusal/matrix.hpp"
#include "cusal/mlp.hpp"
#include "cusal/rng.hpp"
#include "doctest.h"

using namespace cusal;

namespace {

// two well-separated Gaussian blobs, labels 0/1
void make_blobs(RngStream& rng, int n_per_class, Matrix& x, std::vector<int>& y) {
  for (int c = 0; c < 2; ++c) {
    const double cx = c == 0 ? 0.0 : 4.0;
    for (int i = 0; i < n_per_class; ++i) {
      std::vector<double> row{cx + 0.5 * rng.normal(), cx + 0.5 * rng.normal()};
      x.append_row(row);
      y.push_back(c);
    }
  }
}

double accuracy(const MlpClassifier& model, const Matrix& x, const std::vector<int>& y) {
  const auto probs = model.predict_proba(x);
  int hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (probs[i].argmax() == y[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

}  // namespace

TEST_SUITE_BEGIN("models");

TEST_CASE("weight init respects the fan-based bound, biases start at zero") {
  MlpClassifier model(4, {8}, 3);
  RngStream rng(201);
  model.init_weights(rng);
  const double bounds[] = {std::sqrt(6.0 / (4 + 8)), std::sqrt(6.0 / (8 + 3))};
  bool any_nonzero = false;
  for (int l = 0; l < 2; ++l) {
    for (double w : model.weights()[static_cast<std::size_t>(l)].data()) {
      CHECK(std::fabs(w) <= bounds[l]);
      any_nonzero = any_nonzero || w != 0.0;
    }
    for (double b : model.biases()[static_cast<std::size_t>(l)]) CHECK(b == 0.0);
  }
  CHECK(any_nonzero);
}

TEST_CASE("training is bit-reproducible for equal seeds") {
  Matrix x;
  std::vector<int> y;
  RngStream data_rng(202);
  make_blobs(data_rng, 20, x, y);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;

  MlpClassifier a(2, {6}, 2), b(2, {6}, 2);
  RngStream ra(7), rb(7);
  const double la = a.train(x, y, cfg, ra);
  const double lb = b.train(x, y, cfg, rb);
  CHECK(la == lb);
  CHECK(a.flat_parameters() == b.flat_parameters());

  MlpClassifier c(2, {6}, 2);
  RngStream rc(8);
  c.train(x, y, cfg, rc);
  CHECK(a.flat_parameters() != c.flat_parameters());
}

TEST_CASE("separable blobs are fit to >= 0.99 training accuracy") {
  Matrix x;
  std::vector<int> y;
  RngStream data_rng(203);
  make_blobs(data_rng, 50, x, y);

  MlpClassifier model(2, {8}, 2);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 16;
  cfg.epochs = 30;
  RngStream rng(204);
  const double final_loss = model.train(x, y, cfg, rng);
  CHECK(std::isfinite(final_loss));
  CHECK(accuracy(model, x, y) >= 0.99);
}

TEST_CASE("loss strictly decreases over the first epochs on one sample") {
  const auto x = Matrix::from_rows({{0.3, -0.7}});
  const std::vector<int> y{1};
  MlpClassifier model(2, {4}, 2, 0.0);
  RngStream rng(205);

  TrainConfig first;
  first.epochs = 1;
  first.batch_size = 1;
  first.learning_rate = 0.05;
  TrainConfig next = first;
  next.reinit_each_round = false;

  model.init_weights(rng);
  double prev = model.loss(x, y);
  for (int e = 0; e < 5; ++e) {
    model.train(x, y, e == 0 ? first : next, rng);
    const double cur = model.loss(x, y);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("a blown-up learning rate raises the divergence error") {
  Matrix x;
  std::vector<int> y;
  RngStream data_rng(206);
  make_blobs(data_rng, 10, x, y);
  MlpClassifier model(2, {8, 8}, 2, 0.0);
  TrainConfig cfg;
  cfg.learning_rate = 1e150;
  cfg.epochs = 10;
  cfg.batch_size = 4;
  RngStream rng(207);
  CHECK_THROWS_WITH_AS(model.train(x, y, cfg, rng), doctest::Contains("training diverged"),
                       std::runtime_error);
}

TEST_CASE("analytic gradients agree with central differences") {
  RngStream rng(208);
  const std::vector<std::vector<int>> shapes{{4}, {4, 3}};
  for (const auto& hidden : shapes) {
    MlpClassifier model(3, hidden, 3, 0.0);
    model.init_weights(rng);
    Matrix x;
    std::vector<int> y;
    for (int i = 0; i < 6; ++i) {
      std::vector<double> row{rng.normal(), rng.normal(), rng.normal()};
      x.append_row(row);
      y.push_back(static_cast<int>(rng.below(3)));
    }
    const auto analytic = model.loss_gradient(x, y);
    auto theta = model.flat_parameters();
    REQUIRE(analytic.size() == theta.size());

    const double h = 1e-5;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + h;
      model.set_flat_parameters(theta);
      const double up = model.loss(x, y);
      theta[i] = saved - h;
      model.set_flat_parameters(theta);
      const double dn = model.loss(x, y);
      theta[i] = saved;
      const double fd = (up - dn) / (2.0 * h);
      num += (analytic[i] - fd) * (analytic[i] - fd);
      den += fd * fd;
    }
    model.set_flat_parameters(theta);
    CHECK(std::sqrt(num) <= 1e-4 * std::max(std::sqrt(den), 1e-8));
  }
}

TEST_CASE("penultimate embedding on a hand-built identity network") {
  MlpClassifier model(2, {2}, 2, 0.0);
  // W0 = I, b0 = 0, W1 = 0, b1 = 0
  std::vector<double> theta{1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0};
  model.set_flat_parameters(theta);

  const auto x = Matrix::from_rows({{0.5, -0.2}});
  const auto z = model.penultimate_embedding(x);
  CHECK(z.rows() == 1);
  CHECK(z.cols() == 2);
  CHECK(z.at(0, 0) == 0.5);  // relu passes the positive coordinate
  CHECK(z.at(0, 1) == 0.0);  // relu clips the negative one
}

TEST_CASE("gradient embedding of a uniform forecast, by hand") {
  MlpClassifier model(2, {2}, 2, 0.0);
  std::vector<double> theta{1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0};
  model.set_flat_parameters(theta);

  // x = (1,0): z = (1,0), logits = (0,0), p = (1/2,1/2), predicted class 0.
  // Row is class-major (p_k - [k==0]) * z = (-0.5, 0, 0.5, 0).
  const auto x = Matrix::from_rows({{1.0, 0.0}});
  const auto g = model.gradient_embedding(x);
  CHECK(g.rows() == 1);
  CHECK(g.cols() == 4);
  CHECK(g.at(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(g.at(0, 1) == doctest::Approx(0.0).epsilon(1).scale(1e-12));
  CHECK(g.at(0, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.at(0, 3) == doctest::Approx(0.0).epsilon(1).scale(1e-12));
}

TEST_CASE("gradient embedding matches last-layer finite differences") {
  RngStream rng(209);
  MlpClassifier model(2, {3}, 2, 0.0);
  model.init_weights(rng);
  const auto x = Matrix::from_rows({{0.4, -1.1}});
  const int pseudo = model.predict_proba(x)[0].argmax();
  const auto emb = model.gradient_embedding(x);

  auto theta = model.flat_parameters();
  const std::size_t w1_offset = 3 * 2 + 3;  // past W0 and b0
  const double h = 1e-6;
  for (std::size_t i = 0; i < 6; ++i) {  // W1 is 2x3, class-major rows
    const double saved = theta[w1_offset + i];
    auto ce = [&](double v) {
      theta[w1_offset + i] = v;
      model.set_flat_parameters(theta);
      return -std::log(model.predict_proba(x)[0][pseudo]);
    };
    const double fd = (ce(saved + h) - ce(saved - h)) / (2.0 * h);
    theta[w1_offset + i] = saved;
    model.set_flat_parameters(theta);
    CHECK(emb.at(0, i) == doctest::Approx(fd).epsilon(1).scale(1e-5));
  }
}

TEST_CASE("confident predictions give a near-zero gradient embedding") {
  MlpClassifier model(2, {2}, 2, 0.0);
  // big last layer saturates the softmax
  std::vector<double> theta{1, 0, 0, 1, 0, 0, 60, 0, 0, -60, 0, 0};
  model.set_flat_parameters(theta);
  const auto x = Matrix::from_rows({{1.0, 1.0}});
  const auto g = model.gradient_embedding(x);
  double norm = 0.0;
  for (std::size_t c = 0; c < g.cols(); ++c) norm += g.at(0, c) * g.at(0, c);
  CHECK(std::sqrt(norm) <= 1e-6);
}

TEST_CASE("zero weights predict the uniform distribution") {
  MlpClassifier model(3, {5}, 4, 0.0);
  const auto x = Matrix::from_rows({{0.1, 0.2, 0.3}});
  const auto p = model.predict_proba(x);
  for (int k = 0; k < 4; ++k) CHECK(p[0][k] == doctest::Approx(0.25).epsilon(1e-12));
  const std::vector<int> y{2};
  CHECK(model.loss(x, y) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("MC-dropout forecasts: shape, determinism, guards") {
  RngStream rng(210);
  MlpClassifier model(2, {8}, 2, 0.5);
  model.init_weights(rng);
  Matrix x;
  std::vector<int> y;
  RngStream data_rng(211);
  make_blobs(data_rng, 5, x, y);

  RngStream mc1(31), mc2(31), mc3(32);
  const auto a = model.mc_dropout_predict(x, 10, mc1);
  const auto b = model.mc_dropout_predict(x, 10, mc2);
  CHECK(a.size() == 10);
  CHECK(a[0].size() == x.rows());
  bool identical = true, any_diff = false;
  const auto c = model.mc_dropout_predict(x, 10, mc3);
  for (std::size_t s = 0; s < 10; ++s)
    for (std::size_t r = 0; r < x.rows(); ++r) {
      identical = identical && a[s][r].p == b[s][r].p;
      any_diff = any_diff || a[s][r].p != c[s][r].p;
      double sum = 0.0;
      for (int k = 0; k < 2; ++k) sum += a[s][r][k];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  CHECK(identical);
  CHECK(any_diff);

  RngStream mc4(33);
  CHECK_THROWS_AS(model.mc_dropout_predict(x, 1, mc4), std::invalid_argument);
  MlpClassifier deterministic(2, {8}, 2, 0.0);
  CHECK_THROWS_WITH_AS(deterministic.mc_dropout_predict(x, 10, mc4),
                       doctest::Contains("MC-dropout requires dropout"),
                       std::invalid_argument);
}

TEST_CASE("vanishing dropout collapses MC forecasts onto the deterministic one") {
  RngStream rng(212);
  MlpClassifier model(2, {8}, 2, 1e-6);
  model.init_weights(rng);
  const auto x = Matrix::from_rows({{0.3, 0.8}, {-1.0, 0.2}});
  const auto det = model.predict_proba(x);
  RngStream mc(34);
  const auto slices = model.mc_dropout_predict(x, 10, mc);
  for (const auto& slice : slices)
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (int k = 0; k < 2; ++k)
        CHECK(slice[r][k] == doctest::Approx(det[r][k]).epsilon(1).scale(1e-3));
}

TEST_CASE("temperature fitting recovers hand-solved optima") {
  // rows (ln 3, 0) with 3 of 4 labels on class 0: NLL is minimized where
  // p_0 = 3/4, which happens exactly at T = 1
  const double l3 = std::log(3.0);
  const auto logits = Matrix::from_rows({{l3, 0}, {l3, 0}, {l3, 0}, {l3, 0}});
  const std::vector<int> labels{0, 0, 0, 1};
  CHECK(fit_temperature(logits, labels).temperature == doctest::Approx(1.0).epsilon(5e-3));

  // same targets with logits scaled by 3 need T = 3 to undo the scaling
  const auto scaled = Matrix::from_rows(
      {{3 * l3, 0}, {3 * l3, 0}, {3 * l3, 0}, {3 * l3, 0}});
  CHECK(fit_temperature(scaled, labels).temperature == doctest::Approx(3.0).epsilon(5e-3));
}

TEST_CASE("temperature scaling preserves the ranking and T=1 is the identity") {
  RngStream rng(213);
  TemperatureScaler unit{1.0};
  TemperatureScaler hot{4.0};
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> logits(3);
    for (auto& v : logits) v = 4.0 * (rng.uniform01() - 0.5);
    const auto base = softmax(logits);
    const auto same = unit.apply(logits);
    CHECK(same.p == base.p);
    CHECK(hot.apply(logits).argmax() == base.argmax());
    CHECK(hot.apply(logits).max_prob() <= base.max_prob() + 1e-12);
  }

  // model-facing overload delegates to the logits overload
  MlpClassifier model(2, {4}, 2, 0.0);
  RngStream rng2(214);
  model.init_weights(rng2);
  Matrix x;
  std::vector<int> y;
  RngStream data_rng(215);
  make_blobs(data_rng, 8, x, y);
  const auto t1 = fit_temperature(model.logits(x), y).temperature;
  const auto t2 = fit_temperature(model, x, y).temperature;
  CHECK(t1 == t2);
}

TEST_CASE("training rejects malformed inputs") {
  MlpClassifier model(2, {4}, 2);
  TrainConfig cfg;
  RngStream rng(216);
  Matrix empty;
  std::vector<int> none;
  CHECK_THROWS_AS(model.train(empty, none, cfg, rng), std::invalid_argument);

  const auto x = Matrix::from_rows({{0.1, 0.2}});
  std::vector<int> bad{2};
  CHECK_THROWS_AS(model.train(x, bad, cfg, rng), std::invalid_argument);
  std::vector<int> mismatch{0, 1};
  CHECK_THROWS_AS(model.train(x, mismatch, cfg, rng), std::invalid_argument);

  const auto wrong_dim = Matrix::from_rows({{0.1, 0.2, 0.3}});
  std::vector<int> ok{0};
  CHECK_THROWS_AS(model.train(wrong_dim, ok, cfg, rng), std::invalid_argument);
}

TEST_SUITE_END();
