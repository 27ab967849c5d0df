#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "layerscope/errors.hpp"
#include "layerscope/edgeprobe.hpp"
#include "layerscope/rng.hpp"
#include "layerscope/synth.hpp"

using namespace layerscope;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd x(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) x(i, j) = rng.normal();
  return x;
}

EdgeProbeModel random_model(std::size_t m, std::size_t labels, bool two_span, Rng& rng,
                            Eigen::Index dp = 5, Eigen::Index dh = 4) {
  EdgeProbeModel model;
  model.two_span = two_span;
  model.projection = gaussian(dp, static_cast<Eigen::Index>(m), rng);
  for (std::size_t s = 0; s < model.slots(); ++s) model.attention.push_back(gaussian(dp, 1, rng));
  model.hidden = gaussian(dh, dp * static_cast<Eigen::Index>(model.slots()), rng) * 0.5;
  model.hidden_bias = gaussian(dh, 1, rng);
  model.output = gaussian(static_cast<Eigen::Index>(labels), dh, rng);
  model.output_bias = gaussian(static_cast<Eigen::Index>(labels), 1, rng);
  return model;
}

// Scalar-loop span pooling: project each word, score, softmax, weight.
std::vector<double> oracle_span(const EdgeProbeModel& model, std::size_t slot,
                                const Eigen::MatrixXd& words, Span span) {
  const auto dp = static_cast<std::size_t>(model.projection.rows());
  const auto m = static_cast<std::size_t>(model.projection.cols());
  std::vector<std::vector<double>> proj;
  std::vector<double> scores;
  for (std::size_t w = span.start; w < span.end; ++w) {
    std::vector<double> p(dp, 0.0);
    for (std::size_t i = 0; i < dp; ++i)
      for (std::size_t j = 0; j < m; ++j) p[i] += model.projection(i, j) * words(w, j);
    double s = 0.0;
    for (std::size_t i = 0; i < dp; ++i) s += model.attention[slot](i) * p[i];
    proj.push_back(p);
    scores.push_back(s);
  }
  double z = 0.0;
  for (double s : scores) z += std::exp(s);
  std::vector<double> pooled(dp, 0.0);
  for (std::size_t t = 0; t < proj.size(); ++t)
    for (std::size_t i = 0; i < dp; ++i) pooled[i] += std::exp(scores[t]) / z * proj[t][i];
  return pooled;
}

std::vector<double> oracle_forward(const EdgeProbeModel& model, const Eigen::MatrixXd& words,
                                   Span s1, const std::optional<Span>& s2) {
  auto x = oracle_span(model, 0, words, s1);
  if (s2) {
    const auto second = oracle_span(model, 1, words, *s2);
    x.insert(x.end(), second.begin(), second.end());
  }
  std::vector<double> h(static_cast<std::size_t>(model.hidden.rows()));
  for (std::size_t i = 0; i < h.size(); ++i) {
    double a = model.hidden_bias(i);
    for (std::size_t j = 0; j < x.size(); ++j) a += model.hidden(i, j) * x[j];
    h[i] = std::tanh(a);
  }
  std::vector<double> out(static_cast<std::size_t>(model.output.rows()));
  for (std::size_t l = 0; l < out.size(); ++l) {
    double z = model.output_bias(l);
    for (std::size_t i = 0; i < h.size(); ++i) z += model.output(l, i) * h[i];
    out[l] = 1.0 / (1.0 + std::exp(-z));
  }
  return out;
}

// Visits every scalar parameter of a pair of same-shaped models.
void for_each_param(EdgeProbeModel& a, EdgeProbeModel& b,
                    const std::function<void(double&, double&)>& fn) {
  auto visit = [&](auto& x, auto& y) {
    for (Eigen::Index i = 0; i < x.size(); ++i) fn(x.data()[i], y.data()[i]);
  };
  visit(a.projection, b.projection);
  for (std::size_t s = 0; s < a.attention.size(); ++s) visit(a.attention[s], b.attention[s]);
  visit(a.hidden, b.hidden);
  visit(a.hidden_bias, b.hidden_bias);
  visit(a.output, b.output);
  visit(a.output_bias, b.output_bias);
}

EdgeData random_edge_data(std::size_t m, std::size_t labels, bool two_span, Rng& rng) {
  EdgeData d;
  d.n_labels = labels;
  d.two_span = two_span;
  for (int s = 0; s < 3; ++s) d.sentences.push_back(gaussian(6, static_cast<Eigen::Index>(m), rng));
  for (int i = 0; i < 8; ++i) {
    EdgeItem item;
    item.sentence = rng.below(3);
    const std::size_t a = rng.below(5);
    item.span1 = {a, a + 1 + rng.below(6 - a)};
    if (two_span) {
      const std::size_t b = rng.below(6);
      item.span2 = Span{b, b + 1};
    }
    for (std::size_t l = 0; l < labels; ++l)
      if (rng.below(2)) item.labels.push_back(l);
    d.items.push_back(item);
  }
  return d;
}

SpanTaskConfig small_task() {
  SpanTaskConfig cfg;
  cfg.n_examples = 400;
  cfg.n_labels = 3;
  cfg.dim = 8;
  cfg.seed = 2;
  return cfg;
}

EdgeTrainConfig small_train() {
  EdgeTrainConfig cfg;
  cfg.projection_dim = 16;
  cfg.hidden_dim = 16;
  cfg.max_epochs = 5;
  cfg.learning_rate = 5e-3;
  cfg.batch_size = 16;
  cfg.seed = 1;
  return cfg;
}

}  // namespace

TEST_CASE("span representation examples") {
  Rng rng(1);
  const auto model = random_model(4, 2, false, rng);
  const Eigen::MatrixXd words = gaussian(6, 4, rng);

  const Eigen::VectorXd single = span_representation(model, 0, words, {2, 3});
  CHECK(single.isApprox(model.projection * words.row(2).transpose(), 1e-14));

  Eigen::MatrixXd same = words;
  same.row(3) = same.row(2);
  same.row(4) = same.row(2);
  CHECK(span_representation(model, 0, same, {2, 5}).isApprox(single, 1e-14));

  const auto rep = span_representation(model, 0, words, {1, 4});
  const auto expect = oracle_span(model, 0, words, {1, 4});
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(rep(static_cast<Eigen::Index>(i)) == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("span representation ignores words outside the span") {
  Rng rng(2);
  const auto model = random_model(4, 2, false, rng);
  const Eigen::MatrixXd words = gaussian(5, 4, rng);
  Eigen::MatrixXd padded(9, 4);
  padded << gaussian(2, 4, rng), words, gaussian(2, 4, rng);
  CHECK(span_representation(model, 0, words, {1, 4}) == span_representation(model, 0, padded, {3, 6}));
}

TEST_CASE("forward examples") {
  Rng rng(3);
  auto model = random_model(4, 3, true, rng);
  const Eigen::MatrixXd words = gaussian(6, 4, rng);

  const auto p = edge_forward(model, words, {0, 2}, Span{3, 6});
  const auto expect = oracle_forward(model, words, {0, 2}, Span{3, 6});
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(p(static_cast<Eigen::Index>(l)) == doctest::Approx(expect[l]).epsilon(1e-12));
    CHECK(p(static_cast<Eigen::Index>(l)) > 0.0);
    CHECK(p(static_cast<Eigen::Index>(l)) < 1.0);
  }

  auto zero = model;
  for_each_param(zero, model, [](double& z, double&) { z = 0.0; });
  CHECK((edge_forward(zero, words, {0, 2}, Span{3, 6}).array() == 0.5).all());
  zero.output_bias(1) = 100.0;
  const auto sat = edge_forward(zero, words, {0, 2}, Span{3, 6});
  CHECK(sat(1) > 1.0 - 1e-12);
  CHECK(sat(0) == 0.5);

  CHECK_THROWS_AS(edge_forward(model, words, {0, 2}, std::nullopt), ShapeError);
  CHECK_THROWS_AS(edge_forward(model, words, {0, 7}, Span{0, 1}), ShapeError);
}

TEST_CASE("loss gradient matches central finite differences") {
  Rng rng(4);
  for (bool two : {false, true}) {
    const auto data = random_edge_data(3, 2, two, rng);
    auto model = random_model(3, 2, two, rng, 3, 3);
    std::vector<std::size_t> items(data.items.size());
    std::iota(items.begin(), items.end(), std::size_t{0});
    double loss = 0;
    auto grad = edge_loss_grad(model, data, items, &loss);
    CHECK(loss == doctest::Approx(edge_loss(model, data, items)).epsilon(1e-13));
    double worst = 0, scale = 0;
    for_each_param(model, grad, [&](double& w, double& g) {
      const double orig = w, h = 1e-5;
      w = orig + h;
      const double up = edge_loss(model, data, items);
      w = orig - h;
      const double down = edge_loss(model, data, items);
      w = orig;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(numeric - g));
      scale = std::max(scale, std::abs(numeric));
    });
    CHECK(worst / scale < 1e-6);
  }
}

TEST_CASE("edge_dataset binds examples to sentences") {
  const auto task = plant_span_task(small_task());
  const auto data = edge_dataset(task.examples, task.activations, 0);
  CHECK(data.items.size() == task.examples.examples.size());
  CHECK(data.n_labels == 3);
  CHECK(data.sentences.front().rows() == 8);
  auto bad = task.examples;
  bad.examples.front().tokens.push_back("extra");
  CHECK_THROWS_AS(edge_dataset(bad, task.activations, 0), ShapeError);
}

TEST_CASE("edge probe training") {
  const auto task = plant_span_task(small_task());
  const auto data = edge_dataset(task.examples, task.activations, 0);

  SUBCASE("zero epochs returns the initialization") {
    auto cfg = small_train();
    cfg.max_epochs = 0;
    const auto r = train_edge_probe(data, cfg);
    const auto init = init_edge_probe(8, 3, false, 0, 16, 16, cfg.seed);
    CHECK(r.model.projection == init.projection);
    CHECK(r.model.output_bias == init.output_bias);
  }
  SUBCASE("same seed gives a bitwise identical model") {
    const auto a = train_edge_probe(data, small_train());
    const auto b = train_edge_probe(data, small_train());
    CHECK(encode_edge_probe(a.model) == encode_edge_probe(b.model));
  }
  SUBCASE("constant label is always predicted") {
    auto constant = data;
    constant.n_labels = 1;
    for (auto& item : constant.items) item.labels = {0};
    const auto r = train_edge_probe(constant, small_train());
    for (const auto& p : edge_probabilities(r.model, constant)) CHECK(p(0) > 0.5);
    CHECK(eval_edge_probe(r.model, constant).f1 == 1.0);
  }
}

TEST_CASE("threshold behaviour") {
  const auto task = plant_span_task(small_task());
  const auto data = edge_dataset(task.examples, task.activations, 0);
  Rng rng(5);
  const auto model = random_model(8, 3, false, rng);
  const auto probs = edge_probabilities(model, data);

  // Raising the threshold can only drop predictions, so recall never rises.
  double last_recall = 2.0;
  for (double t = 0.0; t <= 1.0; t += 0.05) {
    const auto pr = score_edge_predictions(probs, data, t);
    CHECK(pr.recall <= last_recall);
    last_recall = pr.recall;
  }
  CHECK(score_edge_predictions(probs, data, 1.01).f1 == 0.0);

  // Perfect probabilities score (1, 1, 1).
  std::vector<Eigen::VectorXd> perfect;
  for (const auto& item : data.items) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
    for (auto l : item.labels) p(static_cast<Eigen::Index>(l)) = 1.0;
    perfect.push_back(p);
  }
  const auto pr = score_edge_predictions(perfect, data, 0.5);
  CHECK(pr.precision == 1.0);
  CHECK(pr.recall == 1.0);
  CHECK(pr.f1 == 1.0);
}

TEST_CASE("probabilities do not depend on item order") {
  const auto task = plant_span_task(small_task());
  auto data = edge_dataset(task.examples, task.activations, 0);
  Rng rng(6);
  const auto model = random_model(8, 3, false, rng);
  const auto probs = edge_probabilities(model, data);
  auto reversed = data;
  std::reverse(reversed.items.begin(), reversed.items.end());
  const auto rprobs = edge_probabilities(model, reversed);
  for (std::size_t i = 0; i < probs.size(); ++i) CHECK(probs[i] == rprobs[probs.size() - 1 - i]);
}

TEST_CASE("edge probe files round-trip") {
  Rng rng(7);
  auto model = random_model(4, 3, true, rng);
  model.layer = 9;
  auto dummy = model;
  for_each_param(model, dummy, [](double& w, double&) { w = static_cast<float>(w); });
  const auto back = decode_edge_probe(encode_edge_probe(model));
  CHECK(back.layer == 9);
  CHECK(back.two_span);
  CHECK(back.projection == model.projection);
  CHECK(back.attention[1] == model.attention[1]);
  CHECK(back.output_bias == model.output_bias);
  CHECK_THROWS_AS(decode_edge_probe(encode_edge_probe(model) + "x"), FormatError);
}
