#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "gma/error.hpp"
#include "gma/learn/dataset.hpp"
#include "gma/learn/forest.hpp"
#include "gma/learn/model.hpp"
#include "gma/learn/network.hpp"
#include "gma/learn/train.hpp"

using namespace gma;

namespace {

FeatureTensor random_tensor(SplitMix64& rng, std::size_t channels, std::size_t length,
                            double scale = 1.0) {
  FeatureTensor t(channels, length, FeatureSet::kCoords);
  for (auto& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

// Two classes that differ in the mean level of channel 0.
std::vector<LabeledTensor> toy_set(std::uint64_t seed, std::size_t per_class,
                                   std::size_t channels = 3, std::size_t length = 24) {
  SplitMix64 rng(seed);
  std::vector<LabeledTensor> out;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int label = static_cast<int>(i % 2);
    auto t = random_tensor(rng, channels, length, 0.3);
    for (std::size_t s = 0; s < length; ++s) t.at(0, s) += label ? 0.6 : -0.6;
    VideoInfo info;
    info.video_id = "v" + std::to_string(i);
    info.subject_id = "s" + std::to_string(i);
    info.label = label;
    out.push_back({std::move(t), info});
  }
  return out;
}

// Plain gradient-descent logistic regression on the flattened inputs.
double logistic_regression_accuracy(const std::vector<LabeledTensor>& data) {
  const std::size_t d = data.front().features.values().size();
  std::vector<double> w(d, 0.0);
  double b = 0.0;
  for (int iter = 0; iter < 300; ++iter) {
    std::vector<double> gw(d, 0.0);
    double gb = 0.0;
    for (const auto& ex : data) {
      const auto x = ex.features.values();
      double z = b;
      for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
      const double r = 1.0 / (1.0 + std::exp(-z)) - ex.label();
      for (std::size_t j = 0; j < d; ++j) gw[j] += r * x[j];
      gb += r;
    }
    for (std::size_t j = 0; j < d; ++j) w[j] -= 0.1 * gw[j] / data.size();
    b -= 0.1 * gb / data.size();
  }
  std::size_t correct = 0;
  for (const auto& ex : data) {
    const auto x = ex.features.values();
    double z = b;
    for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
    correct += (z > 0) == (ex.label() == 1);
  }
  return static_cast<double>(correct) / data.size();
}

double relative_gap(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST_CASE("flatten and unflatten") {
  FeatureTensor t(2, 3, FeatureSet::kAngles);
  const double v[] = {1, 2, 3, 4, 5, 6};
  std::copy(std::begin(v), std::end(v), t.values().begin());
  const auto flat = flatten(t, 1, "s");
  CHECK(flat.features == std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(flat.label == 1);
  CHECK(flat.subject_id == "s");
  const auto back = unflatten(flat.features, 2, 3, FeatureSet::kAngles);
  for (std::size_t i = 0; i < 6; ++i) CHECK(back.values()[i] == t.values()[i]);
  t.at(1, 1) = std::nan("");
  CHECK_THROWS_AS(flatten(t, 0), PreconditionError);
  t.at(1, 1) = INFINITY;
  CHECK_THROWS_AS(flatten(t, 0), PreconditionError);
}

TEST_CASE("random forest") {
  SplitMix64 rng(1);
  std::vector<FlatSample> samples;
  for (int i = 0; i < 60; ++i) {
    const int label = i % 2;
    const double c = label ? 3.0 : -3.0;
    samples.push_back({{c + rng.normal(), c + rng.normal(), rng.normal()}, label, ""});
  }
  SUBCASE("separable clusters") {
    const auto forest = RandomForest::fit(samples, {50, 7});
    CHECK(forest.size() == 50);
    CHECK(forest.dimension() == 3);
    std::size_t correct = 0;
    for (int i = 0; i < 200; ++i) {
      const int label = i % 2;
      const double c = label ? 3.0 : -3.0;
      const std::vector<double> x = {c + rng.normal(), c + rng.normal(), rng.normal()};
      correct += (forest.predict_proba(x) > 0.5) == (label == 1);
    }
    CHECK(correct == 200);
  }
  SUBCASE("determinism and thread independence") {
    ForestOptions a{30, 99};
    ForestOptions b = a;
    b.threads = 4;
    const auto f1 = RandomForest::fit(samples, a);
    const auto f2 = RandomForest::fit(samples, a);
    const auto f3 = RandomForest::fit(samples, b);
    for (const auto& s : samples) {
      CHECK(f1.predict_proba(s.features) == f2.predict_proba(s.features));
      CHECK(f1.predict_proba(s.features) == f3.predict_proba(s.features));
    }
  }
  SUBCASE("probabilities are means of tree votes") {
    using Tree = RandomForest::Tree;
    using Node = RandomForest::Node;
    auto leaf = [](double v) {
      Tree t;
      Node n;
      n.value = v;
      t.nodes = {n};
      return t;
    };
    std::vector<Tree> half;
    for (int i = 0; i < 170; ++i) half.push_back(leaf(i < 85 ? 1.0 : 0.0));
    const RandomForest f(1, half);
    const std::vector<double> x = {0.0};
    CHECK(f.predict_proba(x) == 0.5);
    const RandomForest all(1, std::vector<Tree>(170, leaf(1.0)));
    CHECK(all.predict_proba(x) == 1.0);
    const std::vector<double> wrong = {0.0, 1.0};
    CHECK_THROWS_AS(f.predict_proba(wrong), PreconditionError);
  }
  SUBCASE("errors") {
    std::vector<FlatSample> one_class = {{{0.0}, 1, ""}, {{1.0}, 1, ""}};
    CHECK_THROWS_AS(RandomForest::fit(one_class), PreconditionError);
    std::vector<FlatSample> single = {{{0.0}, 1, ""}};
    CHECK_THROWS_AS(RandomForest::fit(single), PreconditionError);
  }
  SUBCASE("moving a positive further out never lowers its score") {
    const auto forest = RandomForest::fit(samples, {100, 3});
    std::vector<double> x = {0.0, 0.0, 0.0};
    double prev = forest.predict_proba(x);
    for (int step = 1; step <= 20; ++step) {
      x[0] = x[1] = 0.3 * step;
      const double p = forest.predict_proba(x);
      CHECK(p >= prev - 0.25);
      prev = p;
    }
    CHECK(prev > 0.9);
  }
}

TEST_CASE("bce and sigmoid") {
  CHECK(bce(0.5, 1) == doctest::Approx(std::log(2.0)));
  CHECK(bce(0.5, 0) == doctest::Approx(std::log(2.0)));
  CHECK(bce(0.9, 1) == doctest::Approx(-std::log(0.9)));
  CHECK(bce(0.9, 0) == doctest::Approx(-std::log(0.1)));
  CHECK(bce(0.0, 1) == doctest::Approx(-std::log(kBceEpsilon)));
  CHECK(bce(1.0, 0) == doctest::Approx(-std::log(kBceEpsilon)));
  CHECK(std::isfinite(bce(1.0, 0)));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == doctest::Approx(1.0));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
}

TEST_CASE("adam first step moves each parameter by the learning rate") {
  Adam adam(3, 0.01);
  std::vector<double> p = {1.0, 2.0, 3.0};
  const std::vector<double> g = {0.5, -2.0, 1e-3};
  adam.step(p, g);
  CHECK(p[0] == doctest::Approx(0.99));
  CHECK(p[1] == doctest::Approx(2.01));
  CHECK(p[2] == doctest::Approx(3.0 - 0.01 * 1e-3 / (1e-3 + 1e-8)));
  CHECK(adam.steps() == 1);
  std::vector<double> short_p = {1.0};
  CHECK_THROWS_AS(adam.step(short_p, g), PreconditionError);
}

TEST_CASE("network gradients agree with central differences") {
  SplitMix64 rng(5);
  const auto input = random_tensor(rng, 44, 50);
  for (auto kind : {ModelKind::kCnn, ModelKind::kLstm}) {
    CAPTURE(to_string(kind));
    const double eps = kind == ModelKind::kCnn ? 1e-5 : 1e-3;
    for (int label : {0, 1}) {
      auto net = make_network(kind, 44, 11 + label);
      const auto result = grad_check(*net, input, label, eps, 100, 3);
      CHECK(result.checked == 100);
      CHECK(result.max_relative_error < 1e-4);

      // Independent difference quotients on a few parameters.
      std::vector<double> analytic(net->parameters().size(), 0.0);
      net->accumulate_gradient(input, label, analytic);
      auto params = net->parameters();
      for (std::size_t i = 0; i < params.size(); i += params.size() / 7) {
        const double orig = params[i];
        params[i] = orig + eps;
        const double up = net->loss(input, label);
        params[i] = orig - eps;
        const double down = net->loss(input, label);
        params[i] = orig;
        CHECK(relative_gap(analytic[i], (up - down) / (2 * eps)) < 1e-4);
      }
    }
  }
}

TEST_CASE("accumulate_gradient returns the loss and honours scale") {
  SplitMix64 rng(6);
  const auto input = random_tensor(rng, 5, 16);
  Cnn1d net(CnnShape{5}, 2);
  std::vector<double> g1(net.parameters().size(), 0.0);
  std::vector<double> g2(net.parameters().size(), 0.0);
  const double loss = net.accumulate_gradient(input, 1, g1, 1.0);
  CHECK(loss == doctest::Approx(bce(net.predict(input), 1)));
  net.accumulate_gradient(input, 1, g2, 0.25);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(0.25 * g1[i]));
  CHECK(net.predict(input) == doctest::Approx(sigmoid(net.logit(input))));
}

TEST_CASE("zero weights: only the output bias has a gradient and the output is one half") {
  FeatureTensor zeros(6, 20, FeatureSet::kCoords);
  Cnn1d cnn(CnnShape{6}, 1);
  Lstm lstm(LstmShape{6}, 1);
  for (NeuralNet* net : {static_cast<NeuralNet*>(&cnn), static_cast<NeuralNet*>(&lstm)}) {
    std::fill(net->parameters().begin(), net->parameters().end(), 0.0);
    CHECK(net->predict(zeros) == 0.5);
    std::vector<double> g(net->parameters().size(), 0.0);
    net->accumulate_gradient(zeros, 1, g);
    const auto& bias = net->block(net->kind() == "cnn" ? "fc2.bias" : "head.bias");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (i == bias.offset) {
        CHECK(g[i] == doctest::Approx(-0.5));
      } else {
        REQUIRE(g[i] == 0.0);
      }
    }
  }
  SplitMix64 rng(2);
  const auto input = random_tensor(rng, 6, 20);
  Cnn1d head_zero(CnnShape{6}, 4);
  auto w = head_zero.block("fc2.weight");
  std::fill_n(head_zero.parameters().begin() + w.offset, w.size + 1, 0.0);
  CHECK(head_zero.predict(input) == 0.5);
}

TEST_CASE("network shapes and input checks") {
  Cnn1d cnn(CnnShape{4}, 0);
  CHECK(cnn.min_length() >= 1);
  FeatureTensor wrong(5, 16, FeatureSet::kCoords);
  CHECK_THROWS_AS(cnn.logit(wrong), PreconditionError);
  Lstm lstm(LstmShape{4, 8, 2}, 0);
  const std::size_t per_layer0 = 4 * 8 * 4 + 4 * 8 * 8 + 4 * 8;
  const std::size_t per_layer1 = 4 * 8 * 8 + 4 * 8 * 8 + 4 * 8;
  CHECK(lstm.parameters().size() == per_layer0 + per_layer1 + 8 + 1);
  CHECK_THROWS_AS(make_network(ModelKind::kRandomForest, 4, 0), PreconditionError);
  CHECK(parse_model_kind("lstm") == ModelKind::kLstm);
  CHECK_THROWS_AS(parse_model_kind("svm"), PreconditionError);
}

TEST_CASE("training") {
  const auto data = toy_set(3, 20);
  const auto held_out = toy_set(4, 20);
  REQUIRE(logistic_regression_accuracy(data) == 1.0);

  SUBCASE("cnn learns a separable toy set") {
    const auto model = fit_model(ModelKind::kCnn, {170, 1e-3, 6, 30}, data, 9);
    std::size_t correct = 0;
    for (const auto& ex : held_out) {
      correct += (predict(model, ex.features) > 0.5) == (ex.label() == 1);
    }
    CHECK(static_cast<double>(correct) / held_out.size() >= 0.95);
    REQUIRE(model.loss_curve.size() == 30);
    CHECK(model.loss_curve.back() < model.loss_curve.front());
  }
  SUBCASE("same seed gives identical weights") {
    const Hyperparameters h{170, 1e-3, 4, 3};
    for (auto kind : {ModelKind::kCnn, ModelKind::kLstm}) {
      const auto a = fit_model(kind, h, data, 21);
      const auto b = fit_model(kind, h, data, 21);
      const auto c = fit_model(kind, h, data, 22);
      auto params = [](const TrainedModel& m) {
        return std::visit(
            [](const auto& net) -> std::vector<double> {
              if constexpr (std::is_same_v<std::decay_t<decltype(net)>, RandomForest>) {
                return {};
              } else {
                return {net.parameters().begin(), net.parameters().end()};
              }
            },
            m.model);
      };
      CHECK(params(a) == params(b));
      CHECK(params(a) != params(c));
      CHECK(a.loss_curve == b.loss_curve);
    }
  }
  SUBCASE("invalid configuration") {
    CHECK_THROWS_AS(fit_model(ModelKind::kCnn, {170, 1e-3, 6, 0}, data, 1), PreconditionError);
    CHECK_THROWS_AS(fit_model(ModelKind::kCnn, {170, 0.0, 6, 1}, data, 1), PreconditionError);
    CHECK_THROWS_AS(fit_model(ModelKind::kCnn, {170, 1e-3, 0, 1}, data, 1), PreconditionError);
    CHECK_THROWS_AS(fit_model(ModelKind::kCnn, {}, std::span<const LabeledTensor>{}, 1),
                    PreconditionError);
  }
  SUBCASE("defaults") {
    const auto cnn = TrainConfig::defaults_for(ModelKind::kCnn);
    CHECK(cnn.learning_rate == 1e-5);
    CHECK(cnn.batch_size == 6);
    CHECK(cnn.epochs == 150);
    CHECK(default_hyperparameters(ModelKind::kRandomForest).n_trees == 170);
  }
}

TEST_CASE("checkpoint round trip") {
  const auto data = toy_set(8, 6, 3, 12);
  test::TempDir dir("ckpt");
  for (auto kind : {ModelKind::kRandomForest, ModelKind::kCnn, ModelKind::kLstm}) {
    CAPTURE(to_string(kind));
    const auto model = fit_model(kind, {20, 1e-3, 4, 2}, data, 5);
    const auto path = dir / (std::string(to_string(kind)) + ".ckpt");
    save_checkpoint(model, path);
    const auto loaded = load_checkpoint(path);
    CHECK(loaded.kind == kind);
    CHECK(loaded.channels == 3);
    CHECK(loaded.length == 12);
    CHECK(loaded.seed == 5);
    for (const auto& ex : data) CHECK(predict(loaded, ex.features) == predict(model, ex.features));
    FeatureTensor wrong(4, 12, FeatureSet::kCoords);
    CHECK_THROWS_AS(predict(loaded, wrong), PreconditionError);
  }
  test::write_file(dir / "bad.ckpt", "{\"architecture\":\"cnn\"}\n\x01\x02");
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), Error);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
}
