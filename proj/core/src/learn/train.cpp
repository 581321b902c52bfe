#include "gma/learn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gma/error.hpp"
#include "gma/random.hpp"

namespace gma {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kRandomForest:
      return "rf";
    case ModelKind::kCnn:
      return "cnn";
    case ModelKind::kLstm:
      return "lstm";
  }
  return "rf";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "rf") return ModelKind::kRandomForest;
  if (text == "cnn") return ModelKind::kCnn;
  if (text == "lstm") return ModelKind::kLstm;
  throw PreconditionError("unknown model '" + std::string(text) + "' (expected rf, cnn or lstm)");
}

TrainConfig TrainConfig::defaults_for(ModelKind kind) {
  TrainConfig config;
  config.kind = kind;
  if (kind == ModelKind::kLstm) {
    config.learning_rate = 1e-3;
    config.epochs = 200;
  } else {
    config.learning_rate = 1e-5;
    config.epochs = 150;
  }
  config.batch_size = 6;
  return config;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw PreconditionError("train: learning rate must be positive");
  }
  if (batch_size < 1) throw PreconditionError("train: batch size must be >= 1");
  if (epochs < 1) throw PreconditionError("train: epochs must be >= 1");
}

Adam::Adam(std::size_t n_params, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(n_params, 0.0),
      v_(n_params, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> gradient) {
  if (params.size() != m_.size() || gradient.size() != m_.size()) {
    throw PreconditionError("adam: size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * gradient[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * gradient[i] * gradient[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + epsilon_);
  }
}

TrainResult train(NeuralNet& net, std::span<const LabeledTensor> data, const TrainConfig& config) {
  config.validate();
  if (data.empty()) throw PreconditionError("train: empty dataset");

  SplitMix64 rng(derive_seed(config.seed, 0x5EED));
  Adam adam(net.parameters().size(), config.learning_rate);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> gradient(net.parameters().size());

  TrainResult result;
  result.loss_curve.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(std::span(order), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(gradient.begin(), gradient.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto& example = data[order[i]];
        epoch_loss += net.accumulate_gradient(example.features, example.label(), gradient, scale);
      }
      if (!std::isfinite(epoch_loss)) {
        throw DivergenceError("train: loss became non-finite in epoch " + std::to_string(epoch));
      }
      adam.step(net.parameters(), gradient);
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return result;
}

std::unique_ptr<NeuralNet> make_network(ModelKind kind, std::size_t channels, std::uint64_t seed) {
  switch (kind) {
    case ModelKind::kCnn:
      return std::make_unique<Cnn1d>(CnnShape{channels}, seed);
    case ModelKind::kLstm:
      return std::make_unique<Lstm>(LstmShape{channels}, seed);
    case ModelKind::kRandomForest:
      break;
  }
  throw PreconditionError("make_network: random forest is not a neural network");
}

GradCheckResult grad_check(const NeuralNet& net, const FeatureTensor& input, int label, double eps,
                           std::size_t n_params, std::uint64_t seed) {
  auto probe = net.clone();
  const std::size_t total = probe->parameters().size();
  std::vector<double> analytic(total, 0.0);
  probe->accumulate_gradient(input, label, analytic);

  std::vector<std::size_t> indices(total);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  SplitMix64 rng(seed);
  shuffle(std::span(indices), rng);
  indices.resize(std::min(n_params, total));

  GradCheckResult result;
  auto params = probe->parameters();
  for (std::size_t i : indices) {
    const double original = params[i];
    params[i] = original + eps;
    const double up = probe->loss(input, label);
    params[i] = original - eps;
    const double down = probe->loss(input, label);
    params[i] = original;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    result.max_relative_error = std::max(result.max_relative_error,
                                         std::abs(analytic[i] - numeric) / denom);
    ++result.checked;
  }
  return result;
}

}  // namespace gma
