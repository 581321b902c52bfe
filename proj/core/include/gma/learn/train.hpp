#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "gma/learn/dataset.hpp"
#include "gma/learn/network.hpp"

namespace gma {

enum class ModelKind { kRandomForest, kCnn, kLstm };

std::string_view to_string(ModelKind kind);
/// "rf", "cnn" or "lstm"; throws PreconditionError otherwise.
ModelKind parse_model_kind(std::string_view text);

struct TrainConfig {
  ModelKind kind = ModelKind::kCnn;
  double learning_rate = 1e-5;
  std::size_t batch_size = 6;
  std::size_t epochs = 150;
  std::uint64_t seed = 0;

  /// CNN: lr 1e-5, batch 6, 150 epochs. LSTM: lr 1e-3, batch 6, 200 epochs.
  static TrainConfig defaults_for(ModelKind kind);
  /// Throws PreconditionError unless lr > 0, batch >= 1, epochs >= 1.
  void validate() const;
};

class Adam {
public:
  explicit Adam(std::size_t n_params, double learning_rate, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);

  void step(std::span<double> params, std::span<const double> gradient);
  std::size_t steps() const { return t_; }

private:
  double lr_, beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

struct TrainResult {
  /// Mean training loss per epoch, measured on each batch before its update.
  std::vector<double> loss_curve;
};

/// Mini-batch Adam on BCE. Data order is reshuffled every epoch from
/// config.seed; the last short batch is kept. Throws DivergenceError when
/// the loss becomes non-finite.
TrainResult train(NeuralNet& net, std::span<const LabeledTensor> data, const TrainConfig& config);

/// Builds the network for `kind` over `channels` inputs (Cnn1d or Lstm).
std::unique_ptr<NeuralNet> make_network(ModelKind kind, std::size_t channels, std::uint64_t seed);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

/// Compares analytic gradients against central differences on `n_params`
/// randomly chosen parameters. Relative error uses max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const NeuralNet& net, const FeatureTensor& input, int label,
                           double eps = 1e-5, std::size_t n_params = 100, std::uint64_t seed = 0);

}  // namespace gma
