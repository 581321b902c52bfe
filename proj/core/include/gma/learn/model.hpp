#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "gma/learn/forest.hpp"
#include "gma/learn/network.hpp"
#include "gma/learn/train.hpp"

namespace gma {

/// One grid point. Forest uses n_trees; networks use the rest.
struct Hyperparameters {
  std::size_t n_trees = kDefaultTrees;
  double learning_rate = 1e-5;
  std::size_t batch_size = 6;
  std::size_t epochs = 150;

  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

Hyperparameters default_hyperparameters(ModelKind kind);

struct TrainedModel {
  ModelKind kind = ModelKind::kRandomForest;
  std::size_t channels = 0;
  std::size_t length = 0;
  std::uint64_t seed = 0;
  std::variant<RandomForest, Cnn1d, Lstm> model;
  std::vector<double> loss_curve;
};

/// Trains `kind` on `data` (all tensors must share one shape).
TrainedModel fit_model(ModelKind kind, const Hyperparameters& hyper,
                       std::span<const LabeledTensor> data, std::uint64_t seed);

/// Probability of label 1. Throws PreconditionError on a shape mismatch.
double predict(const TrainedModel& model, const FeatureTensor& input);

/// Checkpoint: one JSON header line (architecture, dims, seed, parameter
/// count) followed by the parameters as little-endian IEEE-754 doubles.
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace gma
