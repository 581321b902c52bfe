#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gma/features.hpp"

namespace gma {

/// Clamping bound for probabilities inside the loss.
inline constexpr double kBceEpsilon = 1e-7;

/// -[y ln p + (1-y) ln(1-p)] with p clamped to [eps, 1-eps].
double bce(double p, int y);

double sigmoid(double z);

/// A named slice of a network's flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Binary classifier over channels x time input with a sigmoid head. All
/// parameters live in one flat double vector so optimizers, gradient checks
/// and checkpoints treat every architecture alike.
class NeuralNet {
public:
  virtual ~NeuralNet() = default;

  virtual std::string_view kind() const = 0;
  virtual std::size_t input_channels() const = 0;
  /// Shortest input length the architecture accepts.
  virtual std::size_t min_length() const = 0;

  /// Pre-sigmoid output.
  virtual double logit(const FeatureTensor& input) const = 0;

  /// Returns the BCE loss on (input, label) and adds scale * dloss/dparam to
  /// `gradient` (same layout as parameters()).
  virtual double accumulate_gradient(const FeatureTensor& input, int label,
                                     std::span<double> gradient, double scale = 1.0) const = 0;

  virtual std::unique_ptr<NeuralNet> clone() const = 0;

  double predict(const FeatureTensor& input) const;
  double loss(const FeatureTensor& input, int label) const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(std::string_view name) const;

protected:
  void add_block(std::string name, std::size_t size);
  std::span<double> mutable_block(std::string_view name);
  std::span<const double> block_values(std::string_view name) const;
  /// Throws PreconditionError on a channel/length mismatch.
  void check_input(const FeatureTensor& input) const;

  std::vector<double> params_;
  std::vector<ParamBlock> blocks_;
};

struct CnnShape {
  std::size_t input_channels = 0;
  std::vector<std::size_t> conv_channels = {64, 64, 64};
  std::size_t kernel = 5;
  std::size_t bottleneck = 150;

  friend bool operator==(const CnnShape&, const CnnShape&) = default;
};

/// Blocks of [conv1d (same padding) -> ReLU -> max-pool 2], global average
/// over time, dense -> ReLU bottleneck, dense -> sigmoid.
class Cnn1d final : public NeuralNet {
public:
  /// Xavier-uniform weights, zero biases.
  Cnn1d(CnnShape shape, std::uint64_t seed);

  std::string_view kind() const override { return "cnn"; }
  std::size_t input_channels() const override { return shape_.input_channels; }
  std::size_t min_length() const override;
  const CnnShape& shape() const { return shape_; }
  std::unique_ptr<NeuralNet> clone() const override { return std::make_unique<Cnn1d>(*this); }

  double logit(const FeatureTensor& input) const override;
  double accumulate_gradient(const FeatureTensor& input, int label, std::span<double> gradient,
                             double scale = 1.0) const override;

private:
  CnnShape shape_;
};

struct LstmShape {
  std::size_t input_channels = 0;
  std::size_t hidden = 64;
  std::size_t layers = 3;

  friend bool operator==(const LstmShape&, const LstmShape&) = default;
};

/// Stacked LSTM read over time, sigmoid head on the top layer's final
/// hidden state. Gate order in the stacked weights: input, forget, cell, output.
class Lstm final : public NeuralNet {
public:
  /// Uniform +-1/sqrt(hidden) for recurrent layers, Xavier-uniform head.
  Lstm(LstmShape shape, std::uint64_t seed);

  std::string_view kind() const override { return "lstm"; }
  std::size_t input_channels() const override { return shape_.input_channels; }
  std::size_t min_length() const override { return 1; }
  const LstmShape& shape() const { return shape_; }
  std::unique_ptr<NeuralNet> clone() const override { return std::make_unique<Lstm>(*this); }

  double logit(const FeatureTensor& input) const override;
  double accumulate_gradient(const FeatureTensor& input, int label, std::span<double> gradient,
                             double scale = 1.0) const override;

private:
  LstmShape shape_;
};

}  // namespace gma
