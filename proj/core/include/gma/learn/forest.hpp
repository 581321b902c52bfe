#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gma/learn/dataset.hpp"

namespace gma {

inline constexpr std::size_t kDefaultTrees = 170;

struct ForestOptions {
  std::size_t n_trees = kDefaultTrees;
  std::uint64_t seed = 0;
  /// Features drawn per split; 0 means floor(sqrt(d)).
  std::size_t max_features = 0;
  std::size_t min_samples_leaf = 1;
  /// Trees are independent streams, so results do not depend on this.
  unsigned threads = 1;
};

/// Bagged CART classifier: bootstrap of size n per tree, Gini impurity,
/// trees grown until pure (or min_samples_leaf), leaves store the class-1
/// frequency of their bootstrap samples.
class RandomForest {
public:
  struct Node {
    static constexpr std::int32_t kLeaf = -1;
    std::int32_t feature = kLeaf;
    double threshold = 0.0;  // go left when x[feature] <= threshold
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double value = 0.0;  // class-1 probability at leaves
  };

  struct Tree {
    std::vector<Node> nodes;  // nodes[0] is the root
    std::vector<std::uint32_t> bootstrap;

    double predict(std::span<const double> x) const;
  };

  RandomForest() = default;
  RandomForest(std::size_t dimension, std::vector<Tree> trees);

  /// Throws PreconditionError with fewer than two samples or a single class.
  static RandomForest fit(std::span<const FlatSample> samples, const ForestOptions& options = {});

  /// Mean over trees of the leaf class-1 frequency.
  double predict_proba(std::span<const double> x) const;

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return trees_.size(); }
  const std::vector<Tree>& trees() const { return trees_; }

private:
  std::size_t dimension_ = 0;
  std::vector<Tree> trees_;
};

}  // namespace gma
