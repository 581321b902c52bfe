#include "gma/learn/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

#include "gma/error.hpp"
#include "gma/random.hpp"

namespace gma {
namespace {

struct Split {
  std::int32_t feature = RandomForest::Node::kLeaf;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child Gini
};

class TreeBuilder {
public:
  TreeBuilder(std::span<const FlatSample> samples, std::size_t max_features,
              std::size_t min_samples_leaf, SplitMix64& rng)
      : samples_(samples), dimension_(samples.front().features.size()),
        max_features_(max_features), min_leaf_(min_samples_leaf), rng_(rng),
        features_(dimension_) {
    std::iota(features_.begin(), features_.end(), 0u);
  }

  RandomForest::Tree build(std::vector<std::uint32_t> bootstrap) {
    RandomForest::Tree tree;
    tree.bootstrap = bootstrap;
    grow(tree, bootstrap, 0, bootstrap.size());
    return tree;
  }

private:
  std::uint32_t grow(RandomForest::Tree& tree, std::vector<std::uint32_t>& idx, std::size_t lo,
                     std::size_t hi) {
    const auto node_id = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    const std::size_t n = hi - lo;
    std::size_t positives = 0;
    for (std::size_t i = lo; i < hi; ++i) positives += samples_[idx[i]].label == 1;
    const double p1 = static_cast<double>(positives) / static_cast<double>(n);
    tree.nodes[node_id].value = p1;
    if (positives == 0 || positives == n || n < 2 * min_leaf_) return node_id;

    const Split split = best_split(idx, lo, hi, positives);
    if (split.feature == RandomForest::Node::kLeaf) return node_id;

    const auto mid_it = std::partition(
        idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(hi),
        [&](std::uint32_t i) {
          return samples_[i].features[static_cast<std::size_t>(split.feature)] <= split.threshold;
        });
    const auto mid = static_cast<std::size_t>(mid_it - idx.begin());
    const auto left = grow(tree, idx, lo, mid);
    const auto right = grow(tree, idx, mid, hi);
    auto& node = tree.nodes[node_id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return node_id;
  }

  // Draws features in random order; keeps drawing past max_features until a
  // valid partition exists or every feature has been tried.
  Split best_split(const std::vector<std::uint32_t>& idx, std::size_t lo, std::size_t hi,
                   std::size_t positives) {
    const std::size_t n = hi - lo;
    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, int>> column(n);
    std::size_t drawn = 0;
    for (std::size_t i = 0; i < dimension_; ++i) {
      if (drawn >= max_features_ && best.feature != RandomForest::Node::kLeaf) break;
      const auto j = i + static_cast<std::size_t>(rng_.below(dimension_ - i));
      std::swap(features_[i], features_[j]);
      const std::uint32_t f = features_[i];
      ++drawn;

      for (std::size_t r = 0; r < n; ++r) {
        const auto& s = samples_[idx[lo + r]];
        column[r] = {s.features[f], s.label};
      }
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;

      std::size_t left_pos = 0;
      for (std::size_t r = 0; r + 1 < n; ++r) {
        left_pos += column[r].second == 1;
        if (column[r].first == column[r + 1].first) continue;
        const std::size_t nl = r + 1;
        const std::size_t nr = n - nl;
        if (nl < min_leaf_ || nr < min_leaf_) continue;
        const double impurity = weighted_gini(nl, left_pos) + weighted_gini(nr, positives - left_pos);
        if (impurity < best.impurity) {
          best.impurity = impurity;
          best.feature = static_cast<std::int32_t>(f);
          best.threshold = column[r].first + (column[r + 1].first - column[r].first) / 2.0;
          // Midpoint can round up to the right value for adjacent doubles.
          if (best.threshold >= column[r + 1].first) best.threshold = column[r].first;
        }
      }
    }
    return best;
  }

  static double weighted_gini(std::size_t count, std::size_t positives) {
    const double c = static_cast<double>(count);
    const double p = static_cast<double>(positives) / c;
    return c * 2.0 * p * (1.0 - p);
  }

  std::span<const FlatSample> samples_;
  std::size_t dimension_;
  std::size_t max_features_;
  std::size_t min_leaf_;
  SplitMix64& rng_;
  std::vector<std::uint32_t> features_;
};

RandomForest::Tree fit_tree(std::span<const FlatSample> samples, const ForestOptions& options,
                            std::size_t max_features, std::size_t tree_index) {
  SplitMix64 rng(derive_seed(options.seed, tree_index));
  std::vector<std::uint32_t> bootstrap(samples.size());
  for (auto& b : bootstrap) b = static_cast<std::uint32_t>(rng.below(samples.size()));
  TreeBuilder builder(samples, max_features, options.min_samples_leaf, rng);
  return builder.build(std::move(bootstrap));
}

}  // namespace

double RandomForest::Tree::predict(std::span<const double> x) const {
  std::uint32_t i = 0;
  while (nodes[i].feature != Node::kLeaf) {
    i = x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                               : nodes[i].right;
  }
  return nodes[i].value;
}

RandomForest::RandomForest(std::size_t dimension, std::vector<Tree> trees)
    : dimension_(dimension), trees_(std::move(trees)) {}

RandomForest RandomForest::fit(std::span<const FlatSample> samples, const ForestOptions& options) {
  if (samples.size() < 2) throw PreconditionError("rf_fit: need at least two samples");
  if (options.n_trees == 0) throw PreconditionError("rf_fit: n_trees must be positive");
  if (options.min_samples_leaf == 0) throw PreconditionError("rf_fit: min_samples_leaf must be >= 1");
  const std::size_t d = samples.front().features.size();
  if (d == 0) throw PreconditionError("rf_fit: zero-dimensional samples");
  bool has0 = false;
  bool has1 = false;
  for (const auto& s : samples) {
    if (s.features.size() != d) throw PreconditionError("rf_fit: samples differ in dimension");
    if (s.label != 0 && s.label != 1) throw PreconditionError("rf_fit: labels must be 0 or 1");
    (s.label == 1 ? has1 : has0) = true;
  }
  if (!has0 || !has1) throw PreconditionError("rf_fit: both classes must be present");

  const std::size_t max_features =
      options.max_features > 0
          ? std::min(options.max_features, d)
          : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));

  std::vector<Tree> trees(options.n_trees);
  const unsigned workers = std::max(1u, std::min<unsigned>(options.threads,
                                                           static_cast<unsigned>(options.n_trees)));
  if (workers == 1) {
    for (std::size_t t = 0; t < trees.size(); ++t) trees[t] = fit_tree(samples, options, max_features, t);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < trees.size(); t += workers) {
          trees[t] = fit_tree(samples, options, max_features, t);
        }
      });
    }
  }
  return RandomForest(d, std::move(trees));
}

double RandomForest::predict_proba(std::span<const double> x) const {
  if (x.size() != dimension_) {
    throw PreconditionError("rf_predict: expected dimension " + std::to_string(dimension_) +
                            ", got " + std::to_string(x.size()));
  }
  if (trees_.empty()) throw PreconditionError("rf_predict: empty forest");
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree.predict(x);
  return sum / static_cast<double>(trees_.size());
}

}  // namespace gma
