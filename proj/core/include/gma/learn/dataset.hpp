#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gma/features.hpp"
#include "gma/track.hpp"

namespace gma {

/// A feature tensor with the metadata of the video it was cut from.
struct LabeledTensor {
  FeatureTensor features;
  VideoInfo info;

  int label() const { return info.label; }
};

/// Fixed-dimension vector view of a tensor for the random forest.
struct FlatSample {
  std::vector<double> features;
  int label = 0;
  std::string subject_id;
};

/// Row-major (channel-by-time) flattening. Throws PreconditionError on
/// non-finite values.
FlatSample flatten(const FeatureTensor& tensor, int label, std::string subject_id = {});

/// Inverse of flatten's layout.
FeatureTensor unflatten(std::span<const double> values, std::size_t channels, std::size_t length,
                        FeatureSet set = FeatureSet::kCoords);

}  // namespace gma
