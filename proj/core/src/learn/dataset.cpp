#include "gma/learn/dataset.hpp"

#include <cmath>

#include "gma/error.hpp"

namespace gma {

FlatSample flatten(const FeatureTensor& tensor, int label, std::string subject_id) {
  FlatSample sample;
  sample.features.assign(tensor.values().begin(), tensor.values().end());
  for (double v : sample.features) {
    if (!std::isfinite(v)) throw PreconditionError("flatten: non-finite feature value");
  }
  sample.label = label;
  sample.subject_id = std::move(subject_id);
  return sample;
}

FeatureTensor unflatten(std::span<const double> values, std::size_t channels, std::size_t length,
                        FeatureSet set) {
  if (values.size() != channels * length) {
    throw PreconditionError("unflatten: size does not match channels x length");
  }
  FeatureTensor tensor(channels, length, set);
  std::copy(values.begin(), values.end(), tensor.values().begin());
  return tensor;
}

}  // namespace gma
