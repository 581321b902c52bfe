#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gma/fragment.hpp"
#include "gma/keypoints.hpp"

namespace gma {

/// Angle at `vertex` between the rays to `first` and `second`.
struct AngleSpec {
  KeypointId first;
  KeypointId vertex;
  KeypointId second;
  std::string_view description;
};

inline constexpr std::size_t kNumAngles = 10;
inline constexpr std::size_t kNumCoordChannels = 2 * kNumKeypoints;

extern const std::array<AngleSpec, kNumAngles> kAngleSpecs;

/// arccos of the clipped cosine between (p1 - p2) and (p3 - p2), in [0, pi].
/// Empty when either vector has zero length or is not finite.
std::optional<double> angle(Point2 p1, Point2 p2, Point2 p3);

enum class FeatureSet { kCoords, kAngles, kBoth };

std::string_view to_string(FeatureSet set);
/// Throws PreconditionError for anything but "coords", "angles", "both".
FeatureSet parse_feature_set(std::string_view text);
std::size_t channel_count(FeatureSet set);

/// channels x length matrix, row-major (channel-by-time).
class FeatureTensor {
public:
  FeatureTensor() = default;
  FeatureTensor(std::size_t channels, std::size_t length, FeatureSet set = FeatureSet::kCoords);

  std::size_t channels() const { return channels_; }
  std::size_t length() const { return length_; }
  FeatureSet feature_set() const { return set_; }

  double& at(std::size_t channel, std::size_t t) { return values_[channel * length_ + t]; }
  double at(std::size_t channel, std::size_t t) const { return values_[channel * length_ + t]; }

  std::span<double> row(std::size_t channel) { return {values_.data() + channel * length_, length_}; }
  std::span<const double> row(std::size_t channel) const {
    return {values_.data() + channel * length_, length_};
  }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  std::vector<std::string>& labels() { return labels_; }
  const std::vector<std::string>& labels() const { return labels_; }

  friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;

private:
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  FeatureSet set_ = FeatureSet::kCoords;
  std::vector<double> values_;
  std::vector<std::string> labels_;
};

enum class AngleSource {
  kPixels,      // resampled, corrected pixel coordinates (default)
  kNormalized,  // crop-normalized coordinates
};

/// 34 x L: x then y of each keypoint in keypoint order; occluded -> 0.
FeatureTensor coord_channels(const Fragment& fragment);

/// 10 x L in kAngleSpecs order; missing angles -> 0.
FeatureTensor angle_channels(const Fragment& fragment, AngleSource source = AngleSource::kPixels);

/// coords, angles, or coords stacked on top of angles.
FeatureTensor build_features(const Fragment& fragment, FeatureSet set,
                             AngleSource source = AngleSource::kPixels);

/// Debug CSV: header `channel,t0,...`, one row per channel.
void write_feature_csv(const FeatureTensor& tensor, const std::filesystem::path& path);

}  // namespace gma
