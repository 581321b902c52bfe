#include "gma/keypoints.hpp"

#include <algorithm>
#include <string>

namespace gma {
namespace {

constexpr std::array<std::string_view, kNumKeypoints> kNames = {
    "nose",       "head bottom",  "head top",       "left ear",       "right ear",
    "left shoulder", "right shoulder", "left elbow", "right elbow",   "left wrist",
    "right wrist", "left hip",    "right hip",      "left knee",      "right knee",
    "left ankle", "right ankle",
};

}  // namespace

std::string_view keypoint_name(KeypointId id) { return kNames[index_of(id)]; }

std::optional<KeypointId> parse_keypoint(std::string_view name) {
  std::string normalized(name);
  std::replace(normalized.begin(), normalized.end(), '_', ' ');
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (kNames[i] == normalized) return kAllKeypoints[i];
  }
  return std::nullopt;
}

}  // namespace gma
